"""Single-switch ("parent") GHZ distribution: rounds, rate and fidelity.

The source-based switch stores one Bell pair per client until all links are
up, then teleports a locally prepared GHZ state through them.  The
measurement-based switch keeps nothing: all clients must succeed in the same
round, after which a GHZ projection is applied to the switch qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import DecisionGrid
from .models import (
    DivergenceError,
    DomainError,
    NetworkParams,
    SwitchKind,
    _check_prob,
    effective_success_probability,
    ghz_weight_from_fidelity,
    memory_keep_after_wait,
)
from .repeater import g_function


@dataclass(frozen=True)
class ParentResult:
    expected_rounds: float
    fidelity: float
    rate_hz: float


def _check_q(q: float, name: str = "q_eff") -> None:
    _check_prob(name, q)
    if q == 0.0:
        raise DivergenceError(f"{name} = 0: expected number of rounds is infinite")


def expected_rounds_all_links(n_users: int, q_eff: float) -> float:
    """Mean of the maximum of ``n_users`` iid geometric(q_eff) round counts.

    Inclusion-exclusion over the set of links still pending.
    """
    if n_users < 1:
        raise DomainError("n_users must be >= 1")
    _check_q(q_eff)
    if q_eff == 1.0:
        return 1.0
    log_fail = math.log1p(-q_eff)
    terms = [
        (-1) ** (j + 1) * math.comb(n_users, j) / -math.expm1(j * log_fail)
        for j in range(1, n_users + 1)
    ]
    return math.fsum(terms)


def ideal_rounds() -> float:
    return 1.0


def rounds_gap(n_users: int, q_link: float, parallel_attempts: int) -> float:
    q_eff = effective_success_probability(q_link, parallel_attempts)
    return expected_rounds_all_links(n_users, q_eff) - ideal_rounds()


def min_parallel_attempts(n_users: int, q_link: float, epsilon: float,
                          max_attempts: int = 10**9) -> int:
    """Smallest number of parallel attempts whose gap to the ideal is <= epsilon."""
    _check_q(q_link, "q_link")
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")

    def ok(a: int) -> bool:
        return rounds_gap(n_users, q_link, a) <= epsilon

    if ok(1):
        return 1
    hi = 2
    while not ok(hi):
        hi *= 2
        if hi > max_attempts:
            raise DivergenceError(f"no feasible parallelism below {max_attempts}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def measurement_based_expected_rounds(n_users: int, q_eff: float, q_ghz: float = 1.0) -> float:
    """Geometric wait for every link (and the GHZ projection) to succeed at once."""
    _check_q(q_eff)
    _check_q(q_ghz, "q_ghz")
    p = q_eff**n_users * q_ghz
    if p == 0.0:
        raise DivergenceError("simultaneous success probability underflows to 0")
    return 1.0 / p


def expected_residual_wait(n_users: int, q_eff: float) -> float:
    """Mean number of rounds a finished link idles until the slowest one is up."""
    return max(0.0, expected_rounds_all_links(n_users, q_eff) - 1.0 / q_eff)


def _source_keeps(params: NetworkParams, waits: Sequence[float]) -> list:
    return [params.p_bsm * memory_keep_after_wait(params.p_mem, w).keep for w in waits]


def source_based_fidelity(params: NetworkParams, waits: Sequence[float] | None = None) -> float:
    """Fidelity of the teleported GHZ state.

    Without ``waits`` every stored pair idles for the expected residual wait;
    pass integer ``waits`` to evaluate one realisation exactly.
    """
    n = params.n_users
    if waits is None:
        waits = [expected_residual_wait(n, params.q_eff())] * n
    if len(waits) != n:
        raise DomainError(f"need {n} waits, got {len(waits)}")
    w = ghz_weight_from_fidelity(params.f_src, n)
    g = g_function(n, _source_keeps(params, waits))
    return w * g + (1.0 - w) / 2**n


def measurement_based_fidelity(params: NetworkParams) -> float:
    return g_function(params.n_users, [params.p_bsm] * params.n_users)


def parent_fidelity(params: NetworkParams, kind: SwitchKind | None = None) -> float:
    kind = SwitchKind(kind or params.parent_kind)
    if kind is SwitchKind.SOURCE_BASED:
        return source_based_fidelity(params)
    return measurement_based_fidelity(params)


def parent_rounds(params: NetworkParams, kind: SwitchKind | None = None) -> float:
    kind = SwitchKind(kind or params.parent_kind)
    if kind is SwitchKind.SOURCE_BASED:
        return expected_rounds_all_links(params.n_users, params.q_eff())
    return measurement_based_expected_rounds(params.n_users, params.q_eff(), params.q_ghz)


def parent_rate(params: NetworkParams, kind: SwitchKind | None = None) -> ParentResult:
    """Rounds, fidelity and rate of one parent switch.

    The source-based switch pays ``q_bsm**-N`` for its N teleportation BSMs;
    the GHZ projection's success probability is already part of the
    measurement-based round count.
    """
    kind = SwitchKind(kind or params.parent_kind)
    rounds = parent_rounds(params, kind)
    overhead = params.q_bsm ** -params.n_users if kind is SwitchKind.SOURCE_BASED else 1.0
    return ParentResult(
        expected_rounds=rounds,
        fidelity=parent_fidelity(params, kind),
        rate_hz=1.0 / (rounds * params.delta_t * overhead),
    )


def parent_fidelity_difference_grid(params: NetworkParams, p_bsm_range: Sequence[float],
                                    f_src_range: Sequence[float]) -> DecisionGrid:
    """Source-based and measurement-based fidelity over the (p_bsm, f_src) plane."""
    xs = np.asarray(p_bsm_range, dtype=float)
    ys = np.asarray(f_src_range, dtype=float)
    if xs.size == 0 or ys.size == 0:
        raise DomainError("both ranges must be non-empty")
    src = np.empty((ys.size, xs.size))
    meas = np.empty_like(src)
    for i, f in enumerate(ys):
        for j, p in enumerate(xs):
            cell = params.replace(p_bsm=float(p), f_src=float(f))
            src[i, j] = source_based_fidelity(cell)
            meas[i, j] = measurement_based_fidelity(cell)
    return DecisionGrid("p_bsm", xs, "f_src", ys, {"source": src, "measurement": meas},
                        metric="fidelity")
