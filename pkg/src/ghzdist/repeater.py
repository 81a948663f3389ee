"""Rate and fidelity of the nested two-dimensional repeater.

Rate side: a level-``m`` structure waits for ``N`` children (the maximum of
their completion times) and then attempts its ``N(N-1)/2`` fusion BSMs.
Fidelity side: parents are GHZ/white-noise mixtures fused by Bell
measurements, with all residual noise lumped into single-qubit depolarizing
channels on the surviving qubits.
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import (
    DivergenceError,
    DomainError,
    KeepLike,
    NetworkParams,
    SwitchKind,
    _check_prob,
    _keep,
)

log = logging.getLogger(__name__)

RATE_MODES = ("verbatim", "renewal")
SUBSET_RULES = ("verbatim", "widened", "corrected")

MAX_K = 10**7


@dataclass(frozen=True)
class GhzMixture:
    n_qubits: int
    p_ghz: float

    def __post_init__(self):
        _check_prob("p_ghz", self.p_ghz)

    @property
    def fidelity(self) -> float:
        return self.p_ghz + (1.0 - self.p_ghz) / 2**self.n_qubits

    @classmethod
    def from_fidelity(cls, n_qubits: int, fidelity: float) -> "GhzMixture":
        floor = 2.0**-n_qubits
        if not floor - 1e-12 <= fidelity <= 1.0 + 1e-12:
            raise DomainError(f"fidelity {fidelity} outside [1/2^N, 1]")
        p = (fidelity - floor) / (1.0 - floor)
        return cls(n_qubits, min(1.0, max(0.0, p)))


@dataclass(frozen=True)
class FusionFidelityInput:
    n_users: int
    p_ghz: float
    keep_params: tuple

    def __post_init__(self):
        _check_prob("p_ghz", self.p_ghz)
        keeps = tuple(_keep(k) for k in self.keep_params)
        if len(keeps) != self.n_users:
            raise DomainError(f"need {self.n_users} keep parameters, got {len(keeps)}")
        object.__setattr__(self, "keep_params", keeps)


@dataclass(frozen=True)
class RateResult:
    expected_t_max: float
    expected_t_teleport: float
    total_time_s: float
    rate_hz: float


# ---------------------------------------------------------------------------
# fidelity algebra


@functools.lru_cache(maxsize=None)
def _subset_masks(n: int) -> np.ndarray:
    return np.array(list(itertools.product((False, True), repeat=n)), dtype=bool)


def _as_keeps(n_users: int, keeps: Sequence[KeepLike]) -> np.ndarray:
    k = np.array([_keep(x) for x in keeps], dtype=float)
    if k.shape != (n_users,):
        raise DomainError(f"need {n_users} keep parameters, got {len(keeps)}")
    return k


def _overlap_after_loss(n: int, survivors: np.ndarray) -> np.ndarray:
    """GHZ overlap of ``Tr_lost(GHZ) (x) I_lost`` given the number of untouched qubits."""
    out = np.where(survivors >= 1, 2.0 ** (survivors - n - 1.0), 2.0**-n)
    return np.where(survivors == n, 1.0, out)


def g_array(keeps: np.ndarray) -> np.ndarray:
    """Vectorized GHZ overlap after per-qubit depolarizing; last axis is the qubit axis.

    Expands over the set ``V`` of qubits that were replaced by noise: each
    such term contributes ``prod_V (1-p) prod_rest p`` times the overlap of
    the partially traced GHZ state with GHZ.
    """
    keeps = np.asarray(keeps, dtype=float)
    n = keeps.shape[-1]
    masks = _subset_masks(n)
    factors = np.where(masks, 1.0 - keeps[..., None, :], keeps[..., None, :])
    weights = factors.prod(axis=-1)
    survivors = n - masks.sum(axis=1)
    return (weights * _overlap_after_loss(n, survivors)).sum(axis=-1)


def g_function(n_users: int, keeps: Sequence[KeepLike]) -> float:
    return float(g_array(_as_keeps(n_users, keeps)))


def _noise_sum_array(keeps: np.ndarray) -> np.ndarray:
    """``sum_V prod_V (1-p_i)/2 prod_rest p_j`` over all subsets of the qubits."""
    n = keeps.shape[-1]
    masks = _subset_masks(n)
    factors = np.where(masks, (1.0 - keeps[..., None, :]) / 2.0, keeps[..., None, :])
    return factors.prod(axis=-1).sum(axis=-1)


def final_fidelity_array(
    p_ghz: np.ndarray, keeps: np.ndarray, subset_rule: str = "verbatim"
) -> tuple[np.ndarray, int]:
    """Vectorized fused fidelity; returns ``(fidelity, n_clamped)``.

    ``p_ghz`` holds one GHZ weight per parent (last axis), ``keeps`` one keep
    parameter per surviving qubit.

    ``verbatim`` sums mixed subsets with ``1 < |U| < N``, ``widened`` with
    ``0 < |U| < N``.  ``corrected`` assumes each set ``U`` of GHZ parents
    leaves its output qubits classically correlated and propagates the
    depolarizing channels through that state exactly.
    """
    if subset_rule not in SUBSET_RULES:
        raise DomainError(f"subset_rule must be one of {SUBSET_RULES}")
    p = np.asarray(p_ghz, dtype=float)
    k = np.asarray(keeps, dtype=float)
    n = k.shape[-1]
    p = np.broadcast_to(p, k.shape)
    masks = _subset_masks(n)
    sizes = masks.sum(axis=1)
    all_ghz = p.prod(axis=-1)
    all_mixed = (1.0 - p).prod(axis=-1)
    g = g_array(k)
    if subset_rule == "corrected":
        weights = np.where(masks, p[..., None, :], 1.0 - p[..., None, :]).prod(axis=-1)
        plus = np.where(masks, 1.0 + k[..., None, :], 1.0).prod(axis=-1)
        minus = np.where(masks, 1.0 - k[..., None, :], 1.0).prod(axis=-1)
        c = 2.0 ** (-n - 1) * (plus + minus)
        c = np.where(sizes == 0, 2.0**-n, c)
        c = np.where(sizes == n, g[..., None], c)
        f = (weights * c).sum(axis=-1)
    else:
        lo = 1 if subset_rule == "verbatim" else 0
        keep_u = (sizes > lo) & (sizes < n)
        w = np.where(masks, p[..., None, :], (1.0 - p[..., None, :]) / 2.0).prod(axis=-1)
        middle = 0.5 * (w * keep_u).sum(axis=-1) * _noise_sum_array(k)
        f = all_ghz * g + 0.5**n * all_mixed + middle
    bad = (f < 0.0) | (f > 1.0)
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        log.warning("final fidelity clamped into [0, 1] at %d point(s)", n_bad)
        f = np.clip(f, 0.0, 1.0)
    return f, n_bad


def final_fidelity(inp: FusionFidelityInput, subset_rule: str = "verbatim") -> float:
    f, _ = final_fidelity_array(
        np.full(inp.n_users, inp.p_ghz), np.array(inp.keep_params), subset_rule
    )
    return float(f)


def post_measurement_weights(n_users: int, p_ghz: float, subset_rule: str = "verbatim") -> dict:
    """Outcome-class weights of the fused state as written, with their raw sum.

    Mixed-subset entries are keyed by the tuple of GHZ parents ``U`` and
    already include the 1/2 prefactor.
    """
    _check_prob("p_ghz", p_ghz)
    if subset_rule not in ("verbatim", "widened"):
        raise DomainError("post_measurement_weights supports 'verbatim' and 'widened'")
    lo = 1 if subset_rule == "verbatim" else 0
    subsets = {}
    for size in range(lo + 1, n_users):
        for u in itertools.combinations(range(n_users), size):
            subsets[u] = 0.5 * p_ghz**size * (1.0 - p_ghz) ** (n_users - size)
    table = {
        "all_ghz": p_ghz**n_users,
        "all_mixed": (1.0 - p_ghz) ** n_users,
        "mixed_subsets": subsets,
    }
    table["total"] = math.fsum([table["all_ghz"], table["all_mixed"], *subsets.values()])
    return table


# ---------------------------------------------------------------------------
# rate


def teleport_expected_time(n_users: int, q_bsm: float) -> float:
    if not isinstance(q_bsm, (int, float)) or not math.isfinite(q_bsm) or not 0 <= q_bsm <= 1:
        raise DomainError(f"q_bsm must lie in (0, 1], got {q_bsm!r}")
    if q_bsm == 0:
        raise DivergenceError("q_bsm = 0: fusion never succeeds")
    return q_bsm ** -(n_users * (n_users - 1) / 2)


def _stage_success(params: NetworkParams) -> float:
    return 1.0 / teleport_expected_time(params.n_users, params.q_bsm)


def _level1_survival(k: np.ndarray, params: NetworkParams) -> np.ndarray:
    n = params.n_users
    q = params.q_eff()
    k = np.asarray(k, dtype=float)
    if params.parent_kind is SwitchKind.MEASUREMENT_BASED:
        r = q**n * params.q_ghz
        if r >= 1.0:
            return np.where(k >= 1, 0.0, 1.0)
        return np.exp(k * math.log1p(-r))
    if q >= 1.0:
        return np.where(k >= 1, 0.0, 1.0)
    s = np.exp(k * math.log1p(-q))
    with np.errstate(divide="ignore"):
        return -np.expm1(n * np.log1p(-s))


def _level1_horizon(params: NetworkParams, tol: float) -> int:
    n = params.n_users
    q = params.q_eff()
    if q <= 0.0:
        raise DivergenceError("link success probability is 0: no finite completion time")
    if params.parent_kind is SwitchKind.MEASUREMENT_BASED:
        r = q**n * params.q_ghz
        if r >= 1.0:
            return 1
        if r <= 0.0:
            raise DivergenceError("simultaneous success probability underflows to 0")
        return int(math.ceil(math.log(tol) / math.log1p(-r))) + 2
    if q >= 1.0:
        return 1
    return int(math.ceil(math.log(tol / n) / math.log1p(-q))) + 2


def _next_pow2(x: float) -> int:
    return 1 << max(4, int(math.ceil(math.log2(max(x, 16)))))


class RateModel:
    """Completion-time distributions for every nesting level of one network.

    ``survival(level)[k]`` is ``1 - F_T(k, level)`` where ``F_T(., level)``
    is the CDF of the time for all ``N`` inputs of a level-``level`` fusion
    to be ready (for level 1: all ``N`` switch links).

    ``verbatim`` evaluates the printed recursion, clamping into [0, 1].
    ``renewal`` uses the exact distribution of a child's completion time: a
    geometric number of independent wait-for-all rounds, matching the Monte
    Carlo semantics where a failed fusion destroys its inputs.
    """

    def __init__(self, params: NetworkParams, mode: str = "verbatim",
                 tail_tol: float = 1e-12, max_k: int = MAX_K):
        if mode not in RATE_MODES:
            raise DomainError(f"mode must be one of {RATE_MODES}")
        if not tail_tol > 0:
            raise DomainError("tail_tol must be > 0")
        self.params = params
        self.mode = mode
        self.tail_tol = tail_tol
        self.max_k = max_k
        self.clamp_counts: dict[int, int] = {}
        self._surv: dict[int, np.ndarray] = {}

    def survival(self, level: int, min_len: int = 0) -> np.ndarray:
        if isinstance(level, bool) or not isinstance(level, int) or level < 1:
            raise DomainError(f"level must be an integer >= 1, got {level!r}")
        s = self._surv.get(level)
        if s is None or len(s) < min_len:
            s = self._compute(level, min_len)
            self._surv[level] = s
        return s

    def cdf(self, level: int, min_len: int = 0) -> np.ndarray:
        return 1.0 - self.survival(level, min_len)

    def _compute(self, level: int, min_len: int) -> np.ndarray:
        if level == 1:
            horizon = max(_level1_horizon(self.params, self.tail_tol), min_len)
            if horizon > self.max_k:
                raise DivergenceError(
                    f"level-1 horizon {horizon} exceeds max_k={self.max_k} "
                    f"(q_eff={self.params.q_eff():.3g})"
                )
            return _level1_survival(np.arange(horizon + 1), self.params)
        if self.mode == "renewal":
            return self._renewal(level, min_len)
        return self._verbatim(level, min_len)

    def _child_completion_survival(self, level: int) -> np.ndarray:
        """Survival of a level-``level`` structure's total completion time."""
        s_a = self.survival(level)
        q_s = _stage_success(self.params)
        pmf_a = np.empty_like(s_a)
        pmf_a[0] = 0.0
        pmf_a[1:] = s_a[:-1] - s_a[1:]
        if q_s >= 1.0:
            return s_a
        mean_c = float(s_a.sum()) / q_s
        size = _next_pow2(max(2 * len(s_a), mean_c * (math.log(1 / self.tail_tol) + 10) * 1.5))
        if size > 4 * self.max_k:
            raise DivergenceError(f"completion-time grid {size} too large (mean {mean_c:.3g})")
        a_hat = np.fft.rfft(pmf_a, size)
        c_hat = q_s * a_hat / (1.0 - (1.0 - q_s) * a_hat)
        pmf_c = np.clip(np.fft.irfft(c_hat, size), 0.0, None)
        surv = np.cumsum(pmf_c[::-1])[::-1]
        surv = np.concatenate([surv[1:], [0.0]])
        cut = np.nonzero(surv < self.tail_tol / self.params.n_users)[0]
        end = int(cut[0]) + 1 if len(cut) else len(surv)
        return surv[:end]

    def _renewal(self, level: int, min_len: int) -> np.ndarray:
        s_c = self._child_completion_survival(level - 1)
        if len(s_c) < min_len + 1:
            s_c = np.concatenate([s_c, np.zeros(min_len + 1 - len(s_c))])
        with np.errstate(divide="ignore"):
            return -np.expm1(self.params.n_users * np.log1p(-s_c))

    def _verbatim(self, level: int, min_len: int) -> np.ndarray:
        n = self.params.n_users
        e_tel = teleport_expected_time(n, self.params.q_bsm)
        prev_len = len(self.survival(level - 1))
        horizon = max(prev_len, min_len, 2)
        while True:
            if horizon > self.max_k:
                raise DivergenceError(f"verbatim recursion did not saturate by k={self.max_k}")
            f_prev = self.cdf(level - 1, horizon + 1)
            out = np.empty(horizon + 1)
            out[0] = 0.0
            clamped = 0
            done_at = None
            for k in range(1, horizon + 1):
                u = np.arange(1, k + 1)
                raw = (e_tel * f_prev[k // u].sum()) ** n
                if raw > 1.0:
                    clamped += 1
                    out[k:] = 1.0
                    clamped += horizon - k
                    done_at = k
                    break
                out[k] = raw
            if done_at is not None or 1.0 - out[-1] < self.tail_tol:
                break
            horizon *= 2
        self.clamp_counts[level] = clamped
        return 1.0 - out

    def expected_t_max(self, level: int) -> float:
        s = self.survival(level)
        total = math.fsum(s)
        if len(s) >= 2 and s[-1] > 0 and s[-2] > 0:
            r = s[-1] / s[-2]
            if r < 1:
                total += s[-1] * r / (1 - r)
        return total


@functools.lru_cache(maxsize=256)
def rate_model(params: NetworkParams, mode: str = "verbatim", tail_tol: float = 1e-12) -> RateModel:
    return RateModel(params, mode, tail_tol)


def cdf_parent_ready(k: int, level: int, params: NetworkParams, mode: str = "verbatim") -> float:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    if isinstance(level, bool) or not isinstance(level, int) or level < 1:
        raise DomainError(f"level must be an integer >= 1, got {level!r}")
    if level == 1:
        return float(1.0 - _level1_survival(np.array([k]), params)[0])
    model = rate_model(params, mode)
    s = model.survival(level)
    if k < len(s):
        return float(1.0 - s[k])
    if mode == "verbatim":
        return float(1.0 - model.survival(level, k + 1)[k])
    return 1.0


def expected_t_max(level: int, params: NetworkParams, tail_tol: float = 1e-12,
                   mode: str = "verbatim") -> float:
    return rate_model(params, mode, tail_tol).expected_t_max(level)


def total_distribution_time(params: NetworkParams, mode: str = "verbatim") -> RateResult:
    t_max = expected_t_max(params.nesting_level, params, mode=mode)
    t_tel = teleport_expected_time(params.n_users, params.q_bsm)
    total = t_max * t_tel * params.delta_t
    return RateResult(t_max, t_tel, total, 1.0 / total)
