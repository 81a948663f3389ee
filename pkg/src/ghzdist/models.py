"""Physical and stochastic primitives shared by the rate and fidelity models.

Depolarizing channels are parameterized by their *keep* probability ``p``:
``rho -> p * rho + (1 - p) * Tr_q(rho) (x) I/2`` on the affected qubit.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import numbers
from dataclasses import dataclass
from typing import Union


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class DivergenceError(ArithmeticError):
    """An expectation or series has no finite value."""


class SwitchKind(str, enum.Enum):
    SOURCE_BASED = "source"
    MEASUREMENT_BASED = "measurement"


def _check_prob(name: str, value: float, *, open_low: bool = False) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise DomainError(f"{name} must be a finite number, got {value!r}")
    if value < 0.0 or value > 1.0 or (open_low and value == 0.0):
        bounds = "(0, 1]" if open_low else "[0, 1]"
        raise DomainError(f"{name} must lie in {bounds}, got {value!r}")


@dataclass(frozen=True)
class DepolarizingParam:
    keep: float

    def __post_init__(self):
        _check_prob("keep", self.keep)

    def __float__(self) -> float:
        return float(self.keep)


KeepLike = Union[DepolarizingParam, float]


def _keep(x: KeepLike) -> float:
    if isinstance(x, DepolarizingParam):
        return x.keep
    _check_prob("keep", x)
    return float(x)


@dataclass(frozen=True)
class NetworkParams:
    """Every physical and protocol knob of the network.

    ``L0_in`` is the spacing between neighbouring end nodes.  With nesting
    level ``m`` the elementary switch links span ``L0_in / 2**(m - 1)``.
    ``q_link`` overrides the attenuation model for the elementary link when
    set; ``q_ghz`` is the success probability of the measurement-based
    switch's GHZ projection.
    """

    n_users: int = 3
    L0_in: float = 10.0
    L_att: float = 20.0
    eta_c: float = 0.9
    q_bsm: float = 0.9
    p_bsm: float = 0.99
    p_mem: float = 0.999
    delta_t: float = 1e-6
    nesting_level: int = 1
    parallel_attempts: int = 1
    f_src: float = 1.0
    q_link: float | None = None
    q_ghz: float = 1.0
    parent_kind: SwitchKind = SwitchKind.SOURCE_BASED

    def __post_init__(self):
        if isinstance(self.parent_kind, str) and not isinstance(self.parent_kind, SwitchKind):
            try:
                object.__setattr__(self, "parent_kind", SwitchKind(self.parent_kind))
            except ValueError as exc:
                raise DomainError(f"unknown parent_kind {self.parent_kind!r}") from exc
        for name in ("n_users", "nesting_level", "parallel_attempts"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise DomainError(f"{name} must be an integer, got {v!r}")
        if self.n_users < 2:
            raise DomainError("n_users must be >= 2")
        if self.nesting_level < 1:
            raise DomainError("nesting_level must be >= 1")
        if self.parallel_attempts < 1:
            raise DomainError("parallel_attempts must be >= 1")
        for name in ("L0_in", "L_att", "delta_t"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.L0_in < 0:
            raise DomainError("L0_in must be >= 0")
        if self.L_att <= 0:
            raise DomainError("L_att must be > 0")
        if self.delta_t <= 0:
            raise DomainError("delta_t must be > 0")
        for name in ("eta_c", "p_bsm", "p_mem", "f_src"):
            _check_prob(name, getattr(self, name))
        _check_prob("q_bsm", self.q_bsm, open_low=True)
        _check_prob("q_ghz", self.q_ghz, open_low=True)
        if self.q_link is not None:
            _check_prob("q_link", self.q_link)
        if self.f_src < 2.0 ** -self.n_users - 1e-15:
            raise DomainError(f"f_src must be >= 1/2^N = {2.0 ** -self.n_users}")

    def replace(self, **changes) -> "NetworkParams":
        return dataclasses.replace(self, **changes)

    @property
    def link_distance(self) -> float:
        return self.L0_in / 2 ** (self.nesting_level - 1)

    def link_probability(self) -> float:
        """Single-attempt success probability of one elementary link."""
        if self.q_link is not None:
            return float(self.q_link)
        return link_success_probability(self.link_distance, self.eta_c, self.L_att)

    def q_eff(self) -> float:
        return effective_success_probability(self.link_probability(), self.parallel_attempts)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["parent_kind"] = self.parent_kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise DomainError(f"unknown NetworkParams fields: {sorted(unknown)}")
        return cls(**d)


def link_success_probability(L0_in: float, eta_c: float, L_att: float) -> float:
    for name, v in (("L0_in", L0_in), ("L_att", L_att)):
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")
    if L0_in < 0:
        raise DomainError("L0_in must be >= 0")
    if L_att <= 0:
        raise DomainError("L_att must be > 0")
    _check_prob("eta_c", eta_c)
    return 0.5 * eta_c**2 * math.exp(-L0_in / L_att)


def effective_success_probability(q_link: float, parallel_attempts: int) -> float:
    """Probability that at least one of ``parallel_attempts`` tries succeeds."""
    _check_prob("q_link", q_link)
    if isinstance(parallel_attempts, bool) or not isinstance(parallel_attempts, int):
        raise DomainError("parallel_attempts must be an integer")
    if parallel_attempts < 1:
        raise DomainError("parallel_attempts must be >= 1")
    # -expm1(a*log1p(-q)) keeps precision when q is tiny
    if q_link == 1.0:
        return 1.0
    return -math.expm1(parallel_attempts * math.log1p(-q_link))


def memory_keep_after_wait(p_mem: KeepLike, t_wait: float) -> DepolarizingParam:
    """Keep parameter after ``t_wait`` steps of per-step memory depolarization.

    Non-integer waits are accepted so that mean waits can be plugged in.
    """
    p = _keep(p_mem)
    if isinstance(t_wait, bool) or not isinstance(t_wait, numbers.Real) or not math.isfinite(t_wait):
        raise DomainError(f"t_wait must be finite, got {t_wait!r}")
    if t_wait < 0:
        raise DomainError("t_wait must be >= 0")
    if t_wait == 0:
        return DepolarizingParam(1.0)
    return DepolarizingParam(p**t_wait)


def compose_depolarizing(a: KeepLike, b: KeepLike) -> DepolarizingParam:
    return DepolarizingParam(_keep(a) * _keep(b))


def ghz_weight_from_fidelity(fidelity: float, n_qubits: int) -> float:
    """Weight ``p`` of the GHZ component in ``p GHZ + (1-p) I/2^n`` with the given fidelity."""
    floor = 2.0**-n_qubits
    return (fidelity - floor) / (1.0 - floor)
