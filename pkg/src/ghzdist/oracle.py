"""Dense density-matrix brute force for small systems (at most 10 qubits).

Qubit 0 is the most significant tensor factor.  Every operation works on the
``(2,)*2n`` tensor view of the matrix: row axes first, then column axes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import DomainError, KeepLike, _keep

MAX_QUBITS = 10

_SQ2 = 1.0 / np.sqrt(2.0)
# outcome name -> (amplitudes over |ab>, apply X to partner, apply Z to partner)
BELL_BASIS = {
    "phi+": (np.array([1, 0, 0, 1]) * _SQ2, False, False),
    "phi-": (np.array([1, 0, 0, -1]) * _SQ2, False, True),
    "psi+": (np.array([0, 1, 1, 0]) * _SQ2, True, False),
    "psi-": (np.array([0, 1, -1, 0]) * _SQ2, True, True),
}


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise DomainError(f"at most {MAX_QUBITS} qubits supported, got {self.n_qubits}")
        d = 2**self.n_qubits
        if self.data.shape != (d, d):
            raise DomainError(f"expected a {d}x{d} matrix, got {self.data.shape}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.data + self.data.conj().T) / 2)[0])

    def check(self, tol: float = 1e-12, psd_tol: float | None = None) -> None:
        if abs(self.trace() - 1.0) > tol:
            raise AssertionError(f"trace {self.trace()} != 1")
        if self.hermiticity_error() > tol:
            raise AssertionError(f"not Hermitian (err {self.hermiticity_error():.3g})")
        if psd_tol is not None and self.min_eigenvalue() < -psd_tol:
            raise AssertionError(f"negative eigenvalue {self.min_eigenvalue():.3g}")

    def _tensor(self) -> np.ndarray:
        return self.data.reshape((2,) * (2 * self.n_qubits))

    @classmethod
    def _from_tensor(cls, t: np.ndarray, n: int) -> "DensityMatrix":
        d = 2**n
        return cls(n, np.ascontiguousarray(t).reshape(d, d))


def _check_n(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise DomainError(f"qubit count must be in [1, {MAX_QUBITS}], got {n!r}")


def _check_index(rho: DensityMatrix, q: int) -> None:
    if not 0 <= q < rho.n_qubits:
        raise DomainError(f"qubit index {q} out of range for {rho.n_qubits} qubits")


def ghz_state(n: int) -> DensityMatrix:
    _check_n(n)
    d = 2**n
    psi = np.zeros(d, dtype=complex)
    psi[0] = psi[-1] = _SQ2
    return DensityMatrix(n, np.outer(psi, psi.conj()))


def maximally_mixed(n: int) -> DensityMatrix:
    _check_n(n)
    d = 2**n
    return DensityMatrix(n, np.eye(d, dtype=complex) / d)


def ghz_mixture(n: int, p_ghz: float) -> DensityMatrix:
    """``p_ghz |GHZ><GHZ| + (1 - p_ghz) I/2^n``."""
    return mix([ghz_state(n), maximally_mixed(n)], [p_ghz, 1.0 - p_ghz])


def mix(states: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    n = states[0].n_qubits
    data = sum(w * s.data for s, w in zip(states, weights))
    return DensityMatrix(n, data)


def tensor(*states: DensityMatrix) -> DensityMatrix:
    n = sum(s.n_qubits for s in states)
    if n > MAX_QUBITS:
        raise DomainError(f"tensor product has {n} qubits, cap is {MAX_QUBITS}")
    data = states[0].data
    for s in states[1:]:
        data = np.kron(data, s.data)
    return DensityMatrix(n, data)


def apply_pauli(rho: DensityMatrix, qubit: int, pauli: str) -> DensityMatrix:
    """Conjugate ``rho`` by a single-qubit Pauli (global phases drop out)."""
    _check_index(rho, qubit)
    n = rho.n_qubits
    t = rho._tensor()
    row, col = qubit, n + qubit
    for p in pauli:
        if p == "X":
            t = np.flip(t, axis=(row, col))
        elif p == "Z":
            shape = [1] * (2 * n)
            shape[row] = 2
            sign_r = np.array([1.0, -1.0]).reshape(shape)
            shape[row], shape[col] = 1, 2
            sign_c = np.array([1.0, -1.0]).reshape(shape)
            t = t * sign_r * sign_c
        elif p == "Y":
            t = apply_pauli(apply_pauli(DensityMatrix._from_tensor(t, n), qubit, "Z"), qubit, "X")._tensor()
        elif p != "I":
            raise DomainError(f"unknown Pauli {p!r}")
    return DensityMatrix._from_tensor(t, n)


def apply_depolarizing(rho: DensityMatrix, qubit: int, keep: KeepLike) -> DensityMatrix:
    p = _keep(keep)
    _check_index(rho, qubit)
    if p == 1.0:
        return rho
    # full depolarization equals the uniform Pauli twirl
    twirl = rho.data + sum(apply_pauli(rho, qubit, s).data for s in ("X", "Y", "Z"))
    return DensityMatrix(rho.n_qubits, p * rho.data + (1.0 - p) * twirl / 4.0)


def _project(rho: DensityMatrix, qubits: Sequence[int], vec: np.ndarray) -> DensityMatrix:
    """Unnormalized ``<v| rho |v>`` on ``qubits``; the rest keep their order."""
    n = rho.n_qubits
    k = len(qubits)
    t = rho._tensor()
    src = list(qubits) + [n + q for q in qubits]
    t = np.moveaxis(t, src, list(range(2 * k)))
    r = 2 ** (n - k)
    m = t.reshape(2**k, 2**k, r, r)
    out = np.einsum("i,j,ijkl->kl", vec.conj(), vec, m)
    return DensityMatrix(n - k, out)


def _remap(index: int, removed: Sequence[int]) -> int:
    return index - sum(1 for r in removed if r < index)


def bell_fuse(
    rho: DensityMatrix,
    q1: int,
    q2: int,
    x_targets: Sequence[int] = (),
    z_target: int | None = None,
) -> DensityMatrix:
    """Bell-state measurement on ``(q1, q2)`` averaged over outcomes.

    Corrections follow the swapping convention phi+ -> I, phi- -> Z,
    psi+ -> X, psi- -> XZ.  X acts on every qubit in ``x_targets`` (the
    partner's lineage) and Z on ``z_target``; both are indices into the
    input state and must survive the measurement.  The measured qubits are
    traced out; the remaining qubits keep their relative order.
    """
    _check_index(rho, q1)
    _check_index(rho, q2)
    if q1 == q2:
        raise DomainError("bell_fuse needs two distinct qubits")
    removed = (q1, q2)
    for q in list(x_targets) + ([z_target] if z_target is not None else []):
        _check_index(rho, q)
        if q in removed:
            raise DomainError("correction target is one of the measured qubits")
    xs = [_remap(q, removed) for q in x_targets]
    z = _remap(z_target, removed) if z_target is not None else None
    total = None
    for vec, do_x, do_z in BELL_BASIS.values():
        branch = _project(rho, removed, vec)
        if do_x:
            for q in xs:
                branch = apply_pauli(branch, q, "X")
        if do_z and z is not None:
            branch = apply_pauli(branch, z, "Z")
        total = branch.data if total is None else total + branch.data
    return DensityMatrix(rho.n_qubits - 2, total)


def ghz_measure(rho: DensityMatrix, qubits: Sequence[int], targets: Sequence[int]) -> DensityMatrix:
    """Projective GHZ-basis measurement on ``qubits`` with Pauli feed-forward.

    Basis states are ``(|x> + (-1)^s |~x>)/sqrt2`` with ``x[0] = 0``.  Target
    ``j`` receives X when ``x[j] = 1``; target 0 receives Z when ``s = 1``.
    This steers Bell partners of ``qubits`` into a GHZ state.
    """
    k = len(qubits)
    if k != len(targets) or k < 1:
        raise DomainError("need one correction target per measured qubit")
    for q in list(qubits) + list(targets):
        _check_index(rho, q)
    removed = tuple(qubits)
    tg = [_remap(q, removed) for q in targets]
    d = 2**k
    total = None
    for bits in itertools.product((0, 1), repeat=k - 1):
        x = (0,) + bits
        xi = int("".join(map(str, x)), 2)
        for s in (0, 1):
            vec = np.zeros(d)
            vec[xi] = _SQ2
            vec[d - 1 - xi] = -_SQ2 if s else _SQ2
            branch = _project(rho, removed, vec)
            for j, bit in enumerate(x):
                if bit:
                    branch = apply_pauli(branch, tg[j], "X")
            if s:
                branch = apply_pauli(branch, tg[0], "Z")
            total = branch.data if total is None else total + branch.data
    return DensityMatrix(rho.n_qubits - k, total)


def fidelity_with_ghz(rho: DensityMatrix) -> float:
    d = rho.dim
    m = rho.data
    return float(0.5 * (m[0, 0] + m[0, d - 1] + m[d - 1, 0] + m[d - 1, d - 1]).real)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    diff = a.data - b.data
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


@dataclass(frozen=True)
class FusionLayout:
    """Which parent qubits are Bell-measured together, in order.

    Qubits are labelled ``(parent, slot)``.  ``bsms`` lists
    ``(q1, q2, partner_parent)``: X corrections go to every surviving qubit
    of ``partner_parent`` and Z to its output qubit.
    """

    n_users: int
    qubits_per_parent: int
    bsms: tuple
    outputs: tuple


def complete_graph_layout(n_users: int) -> FusionLayout:
    """One parent per end node; every pair of parents shares one BSM.

    Parent ``i`` holds its end-node qubit in slot 0 and in the remaining
    slots one qubit per other parent, in increasing parent order.  BSMs run
    in lexicographic pair order, so the first ``N - 1`` form a star that
    fuses all parents and the rest close cycles.
    """
    def slot(i: int, j: int) -> int:
        return 1 + (j if j < i else j - 1)

    bsms = tuple(
        ((i, slot(i, j)), (j, slot(j, i)), j)
        for i, j in itertools.combinations(range(n_users), 2)
    )
    outputs = tuple((i, 0) for i in range(n_users))
    return FusionLayout(n_users, n_users, bsms, outputs)


def fuse_parents_state(
    parents: Sequence[DensityMatrix],
    keeps: Sequence[KeepLike] | None = None,
    layout: FusionLayout | None = None,
) -> DensityMatrix:
    """Fuse parent states along ``layout`` and depolarize the output qubits."""
    n = len(parents)
    layout = layout or complete_graph_layout(n)
    per = layout.qubits_per_parent
    if any(p.n_qubits != per for p in parents):
        raise DomainError(f"every parent must have {per} qubits")
    rho = tensor(*parents)
    labels = [(i, s) for i in range(n) for s in range(per)]
    for a, b, partner in layout.bsms:
        q1, q2 = labels.index(a), labels.index(b)
        xs = [k for k, lab in enumerate(labels) if lab[0] == partner and k not in (q1, q2)]
        zt = labels.index((partner, 0)) if (partner, 0) in labels else (xs[0] if xs else None)
        rho = bell_fuse(rho, q1, q2, x_targets=xs, z_target=zt)
        labels = [lab for k, lab in enumerate(labels) if k not in (q1, q2)]
    order = [labels.index(o) for o in layout.outputs]
    if order != sorted(order):
        raise DomainError("layout outputs must survive in order")
    if keeps is not None:
        if len(keeps) != len(order):
            raise DomainError("need one keep per output qubit")
        for q, k in zip(order, keeps):
            rho = apply_depolarizing(rho, q, k)
    return rho


def fuse_parents_oracle(
    n_users: int,
    p_ghz: float | Sequence[float],
    keeps: Sequence[KeepLike],
    layout: FusionLayout | None = None,
) -> float:
    """GHZ fidelity after fusing ``n_users`` mixture parents (brute force)."""
    if n_users < 2 or n_users * n_users > MAX_QUBITS:
        raise DomainError(f"n_users={n_users} needs {n_users**2} qubits, cap is {MAX_QUBITS}")
    weights = [p_ghz] * n_users if np.isscalar(p_ghz) else list(p_ghz)
    parents = [ghz_mixture(n_users, w) for w in weights]
    return fidelity_with_ghz(fuse_parents_state(parents, keeps, layout))


def source_switch_oracle(
    n_users: int, ghz_weight: float, memory_keeps: Sequence[KeepLike], p_bsm: KeepLike
) -> float:
    """Source-based switch replay.

    A local GHZ mixture on ``g_i`` is teleported over stored Bell pairs
    ``(s_i, c_i)``; ``s_i`` first suffers memory noise, each teleported
    qubit then suffers BSM noise.
    """
    n = n_users
    if 3 * n > MAX_QUBITS:
        raise DomainError("source switch replay limited to n_users <= 3")
    bell = ghz_state(2)
    rho = tensor(ghz_mixture(n, ghz_weight), *([bell] * n))
    labels = [("g", i) for i in range(n)] + [x for i in range(n) for x in (("s", i), ("c", i))]
    for i, k in enumerate(memory_keeps):
        rho = apply_depolarizing(rho, labels.index(("s", i)), k)
    for i in range(n):
        q1, q2, c = labels.index(("g", i)), labels.index(("s", i)), labels.index(("c", i))
        rho = bell_fuse(rho, q1, q2, x_targets=[c], z_target=c)
        labels = [lab for k, lab in enumerate(labels) if k not in (q1, q2)]
        rho = apply_depolarizing(rho, labels.index(("c", i)), p_bsm)
    return fidelity_with_ghz(rho)


def measurement_switch_oracle(n_users: int, p_bsm: KeepLike) -> float:
    """Measurement-based switch replay: noisy switch qubits, then GHZ projection."""
    n = n_users
    if 2 * n > MAX_QUBITS:
        raise DomainError("measurement switch replay limited to n_users <= 5")
    rho = tensor(*([ghz_state(2)] * n))
    switch = [2 * i for i in range(n)]
    for q in switch:
        rho = apply_depolarizing(rho, q, p_bsm)
    clients = [2 * i + 1 for i in range(n)]
    return fidelity_with_ghz(ghz_measure(rho, switch, clients))
