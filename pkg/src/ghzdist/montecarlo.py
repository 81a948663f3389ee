"""Seeded Monte Carlo of the switch and repeater protocols.

Trials are cut into fixed-size chunks.  Chunk ``i`` draws from a Philox
stream keyed by ``(seed, i)``, so results do not depend on how many workers
process the chunks; partial statistics are merged in chunk order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .models import DomainError, NetworkParams, SwitchKind, _check_prob, ghz_weight_from_fidelity
from .repeater import final_fidelity_array, g_array, teleport_expected_time

CHUNK = 1 << 16
BSM_FAILURE_MODES = ("destroy", "retry")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.std_error


@dataclass(frozen=True)
class TrialRecord:
    """One end-to-end trial.

    ``per_node_wait[l]`` holds the residual memory waits at level ``l + 1``
    with shape ``(N**(m - l - 1), N)``: one row per fusion (or switch) at that
    level, one column per input.  ``per_fusion_bsm_attempts[l]`` counts the
    fusion attempts of those same stages.
    """

    total_rounds: int
    per_node_wait: tuple
    per_fusion_bsm_attempts: tuple


@dataclass
class TrialBatch:
    """Array form of many :class:`TrialRecord` s (leading axis = trial)."""

    total_rounds: np.ndarray
    waits: list
    attempts: list

    def __len__(self) -> int:
        return len(self.total_rounds)

    def records(self) -> Iterator[TrialRecord]:
        for t in range(len(self)):
            yield TrialRecord(
                int(self.total_rounds[t]),
                tuple(w[t] for w in self.waits),
                tuple(a[t] for a in self.attempts),
            )

    @classmethod
    def from_records(cls, records: list) -> "TrialBatch":
        levels = len(records[0].per_node_wait)
        return cls(
            np.array([r.total_rounds for r in records]),
            [np.stack([r.per_node_wait[l] for r in records]) for l in range(levels)],
            [np.stack([r.per_fusion_bsm_attempts[l] for r in records]) for l in range(levels)],
        )


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _chunks(trials: int) -> list:
    if isinstance(trials, bool) or not isinstance(trials, (int, np.integer)) or trials < 1:
        raise DomainError(f"trials must be a positive integer, got {trials!r}")
    return [(i, min(CHUNK, trials - start)) for i, start in enumerate(range(0, trials, CHUNK))]


def _map_chunks(fn: Callable, trials: int, workers: int) -> list:
    jobs = _chunks(trials)
    if workers <= 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _moments(x: np.ndarray) -> tuple:
    x = np.asarray(x, dtype=float)
    mean = float(np.mean(x))
    return len(x), mean, float(np.sum((x - mean) ** 2))


def _merge(parts: list, seed: int) -> McEstimate:
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    return McEstimate(mean, se, n, int(seed))


def simulate_max_geometric(n_users: int, q_eff: float, trials: int, seed: int,
                           workers: int = 1) -> McEstimate:
    """Empirical mean of the slowest of ``n_users`` independent geometric links."""
    _check_prob("q_eff", q_eff)
    if q_eff == 0:
        raise DomainError("q_eff must be > 0")

    def run(index: int, size: int):
        rng = chunk_rng(seed, index)
        return _moments(rng.geometric(q_eff, size=(size, n_users)).max(axis=1))

    return _merge(_map_chunks(run, trials, workers), seed)


def _parent_chunk(params: NetworkParams, kind: SwitchKind, rng: np.random.Generator, size: int):
    n = params.n_users
    q = params.q_eff()
    if kind is SwitchKind.SOURCE_BASED:
        links = rng.geometric(q, size=(size, n))
        rounds = links.max(axis=1)
        return rounds, rounds[:, None] - links
    rounds = rng.geometric(q**n * params.q_ghz, size=size)
    return rounds, np.zeros((size, n), dtype=rounds.dtype)


def simulate_parent(params: NetworkParams, kind: SwitchKind | str, trials: int, seed: int,
                    workers: int = 1) -> tuple:
    """Rounds until the parent switch has all links, plus per-link residual waits.

    Returns ``(McEstimate, waits)`` with ``waits`` of shape ``(trials, N)``.
    """
    kind = SwitchKind(kind)

    def run(index: int, size: int):
        return _parent_chunk(params, kind, chunk_rng(seed, index), size)

    parts = _map_chunks(run, trials, workers)
    est = _merge([_moments(r) for r, _ in parts], seed)
    return est, np.concatenate([w for _, w in parts])


def _sample_structure(params: NetworkParams, level: int, size: int, rng: np.random.Generator,
                      record: bool, bsm_failure: str):
    """Completion times of ``size`` independent level-``level`` structures.

    With ``destroy`` a failed fusion discards its inputs, which are all
    rebuilt from scratch; with ``retry`` the inputs stay in memory and the
    fusion is retried one round later.
    """
    n = params.n_users
    q_s = 1.0 / teleport_expected_time(n, params.q_bsm)
    attempts = rng.geometric(q_s, size=size) if q_s < 1 else np.ones(size, dtype=np.int64)
    builds = int(attempts.sum()) if bsm_failure == "destroy" else size
    if level == 1:
        if params.parent_kind is SwitchKind.SOURCE_BASED:
            links = rng.geometric(params.q_eff(), size=(builds, n))
            ready = links.max(axis=1)
            done = links
        else:
            ready = rng.geometric(params.q_eff() ** n * params.q_ghz, size=builds)
            done = np.broadcast_to(ready[:, None], (builds, n))
        child = None
    else:
        child_t, child = _sample_structure(params, level - 1, builds * n, rng, record, bsm_failure)
        done = child_t.reshape(builds, n)
        ready = done.max(axis=1)

    if bsm_failure == "destroy":
        ends = np.cumsum(attempts)
        total = np.add.reduceat(ready, ends - attempts)
        last = ends - 1
        extra = 0
    else:
        total = ready + attempts - 1
        last = np.arange(size)
        extra = attempts[:, None] - 1
    if not record:
        return total, None

    top_wait = (ready[last, None] - done[last] + extra)[:, None, :]
    waits = [top_wait]
    tries = [attempts[:, None]]
    if child is not None:
        cw, ca = child
        for w in cw:
            p = w.shape[1]
            waits.insert(-1, w.reshape(builds, n * p, n)[last])
        for a in ca:
            p = a.shape[1]
            tries.insert(-1, a.reshape(builds, n * p)[last])
    return total, (waits, tries)


def _repeater_chunk(params, level, seed, index, size, record, bsm_failure):
    rng = chunk_rng(seed, index)
    total, rec = _sample_structure(params, level, size, rng, record, bsm_failure)
    if not record:
        return total
    return TrialBatch(total, rec[0], rec[1])


def iter_repeater_batches(params: NetworkParams, level: int | None, trials: int, seed: int,
                          bsm_failure: str = "destroy") -> Iterator[TrialBatch]:
    level = level or params.nesting_level
    for index, size in _chunks(trials):
        yield _repeater_chunk(params, level, seed, index, size, True, bsm_failure)


def _record_stream(params, level, trials, seed, bsm_failure) -> Iterator[TrialRecord]:
    for batch in iter_repeater_batches(params, level, trials, seed, bsm_failure):
        yield from batch.records()


def simulate_repeater(params: NetworkParams, level: int | None, trials: int, seed: int,
                      workers: int = 1, bsm_failure: str = "destroy") -> tuple:
    """End-to-end rounds of the nested protocol.

    Returns ``(McEstimate, records)`` where ``records`` lazily regenerates
    the same trials chunk by chunk as :class:`TrialRecord` objects.
    """
    if bsm_failure not in BSM_FAILURE_MODES:
        raise DomainError(f"bsm_failure must be one of {BSM_FAILURE_MODES}")
    level = level or params.nesting_level
    if level < 1:
        raise DomainError("level must be >= 1")

    def run(index: int, size: int):
        return _moments(_repeater_chunk(params, level, seed, index, size, False, bsm_failure))

    est = _merge(_map_chunks(run, trials, workers), seed)
    return est, _record_stream(params, level, trials, seed, bsm_failure)


def _batch_fidelity(batch: TrialBatch, params: NetworkParams, subset_rule: str) -> np.ndarray:
    n = params.n_users
    w1 = batch.waits[0].astype(float)
    if params.parent_kind is SwitchKind.SOURCE_BASED:
        weight = ghz_weight_from_fidelity(params.f_src, n)
        keeps = params.p_bsm * params.p_mem**w1
        f = weight * g_array(keeps) + (1.0 - weight) / 2**n
    else:
        f = np.broadcast_to(g_array(np.full(n, params.p_bsm)), w1.shape[:-1]).copy()
    for w in batch.waits[1:]:
        t, p, _ = w.shape
        parents = ghz_weight_from_fidelity(f.reshape(t, p, n), n)
        keeps = params.p_bsm * params.p_mem ** w.astype(float)
        f, _ = final_fidelity_array(parents, keeps, subset_rule)
    return f.reshape(len(batch))


def estimate_fidelity_from_trials(records: Iterable, params: NetworkParams,
                                  subset_rule: str = "verbatim", seed: int = 0) -> McEstimate:
    """Average the per-trial fidelity given each trial's actual waits.

    Accepts :class:`TrialRecord` or :class:`TrialBatch` items.
    """
    parts = []
    pending = []
    for item in records:
        if isinstance(item, TrialBatch):
            parts.append(_moments(_batch_fidelity(item, params, subset_rule)))
        else:
            pending.append(item)
            if len(pending) == CHUNK:
                parts.append(_moments(_batch_fidelity(TrialBatch.from_records(pending), params, subset_rule)))
                pending = []
    if pending:
        parts.append(_moments(_batch_fidelity(TrialBatch.from_records(pending), params, subset_rule)))
    if not parts:
        raise DomainError("no trial records given")
    return _merge(parts, seed)
