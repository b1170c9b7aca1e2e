"""Moving every key group to one owning PE.

Two strategies: plain hash routing (pair -> PE hash(k) mod p), and the
prefix-sum shuffle, which hashes keys into a huge range, counts the volume
per hash value, and cuts the hash-ordered volume sequence into p equal
slices. The prefix rule gives each PE at most m'/p plus one group's volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import StepTrace
from .machine import (
    STREAM_HASH,
    STREAM_SHUFFLE,
    ExecutionReport,
    MachineConfig,
    derive_seed,
    hash_keys,
    log2_ceil,
)

TUPLE_WORDS = 2


class ShuffleError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShuffleConfig:
    c_exponent: float = 3.0
    seed: int = 0
    retry_limit: int = 8

    def __post_init__(self):
        if not self.c_exponent > 2:
            raise ValueError("c_exponent must exceed 2")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be positive")


@dataclass
class KeyAssignment:
    """Per group (aligned with trace.group_key): hash value, volume v(c),
    exclusive prefix n in hash order, and owner PE."""

    hash_value: np.ndarray
    volume: np.ndarray
    prefix: np.ndarray
    owner: np.ndarray
    m_prime: int
    attempts: int


@dataclass
class ShuffleResult:
    group_owner: np.ndarray
    received: np.ndarray
    report: ExecutionReport
    assignment: KeyAssignment | None = None

    def delivered_groups(self, trace: StepTrace, pair_owner: np.ndarray | None = None) -> list[tuple[int, int]]:
        """Assemble groups from the pairs as they arrived: (key, volume) per (PE, key)."""
        if pair_owner is None:
            pair_owner = self.group_owner[trace.pair_group]
        if len(trace.pair_key) == 0:
            return []
        combo = np.stack([pair_owner, trace.pair_key])
        cells, inv = np.unique(combo, axis=1, return_inverse=True)
        inv = inv.reshape(-1)
        values = np.bincount(inv, weights=trace.pair_vsize).astype(np.int64)
        ksize = np.zeros(cells.shape[1], dtype=np.int64)
        ksize[inv] = trace.pair_ksize
        return sorted(zip(cells[1].tolist(), (ksize + values).tolist()))


def assign_key(n: int, m_prime: int, p: int) -> int:
    if m_prime <= 0:
        raise ValueError("m_prime must be positive")
    if not 0 <= n < m_prime:
        raise ValueError("prefix must lie in 0..m_prime-1")
    return 1 + (p * n) // m_prime


def hash_owner(keys: np.ndarray, p: int, seed: int) -> np.ndarray:
    return hash_keys(keys, seed, p).astype(np.int64) + 1


def run_hash_shuffle(
    trace: StepTrace, pair_pe: np.ndarray, cfg: MachineConfig, seed: int | None = None
) -> ShuffleResult:
    """Route every pair straight to PE hash(k) mod p + 1 in one exchange."""
    if seed is None:
        seed = derive_seed(cfg.seed, STREAM_HASH)
    group_owner = hash_owner(trace.group_key, cfg.p, seed)
    pair_owner = group_owner[trace.pair_group]
    report = ExecutionReport(cfg.p)
    h = report.ledger.record_many("route", pair_pe, pair_owner, trace.pair_words)
    report.add_superstep("route", np.zeros(cfg.p), h, cfg)
    received = np.bincount(pair_owner - 1, weights=trace.pair_words, minlength=cfg.p).astype(np.int64)
    return ShuffleResult(group_owner, received, report)


def _hash_range(m: int, c: float) -> int:
    return max(2, math.ceil(max(m, 2) ** c))


def compute_assignment(trace: StepTrace, p: int, scfg: ShuffleConfig, m: int | None = None) -> KeyAssignment:
    """Hash keys into 1..m^c (retrying on collisions) and cut the volume prefix into p slices."""
    n_groups = len(trace.group_key)
    volume = np.bincount(trace.pair_group, weights=trace.pair_words, minlength=n_groups).astype(np.int64)
    m_prime = int(volume.sum())
    rng_size = _hash_range(m if m is not None else m_prime, scfg.c_exponent)
    for attempt in range(1, scfg.retry_limit + 1):
        hv = hash_keys(trace.group_key, derive_seed(scfg.seed, STREAM_SHUFFLE, attempt), rng_size)
        order = np.argsort(hv, kind="stable") if hv.dtype != object else np.array(
            sorted(range(n_groups), key=lambda i: hv[i]), dtype=np.int64
        )
        ordered = hv[order]
        if n_groups < 2 or not np.any(ordered[1:] == ordered[:-1]):
            break
    else:
        raise ShuffleError(
            f"hash collisions in all {scfg.retry_limit} attempts (range {rng_size}, {n_groups} keys)"
        )
    prefix = np.zeros(n_groups, dtype=np.int64)
    if n_groups:
        prefix[order] = np.concatenate([[0], np.cumsum(volume[order])[:-1]])
    owner = np.ones(n_groups, dtype=np.int64)
    if m_prime > 0:
        if p * m_prime < 2**62:
            owner = 1 + (p * prefix) // m_prime
        else:
            owner = np.array([1 + (p * int(n)) // m_prime for n in prefix], dtype=np.int64)
    return KeyAssignment(hv, volume, prefix, owner, m_prime, attempt)


def run_shuffle(
    trace: StepTrace,
    pair_pe: np.ndarray,
    cfg: MachineConfig,
    scfg: ShuffleConfig | None = None,
    m: int | None = None,
) -> ShuffleResult:
    """Prefix-sum shuffle of the pairs located at `pair_pe` (1-based, aligned with trace pairs).

    Phases: count (2-word tuples to PE h(k) mod p), prefix (collective),
    assign (replies along reversed routes), deliver (pair data to owners).
    """
    if scfg is None:
        scfg = ShuffleConfig(seed=cfg.seed)
    p = cfg.p
    pair_pe = np.asarray(pair_pe, dtype=np.int64)
    asg = compute_assignment(trace, p, scfg, m)
    report = ExecutionReport(p)
    ledger = report.ledger

    hv = asg.hash_value[trace.pair_group]
    if hv.dtype == object:
        counter_pe = np.array([int(v) % p for v in hv], dtype=np.int64) + 1
    else:
        counter_pe = (hv % np.uint64(p)).astype(np.int64) + 1
    zero = np.zeros(p)

    h = ledger.record_many("count", pair_pe, counter_pe, TUPLE_WORDS)
    report.add_superstep("count", zero, h, cfg)

    lg = log2_ceil(p)
    ledger.charge_collective("prefix", lg)
    report.add_superstep("prefix", np.full(p, float(lg)), ledger.phase("prefix").h, cfg)

    h = ledger.record_many("assign", counter_pe, pair_pe, TUPLE_WORDS)
    report.add_superstep("assign", zero, h, cfg)

    pair_owner = asg.owner[trace.pair_group]
    h = ledger.record_many("deliver", pair_pe, pair_owner, trace.pair_words)
    report.add_superstep("deliver", zero, h, cfg)

    received = np.bincount(pair_owner - 1, weights=trace.pair_words, minlength=p).astype(np.int64)
    report.extra["hash_attempts"] = asg.attempts
    return ShuffleResult(asg.owner, received, report, asg)


def volume_bound_holds(result: ShuffleResult, p: int) -> bool:
    """Exact check: every PE received at most m'/p + max group volume."""
    asg = result.assignment
    if asg is None or asg.m_prime == 0:
        return True
    m_hat_c = int(asg.volume.max())
    return bool(np.all(p * result.received <= asg.m_prime + p * m_hat_c))
