"""Redundant remapping: re-run every call after a weighted prefix-sum redistribution.

Weights combine measured work and output volume, W_a = w_a + o_a * w'/m',
so that cutting the weight sequence into p equal slices bounds both the
re-executed work and the output of every PE. All comparisons use the
integer weights m' * W_a = m' * w_a + o_a * w'.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .machine import ExecutionReport, MachineConfig, log2_ceil


@dataclass
class MapTrace:
    """Measured calls of one phase, in any order.

    Arrays are aligned per call: work w_a, output words o_a, input words
    (what has to move if the call is re-homed) and the executing PE.
    """

    work: np.ndarray
    output: np.ndarray
    input_words: np.ndarray
    pe: np.ndarray

    def __post_init__(self):
        self.work = np.asarray(self.work, dtype=np.int64)
        self.output = np.asarray(self.output, dtype=np.int64)
        self.input_words = np.asarray(self.input_words, dtype=np.int64)
        self.pe = np.asarray(self.pe, dtype=np.int64)

    @property
    def w_prime(self) -> int:
        return int(self.work.sum())

    @property
    def m_prime(self) -> int:
        return int(self.output.sum())

    @property
    def w_hat_prime(self) -> int:
        return int(self.work.max(initial=0))

    @property
    def m_hat_prime(self) -> int:
        return int(self.output.max(initial=0))

    def output_per_pe(self, p: int) -> np.ndarray:
        return np.bincount(self.pe - 1, weights=self.output, minlength=p).astype(np.int64)


@dataclass
class WeightedPartition:
    """New home per call, which calls are overload elements, and the scaled
    integer weights (m' * W_a, or plain fallbacks when m' or w' is zero)."""

    pe: np.ndarray
    overload: np.ndarray
    scaled_weight: np.ndarray
    scale: int
    total: int

    def nonoverload_weight(self, p: int) -> np.ndarray:
        keep = ~self.overload
        return np.bincount(self.pe[keep] - 1, weights=self.scaled_weight[keep], minlength=p).astype(np.int64)


def compute_weight(w_a, o_a, w_prime, m_prime) -> Fraction:
    if m_prime == 0:
        return Fraction(w_a)
    return Fraction(w_a) + Fraction(o_a) * Fraction(w_prime) / Fraction(m_prime)


def needs_remap(volumes: Sequence[int], m_prime: int, m_hat_prime: int, tau: float = 2.0) -> bool:
    """True iff some PE's output exceeds tau * (m'/p + m_hat')."""
    if not tau > 1:
        raise ValueError("tau must exceed 1")
    p = len(volumes)
    t = Fraction(tau)
    return any(p * int(v) > t * (m_prime + p * m_hat_prime) for v in volumes)


def weighted_partition(trace: MapTrace, p: int) -> WeightedPartition:
    """Assign calls, taken in (PE, index) order, to PE 1 + floor(p * prefix / W).

    A call whose weight interval runs past its PE's slice end is that PE's
    overload element; everything else fits inside the slice.
    """
    w_prime, m_prime = trace.w_prime, trace.m_prime
    if m_prime > 0 and w_prime > 0:
        scaled = trace.work * m_prime + trace.output * w_prime
        scale = m_prime
    elif m_prime > 0:
        scaled, scale = trace.output.copy(), 1
    else:
        scaled, scale = trace.work.copy(), 1
    n = len(scaled)
    order = np.lexsort((np.arange(n), trace.pe))
    total = int(scaled.sum())
    new_pe = np.ones(n, dtype=np.int64)
    overload = np.zeros(n, dtype=bool)
    if n == 0:
        return WeightedPartition(new_pe, overload, scaled, scale, 0)
    if total == 0:
        # nothing to balance: spread by count
        new_pe[order] = 1 + (p * np.arange(n)) // n
        return WeightedPartition(new_pe, overload, scaled, scale, 0)
    ordered = scaled[order]
    start = np.concatenate([[0], np.cumsum(ordered)[:-1]])
    end = start + ordered
    # zero-weight calls at the very end start at `total`; keep them on PE p
    owner = np.array([min(1 + (p * int(s)) // total, p) for s in start], dtype=np.int64)
    # slice end of PE i is i*total/p; overload iff end > that, i.e. p*end > i*total
    over = np.array([p * int(e) > int(i) * total for e, i in zip(end, owner)], dtype=bool)
    new_pe[order] = owner
    overload[order] = over
    return WeightedPartition(new_pe, overload, scaled, scale, total)


def remap_bounds_hold(trace: MapTrace, new_pe: np.ndarray, p: int) -> tuple[bool, bool]:
    """Exact integer check of work <= 2w'/p + w_hat' and output <= 2m'/p + m_hat' per PE."""
    work = np.bincount(new_pe - 1, weights=trace.work, minlength=p).astype(np.int64)
    out = np.bincount(new_pe - 1, weights=trace.output, minlength=p).astype(np.int64)
    work_ok = bool(np.all(p * work <= 2 * trace.w_prime + p * trace.w_hat_prime))
    out_ok = bool(np.all(p * out <= 2 * trace.m_prime + p * trace.m_hat_prime))
    return work_ok, out_ok


def run_redundant_remap(
    trace: MapTrace, cfg: MachineConfig, phase: str = "map"
) -> tuple[WeightedPartition, ExecutionReport]:
    """Redistribute all calls by weight and re-execute them at their new homes.

    Report phases: prefix collective, input redistribution, re-execution.
    `extra` carries the post-hoc bound verdicts.
    """
    p = cfg.p
    part = weighted_partition(trace, p)
    report = ExecutionReport(p)
    lg = log2_ceil(p)
    report.ledger.charge_collective(f"{phase}-remap-prefix", lg)
    report.add_superstep(
        f"{phase}-remap-prefix", np.full(p, float(lg)), report.ledger.phase(f"{phase}-remap-prefix").h, cfg
    )
    h = report.ledger.record_many(f"{phase}-remap-move", trace.pe, part.pe, trace.input_words)
    report.add_superstep(f"{phase}-remap-move", np.zeros(p), h, cfg)
    busy = np.bincount(part.pe - 1, weights=trace.work, minlength=p)
    report.add_superstep(f"{phase}-remap-exec", busy, 0, cfg)
    work_ok, out_ok = remap_bounds_hold(trace, part.pe, p)
    report.extra.update(
        remap_work_ok=work_ok,
        remap_output_ok=out_ok,
        moved=int(np.count_nonzero(part.pe != trace.pe)),
        output_per_pe=np.bincount(part.pe - 1, weights=trace.output, minlength=p).astype(np.int64),
    )
    return part, report
