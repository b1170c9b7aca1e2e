"""Two-superstep BSP execution with randomized static load balancing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import StepTrace, WorkloadStep, compute_parameters, expand_step
from .machine import (
    STREAM_DISPERSE,
    STREAM_HASH,
    STREAM_PLACEMENT,
    ExecutionReport,
    MachineConfig,
    derive_seed,
    rng_for,
)
from .shuffle import run_hash_shuffle


class PreconditionWarning(UserWarning):
    """Input distribution is outside the range the load-balancing bounds assume."""


@dataclass(frozen=True)
class BspRunConfig:
    machine: MachineConfig
    hash_seed: Optional[int] = None
    disperse_outputs: bool = True
    assembly_beta: float = 0.0
    c_pre: float = 4.0

    @property
    def effective_hash_seed(self) -> int:
        if self.hash_seed is not None:
            return self.hash_seed
        return derive_seed(self.machine.seed, STREAM_HASH)


def distribute_randomly(step: WorkloadStep | StepTrace, p: int, seed: int) -> np.ndarray:
    """Uniform independent PE (1-based) for every element, aligned with step.elements."""
    n = step.n if isinstance(step, StepTrace) else len(step.elements)
    return rng_for(seed, STREAM_PLACEMENT).integers(1, p + 1, size=n, dtype=np.int64)


def placement_from_step(step: WorkloadStep, p: int, seed: int) -> np.ndarray:
    """The step's own placement if it has one, else a random distribution."""
    if step.initial_placement is None:
        return distribute_randomly(step, p, seed)
    step.check_placement(p)
    return np.array([step.initial_placement[e.id] for e in step.elements], dtype=np.int64)


def check_input_balance(
    volume_per_pe: np.ndarray, m: int, m_hat: int, p: int, c_pre: float, what: str = "input"
) -> bool:
    """Warn when some PE holds more than c_pre * (m/p + m_hat) words."""
    limit = c_pre * (m / p + m_hat)
    worst = int(np.max(volume_per_pe, initial=0))
    if worst > limit:
        warnings.warn(
            f"{what} volume {worst} on one PE exceeds {c_pre}*(m/p + m_hat) = {limit:.1f}",
            PreconditionWarning,
            stacklevel=3,
        )
        return False
    return True


def place_outputs(
    trace: StepTrace, group_pe: np.ndarray, p: int, seed: int, disperse: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Locate D: the first output of each reduce call stays where it ran, later
    ones go to independent uniform PEs when `disperse` is set.

    Returns (src PE, dst PE, size) aligned with trace outputs.
    """
    og = trace.output_group
    src = group_pe[og] if len(og) else np.zeros(0, dtype=np.int64)
    dst = src.copy()
    if disperse and len(og):
        first = np.ones(len(og), dtype=bool)
        first[1:] = og[1:] != og[:-1]
        extra = ~first
        if extra.any():
            rng = rng_for(seed, STREAM_DISPERSE)
            dst[extra] = rng.integers(1, p + 1, size=int(extra.sum()), dtype=np.int64)
    return src, dst, trace.output_size


def d_records(trace: StepTrace, out_pe: np.ndarray) -> list[tuple[int, int, int]]:
    keys = trace.group_key[trace.output_group]
    return list(zip(keys.tolist(), trace.output_size.tolist(), out_pe.tolist()))


def run_bsp_step(
    step: WorkloadStep | StepTrace,
    placement: np.ndarray,
    cfg: BspRunConfig,
) -> ExecutionReport:
    """Superstep 1: local map calls, pairs routed to PE hash(k) mod p.
    Superstep 2: group assembly, reduce calls, dispersal of extra outputs."""
    trace = step if isinstance(step, StepTrace) else expand_step(step)
    mc = cfg.machine
    p = mc.p
    placement = np.asarray(placement, dtype=np.int64)
    if len(placement) != trace.n:
        raise ValueError("placement must cover every element")
    params = compute_parameters(trace)
    in_vol = np.bincount(placement - 1, weights=trace.elem_size, minlength=p)
    balanced = check_input_balance(in_vol, params.m, params.m_hat, p, cfg.c_pre)

    report = ExecutionReport(p)
    map_busy = np.bincount(placement - 1, weights=trace.elem_cost, minlength=p)
    pair_pe = placement[trace.pair_elem]
    routed = run_hash_shuffle(trace, pair_pe, mc, cfg.effective_hash_seed)
    report.ledger.merge(routed.report.ledger, "superstep1/")
    h1 = routed.report.phases[0].h
    report.add_superstep("superstep1", map_busy, h1, mc)

    owner = routed.group_owner
    red_busy = np.bincount(owner - 1, weights=trace.group_cost, minlength=p) if len(owner) else np.zeros(p)
    red_busy = red_busy + cfg.assembly_beta * routed.received
    src, dst, size = place_outputs(trace, owner, p, mc.seed, cfg.disperse_outputs)
    h2 = report.ledger.record_many("superstep2/disperse", src, dst, size)
    report.add_superstep("superstep2", red_busy, h2, mc)

    report.output_words = np.bincount(dst - 1, weights=size, minlength=p).astype(np.int64) if len(dst) else np.zeros(p, dtype=np.int64)
    report.d_placement = d_records(trace, dst)
    report.extra.update(
        map_calls=np.bincount(placement - 1, minlength=p),
        map_output=np.bincount(placement - 1, weights=trace.elem_out, minlength=p).astype(np.int64),
        received_c=routed.received,
        group_owner=owner,
        input_balanced=balanced,
    )
    return report
