"""Full step execution: placement, map scheduling, optional remap, shuffle,
reduce scheduling, output placement; plus chained pipelines and CSV rows."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import StepParameters, StepTrace, WorkloadStep, compute_parameters, expand_step
from .machine import STREAM_SHUFFLE, ExecutionReport, MachineConfig, derive_seed
from .remap import MapTrace, needs_remap, run_redundant_remap
from .sched_bsp import (
    BspRunConfig,
    check_input_balance,
    d_records,
    place_outputs,
    placement_from_step,
    run_bsp_step,
)
from .sched_steal import Job, StealConfig, run_work_stealing
from .shuffle import ShuffleConfig, run_hash_shuffle, run_shuffle
from .workloads import Pipeline

SCHEDULERS = ("bsp", "steal", "steal-strikes")
SHUFFLES = ("hash", "prefix")
REMAPS = ("off", "redundant")


@dataclass(frozen=True)
class RunConfig:
    machine: MachineConfig
    scheduler: str = "bsp"
    shuffle: str = "hash"
    remap: str = "off"
    tau: float = 2.0
    force_remap: bool = False
    strike_b: float = 2.0
    strike_mode: str = "known"
    disperse_outputs: bool = True
    c_pre: float = 4.0
    max_events: int = 50_000_000

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.shuffle not in SHUFFLES:
            raise ValueError(f"unknown shuffle {self.shuffle!r}")
        if self.remap not in REMAPS:
            raise ValueError(f"unknown remap mode {self.remap!r}")
        if self.strike_mode not in ("known", "estimated"):
            raise ValueError(f"unknown strike mode {self.strike_mode!r}")

    def steal_config(self, m_prime: int) -> StealConfig:
        if self.scheduler == "steal-strikes":
            return StealConfig(
                strike=self.strike_mode, b=self.strike_b, m_prime=m_prime, c_pre=self.c_pre, max_events=self.max_events
            )
        return StealConfig(c_pre=self.c_pre, max_events=self.max_events)


def _steal_phase(name, pe, desc, cost, out, rc: RunConfig, report: ExecutionReport) -> np.ndarray:
    """Run one phase of calls with work stealing; returns the executing PE per call."""
    p = rc.machine.p
    lists: list[list[Job]] = [[] for _ in range(p)]
    for i, (home, d, c, o) in enumerate(zip(pe.tolist(), desc.tolist(), cost.tolist(), out.tolist())):
        lists[home - 1].append(Job(i, max(d, 1), c, o))
    sr = run_work_stealing(lists, rc.machine, rc.steal_config(int(out.sum())))
    report.absorb(sr, name + "/")
    job_pe = sr.extra["job_pe"]
    report.extra[name + "_striking"] = sr.extra["striking"]
    report.extra[name + "_strike_threshold"] = sr.extra["strike_threshold"]
    return np.array([job_pe[i] for i in range(len(pe))], dtype=np.int64)


def _maybe_remap(name, calls: MapTrace, rc: RunConfig, report: ExecutionReport) -> np.ndarray:
    p = rc.machine.p
    if rc.remap != "redundant":
        return calls.pe
    vols = calls.output_per_pe(p)
    if not (rc.force_remap or needs_remap(vols, calls.m_prime, calls.m_hat_prime, rc.tau)):
        return calls.pe
    part, rr = run_redundant_remap(calls, rc.machine, name)
    report.absorb(rr)
    report.extra[name + "_remapped"] = True
    report.extra[name + "_remap_ok"] = (rr.extra["remap_work_ok"], rr.extra["remap_output_ok"])
    return part.pe


def run_step(
    step: WorkloadStep | StepTrace, placement: Optional[np.ndarray], rc: RunConfig
) -> ExecutionReport:
    trace = step if isinstance(step, StepTrace) else expand_step(step)
    mc = rc.machine
    p = mc.p
    if placement is None:
        placement = placement_from_step(trace.step, p, mc.seed)
    placement = np.asarray(placement, dtype=np.int64)

    if rc.scheduler == "bsp" and rc.shuffle == "hash" and rc.remap == "off":
        return run_bsp_step(trace, placement, BspRunConfig(mc, disperse_outputs=rc.disperse_outputs, c_pre=rc.c_pre))

    params = compute_parameters(trace)
    report = ExecutionReport(p)
    in_vol = np.bincount(placement - 1, weights=trace.elem_size, minlength=p)
    report.extra["input_balanced"] = check_input_balance(in_vol, params.m, params.m_hat, p, rc.c_pre)

    # map
    if rc.scheduler == "bsp":
        report.add_superstep("map", np.bincount(placement - 1, weights=trace.elem_cost, minlength=p), 0, mc)
        elem_pe = placement
    else:
        elem_pe = _steal_phase("map", placement, trace.elem_size, trace.elem_cost, trace.elem_out, rc, report)
    report.extra["map_output_first"] = np.bincount(elem_pe - 1, weights=trace.elem_out, minlength=p).astype(np.int64)
    elem_pe = _maybe_remap("map", MapTrace(trace.elem_cost, trace.elem_out, trace.elem_size, elem_pe), rc, report)
    map_output = np.bincount(elem_pe - 1, weights=trace.elem_out, minlength=p).astype(np.int64)

    # shuffle
    pair_pe = elem_pe[trace.pair_elem]
    if rc.shuffle == "hash":
        sh = run_hash_shuffle(trace, pair_pe, mc)
    else:
        sh = run_shuffle(trace, pair_pe, mc, ShuffleConfig(seed=derive_seed(mc.seed, STREAM_SHUFFLE)), m=params.m)
    report.absorb(sh.report, "shuffle/")
    owner = sh.group_owner

    # reduce
    if rc.scheduler == "bsp":
        busy = np.bincount(owner - 1, weights=trace.group_cost, minlength=p) if len(owner) else np.zeros(p)
        report.add_superstep("reduce", busy, 0, mc)
        group_pe = owner
    else:
        group_pe = _steal_phase(
            "reduce", owner, trace.group_volume, trace.group_cost, trace.group_out_words, rc, report
        )
    group_pe = _maybe_remap(
        "reduce", MapTrace(trace.group_cost, trace.group_out_words, trace.group_volume, group_pe), rc, report
    )

    src, dst, size = place_outputs(trace, group_pe, p, mc.seed, rc.disperse_outputs and rc.scheduler == "bsp")
    h = report.ledger.record_many("disperse", src, dst, size)
    report.add_superstep("disperse", np.zeros(p), h, mc)
    report.output_words = np.bincount(dst - 1, weights=size, minlength=p).astype(np.int64) if len(dst) else np.zeros(p, dtype=np.int64)
    report.d_placement = d_records(trace, dst)
    report.extra.update(
        map_output=map_output,
        received_c=sh.received,
        shuffle=sh,
        group_owner=owner,
        group_pe=group_pe,
    )
    return report


def run_pipeline(
    pipeline: Pipeline, rc: RunConfig, placement: Optional[np.ndarray] = None
) -> list[tuple[StepTrace, ExecutionReport]]:
    """Execute chained steps; each later step starts where the previous outputs landed."""
    results = []
    step = pipeline.first
    rules = (None,) + pipeline.reduce_rules
    for i, _ in enumerate(rules):
        trace = expand_step(step)
        mc = rc.machine if i == 0 else replace(rc.machine, seed=derive_seed(rc.machine.seed, 1000 + i))
        report = run_step(trace, placement if i == 0 else None, replace(rc, machine=mc))
        results.append((trace, report))
        if i + 1 < len(rules):
            step = pipeline.rule.derive(report.d_placement, rules[i + 1])
    return results


def make_row(rc: RunConfig, params: StepParameters, report: ExecutionReport, seed: Optional[int] = None) -> dict:
    return {
        "scheduler": rc.scheduler,
        "shuffle": rc.shuffle,
        "remap": rc.remap,
        "p": rc.machine.p,
        "seed": rc.machine.seed if seed is None else seed,
        "w": params.w,
        "w_hat": params.w_hat,
        "m": params.m,
        "m_hat": params.m_hat,
        "bottleneck_work": report.bottleneck_work,
        "bottleneck_comm": report.bottleneck_comm,
        "max_output_words": report.max_output_words,
    }
