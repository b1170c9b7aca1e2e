"""Invariant suites run by `mrsim verify` and by the test-suite."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .analysis import emit_report, occupancy_exact, occupancy_mc
from .core import compute_parameters, expand_step, sequential_reference
from .machine import MachineConfig, hash_keys, rng_for
from .pipeline import REMAPS, SCHEDULERS, SHUFFLES, RunConfig, make_row, run_step
from .remap import MapTrace, compute_weight, remap_bounds_hold, weighted_partition
from .sched_bsp import PreconditionWarning
from .shuffle import volume_bound_holds
from .workloads import random_step


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""


def _quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PreconditionWarning)
        return fn(*args, **kw)


def random_skewed_trace(seed: int, p: int) -> MapTrace:
    """Map trace with heavy-tailed work and output, concentrated on low PE ids."""
    rng = rng_for(seed, 300)
    n = int(rng.integers(1, 400))
    work = np.floor(rng.pareto(1.2, n) * 3).astype(np.int64)
    output = np.floor(rng.pareto(1.0, n) * 4).astype(np.int64)
    if rng.random() < 0.2:
        output[int(rng.integers(0, n))] += int(output.sum()) * 5
    pe = np.minimum(rng.geometric(0.5, n), p).astype(np.int64)
    return MapTrace(work, output, rng.integers(1, 5, n), pe)


def suite_oracle(instances: int = 100, seed: int = 0) -> list[PropertyResult]:
    bad = []
    for i in range(instances):
        step = random_step(seed * 100_003 + i)
        ref = sequential_reference(step)
        trace = expand_step(step)
        p = (1, 2, 4, 8)[i % 4]
        for sched in SCHEDULERS:
            for sh in SHUFFLES:
                for rm in REMAPS:
                    rc = RunConfig(MachineConfig(p, seed=i), sched, sh, rm, force_remap=True)
                    rep = _quiet(run_step, trace, None, rc)
                    if sorted((k, s) for k, s, _ in rep.d_placement) != ref:
                        bad.append(f"instance {i} p={p} {sched}/{sh}/{rm}")
    return [PropertyResult("outputs equal sequential reference", not bad, "; ".join(bad[:5]))]


def suite_lemma_remap(instances: int = 100, seed: int = 0) -> list[PropertyResult]:
    work_bad, out_bad, total_bad, over_bad = [], [], [], []
    for i in range(instances):
        p = (2, 3, 4, 8, 16, 64)[i % 6]
        tr = random_skewed_trace(seed * 100_003 + i, p)
        part = weighted_partition(tr, p)
        work_ok, out_ok = remap_bounds_hold(tr, part.pe, p)
        if not work_ok:
            work_bad.append(i)
        if not out_ok:
            out_bad.append(i)
        if tr.m_prime > 0 and tr.w_prime > 0:
            W = sum(compute_weight(w, o, tr.w_prime, tr.m_prime) for w, o in zip(tr.work.tolist(), tr.output.tolist()))
            if W != 2 * tr.w_prime:
                total_bad.append(i)
        nonover = part.nonoverload_weight(p)
        per_pe_over = np.bincount(part.pe[part.overload] - 1, minlength=p)
        if np.any(p * nonover > part.total) or np.any(per_pe_over > 1):
            over_bad.append(i)
    return [
        PropertyResult("re-executed work <= 2w'/p + w_hat'", not work_bad, str(work_bad[:5])),
        PropertyResult("output <= 2m'/p + m_hat'", not out_bad, str(out_bad[:5])),
        PropertyResult("total weight = 2w'", not total_bad, str(total_bad[:5])),
        PropertyResult("slice weight <= W/p with at most one overload element", not over_bad, str(over_bad[:5])),
    ]


def suite_shuffle_bound(instances: int = 100, seed: int = 0) -> list[PropertyResult]:
    bad = []
    for i in range(instances):
        step = random_step(seed * 100_003 + i)
        p = (1, 2, 4, 8, 16)[i % 5]
        for sched in ("bsp", "steal"):
            rc = RunConfig(MachineConfig(p, seed=i), sched, "prefix")
            rep = _quiet(run_step, step, None, rc)
            if not volume_bound_holds(rep.extra["shuffle"], p):
                bad.append(f"instance {i} p={p} {sched}")
    return [PropertyResult("received C volume <= m'/p + m_hat_C", not bad, "; ".join(bad[:5]))]


def suite_strike(instances: int = 100, seed: int = 0) -> list[PropertyResult]:
    bad = []
    for i in range(instances):
        step = random_step(seed * 100_003 + i)
        trace = expand_step(step)
        p = (2, 4, 8, 16)[i % 4]
        rc = RunConfig(MachineConfig(p, seed=i), "steal-strikes", "hash")
        rep = _quiet(run_step, trace, None, rc)
        m_prime, m_hat = int(trace.elem_out.sum()), int(trace.elem_out.max(initial=0))
        if np.any(p * rep.extra["map_output"] > 2 * m_prime + p * m_hat):
            bad.append(i)
    return [PropertyResult("map output per PE <= 2m'/p + m_hat'", not bad, str(bad[:5]))]


def suite_occupancy(trials: int = 100_000, seed: int = 0) -> list[PropertyResult]:
    fixed = occupancy_exact(2, 2) == Fraction(3, 2) and occupancy_exact(3, 3) == Fraction(17, 9)
    bad = []
    for b in range(1, 13):
        for p in range(1, 7):
            exact = float(occupancy_exact(b, p))
            est = occupancy_mc(b, p, trials, seed + 31 * b + p)
            if abs(est.mean - exact) > 3 * est.stderr + 1e-12:
                bad.append(f"b={b} p={p}: {est.mean:.4f} vs {exact:.4f} (se {est.stderr:.4f})")
    return [
        PropertyResult("exact values 3/2 and 17/9", fixed),
        PropertyResult("Monte Carlo within 3 standard errors of exact", not bad, "; ".join(bad[:5])),
    ]


def suite_determinism(instances: int = 10, seed: int = 0) -> list[PropertyResult]:
    bad = []
    for i in range(instances):
        step = random_step(seed * 100_003 + i)
        trace = expand_step(step)
        params = compute_parameters(trace)
        rows = []
        for _ in range(2):
            rc = RunConfig(MachineConfig(4, seed=i), SCHEDULERS[i % 3], SHUFFLES[i % 2], REMAPS[(i // 2) % 2])
            rows.append(emit_report([make_row(rc, params, _quiet(run_step, trace, None, rc))]))
        if rows[0] != rows[1]:
            bad.append(i)
    return [PropertyResult("identical flags give identical CSV", not bad, str(bad))]


def suite_hash(instances: int = 100_000, seed: int = 0) -> list[PropertyResult]:
    buckets = 16
    counts = np.bincount(hash_keys(np.arange(instances), seed, buckets).astype(np.int64), minlength=buckets)
    expected = instances / buckets
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 15 degrees of freedom; 0.1% critical value is 37.70
    return [
        PropertyResult("chi-square uniformity (df=15, alpha=0.001)", chi2 < 37.70, f"chi2={chi2:.2f}"),
        PropertyResult("max bucket within 10% of mean", bool(counts.max() <= 1.1 * expected), f"max={counts.max()}"),
    ]


SUITES: dict[str, Callable[..., list[PropertyResult]]] = {
    "oracle": suite_oracle,
    "lemma-remap": suite_lemma_remap,
    "shuffle-bound": suite_shuffle_bound,
    "strike": suite_strike,
    "occupancy": suite_occupancy,
    "determinism": suite_determinism,
    "hash": suite_hash,
}
