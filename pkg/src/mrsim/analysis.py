"""Bound checks, the balls-into-bins occupancy oracle, and CSV reports."""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import StepParameters
from .machine import ExecutionReport, MachineConfig

EXACT_GUARD = 10**7


class OccupancyGuardError(ValueError):
    """Exact occupancy is too expensive; use occupancy_mc instead."""


@dataclass(frozen=True)
class BoundCheck:
    name: str
    measured: float
    bound: float
    constant: float = 1.0

    @property
    def ratio(self) -> float:
        if self.bound == 0:
            return 0.0 if self.measured == 0 else math.inf
        return self.measured / self.bound

    @property
    def passed(self) -> bool:
        return self.ratio <= self.constant

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def log_term(p: int) -> float:
    return max(1.0, math.log2(p))


def theorem1_bounds(params: StepParameters, p: int) -> tuple[float, float, float]:
    """(work, communication, output) bound values with unit constants."""
    lg = log_term(p)
    return (
        params.w / p + params.w_hat + lg,
        params.m / p + params.m_hat + lg,
        params.m / p + params.m_hat,
    )


def check_theorem1(
    report: ExecutionReport, params: StepParameters, p: int, constant: float = 1.0
) -> tuple[BoundCheck, BoundCheck, BoundCheck]:
    wb, cb, ob = theorem1_bounds(params, p)
    return (
        BoundCheck("work", report.bottleneck_work, wb, constant),
        BoundCheck("comm", report.bottleneck_comm, cb, constant),
        BoundCheck("output", report.max_output_words, ob, constant),
    )


def fitted_constant(checks: Iterable[BoundCheck]) -> float:
    """Smallest constant under which every check in a sweep passes."""
    return max((c.ratio for c in checks), default=0.0)


# --- occupancy ---------------------------------------------------------------


def _count_bounded(b: int, p: int, t: int) -> int:
    """Number of the p**b placements of b labelled balls with every bin <= t."""
    comb = [[math.comb(s, j) for j in range(min(s, t) + 1)] for s in range(b + 1)]
    # ways[s]: placements of s labelled balls into the bins seen so far
    ways = [1] + [0] * b
    for _ in range(p):
        nxt = [0] * (b + 1)
        for s in range(b + 1):
            row = comb[s]
            acc = 0
            for j in range(len(row)):
                acc += row[j] * ways[s - j]
            nxt[s] = acc
        ways = nxt
    return ways[b]


def occupancy_exact(b: float, p: int) -> Fraction:
    """Expected maximum bin load for ceil(b) balls thrown uniformly into p bins.

    Sums P(max > t) over t, counting bounded placements with a DP over bins.
    """
    balls = math.ceil(b)
    if p < 1 or balls < 0:
        raise ValueError("need p >= 1 and b >= 0")
    if balls == 0:
        return Fraction(0)
    if p == 1:
        return Fraction(balls)
    if p * balls**3 > EXACT_GUARD:
        raise OccupancyGuardError(f"ô({balls},{p}) exceeds the exact-computation guard; use occupancy_mc")
    total = p**balls
    expect = Fraction(0)
    lower = -(-balls // p)
    expect += lower  # P(max > t) = 1 for t < ceil(b/p)
    for t in range(lower, balls):
        at_most = _count_bounded(balls, p, t)
        if at_most == total:
            break
        expect += Fraction(total - at_most, total)
    return expect


@dataclass(frozen=True)
class OccupancyEstimate:
    mean: float
    stderr: float
    trials: int


def occupancy_mc(b: float, p: int, trials: int, seed: int = 0, chunk: int = 20000) -> OccupancyEstimate:
    if trials < 1:
        raise ValueError("trials must be positive")
    balls = math.ceil(b)
    if p == 1:
        return OccupancyEstimate(float(balls), 0.0, trials)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0CC]))
    total = 0.0
    total_sq = 0.0
    done = 0
    probs = np.full(p, 1.0 / p)
    while done < trials:
        k = min(chunk, trials - done)
        loads = rng.multinomial(balls, probs, size=k).max(axis=1).astype(float)
        total += loads.sum()
        total_sq += (loads**2).sum()
        done += k
    mean = float(total / trials)
    var = max(total_sq / trials - mean**2, 0.0)
    stderr = math.sqrt(var / trials) if trials > 1 else 0.0
    return OccupancyEstimate(mean, stderr, trials)


@functools.lru_cache(maxsize=256)
def occupancy(b: float, p: int, trials: int = 20000, seed: int = 0) -> float:
    """Exact value when cheap, Monte Carlo otherwise."""
    try:
        return float(occupancy_exact(b, p))
    except OccupancyGuardError:
        return occupancy_mc(b, p, trials, seed).mean


def theorem2_bounds(params: StepParameters, cfg: MachineConfig, trials: int = 20000, seed: int = 0):
    """(work term w_hat*ô(w/w_hat,p), comm term m_hat*ô(m/m_hat,p), full time bound)."""
    if params.w_hat <= 0 or params.m_hat <= 0:
        raise ValueError("needs w_hat > 0 and m_hat > 0")
    work = params.w_hat * occupancy(params.w / params.w_hat, cfg.p, trials, seed)
    comm = params.m_hat * occupancy(params.m / params.m_hat, cfg.p, trials, seed)
    return work, comm, work + cfg.L + cfg.g * comm


def check_theorem2(
    report: ExecutionReport,
    params: StepParameters,
    cfg: MachineConfig,
    constant: float = 1.0,
    trials: int = 20000,
    seed: int = 0,
) -> tuple[BoundCheck, BoundCheck]:
    """Per-superstep work and time against the occupancy-based bound."""
    work, _, time_bound = theorem2_bounds(params, cfg, trials, seed)
    steps = [ph for ph in report.phases if ph.name.startswith("superstep")] or report.phases
    w_meas = max((ph.w_x for ph in steps), default=0.0)
    t_meas = max((ph.time for ph in steps), default=0.0)
    return BoundCheck("bsp-work", w_meas, work, constant), BoundCheck("bsp-time", t_meas, time_bound, constant)


# --- CSV -----------------------------------------------------------------------

CSV_COLUMNS = (
    "scheduler",
    "shuffle",
    "remap",
    "p",
    "seed",
    "w",
    "w_hat",
    "m",
    "m_hat",
    "bottleneck_work",
    "bottleneck_comm",
    "max_output_words",
)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


def emit_report(rows: Iterable[Mapping], out: Optional[io.TextIOBase] = None) -> str:
    """Write rows as CSV sorted by (scheduler, p, seed, shuffle, remap); returns the text."""
    ordered = sorted(rows, key=lambda r: (r["scheduler"], int(r["p"]), int(r["seed"]), r["shuffle"], r["remap"]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in ordered:
        writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
