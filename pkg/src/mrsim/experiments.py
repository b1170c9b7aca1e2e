"""Quantitative experiments shared by the acceptance suite and scripts/."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .analysis import log_term, occupancy_mc
from .core import StepTrace, expand_step
from .machine import MachineConfig
from .sched_bsp import BspRunConfig, PreconditionWarning, distribute_randomly, run_bsp_step
from .sched_steal import Job, StealConfig, run_work_stealing
from .shuffle import ShuffleConfig, run_shuffle
from .workloads import GeneratorSpec, generate


@dataclass
class RegimeResult:
    p: int
    map_work_ratio: list[float] = field(default_factory=list)
    max_calls: list[int] = field(default_factory=list)
    oracle: float = 0.0

    @property
    def mean_calls(self) -> float:
        return float(np.mean(self.max_calls))

    @property
    def occupancy_error(self) -> float:
        return abs(self.mean_calls - self.oracle) / self.oracle


def bsp_uniform_regime(n: int, ps, seeds: int, trials: int = 100_000) -> list[RegimeResult]:
    """BSP on n unit map calls: map work relative to map w/p, and max calls vs the occupancy oracle."""
    trace = expand_step(generate(GeneratorSpec("uniform", n)))
    map_w = int(trace.elem_cost.sum())
    out = []
    for p in ps:
        res = RegimeResult(p, oracle=occupancy_mc(n, p, trials, seed=p).mean)
        for seed in range(seeds):
            cfg = MachineConfig(p, seed=seed)
            rep = run_bsp_step(trace, distribute_randomly(trace, p, seed), BspRunConfig(cfg))
            res.map_work_ratio.append(rep.phases[0].w_x / (map_w / p))
            res.max_calls.append(int(rep.extra["map_calls"].max()))
        out.append(res)
    return out


@dataclass
class StealScaling:
    p: int
    work_ratio: list[float] = field(default_factory=list)
    comm_ratio: list[float] = field(default_factory=list)

    @property
    def work_c(self) -> float:
        return max(self.work_ratio)

    @property
    def comm_c(self) -> float:
        return max(self.comm_ratio)


def unit_jobs(n: int, p: int, concentrated: bool, seed: int = 0) -> list[list[Job]]:
    jobs = [Job(i, 1, 1, 1) for i in range(n)]
    lists: list[list[Job]] = [[] for _ in range(p)]
    if concentrated:
        lists[0] = jobs
    else:
        home = np.random.default_rng(seed).integers(0, p, n)
        for j, h in zip(jobs, home.tolist()):
            lists[h].append(j)
    return lists


def job_parameters(lists) -> tuple[int, int, int, int]:
    """(w, w_hat, m, m_hat) of a job set: m counts description and output words."""
    jobs = [j for js in lists for j in js]
    w = sum(j.exec_cost for j in jobs)
    w_hat = max(j.exec_cost for j in jobs)
    m = sum(j.description_words + j.output_words for j in jobs)
    m_hat = max(max(j.description_words, j.output_words) for j in jobs)
    return w, w_hat, m, m_hat


def steal_scaling(
    n: int, ps, seeds: int, concentrated: bool = True, L: float = 1.0, g: float = 1.0
) -> list[StealScaling]:
    """Work stealing on unit jobs: bottlenecks relative to w/p + w_hat + log p and m/p + m_hat + log p."""
    out = []
    for p in ps:
        res = StealScaling(p)
        for seed in range(seeds):
            lists = unit_jobs(n, p, concentrated, seed)
            w, w_hat, m, m_hat = job_parameters(lists)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PreconditionWarning)
                rep = run_work_stealing(lists, MachineConfig(p, L, g, seed), StealConfig())
            res.work_ratio.append(rep.bottleneck_work / (w / p + w_hat + log_term(p)))
            res.comm_ratio.append(rep.bottleneck_comm / (m / p + m_hat + log_term(p)))
        out.append(res)
    return out


def spread(values) -> float:
    """Relative spread max/min - 1 of positive constants."""
    values = list(values)
    return max(values) / min(values) - 1.0


def expander_witness(n: int = 10_000, degree: int = 3, p: int = 16, seeds: int = 20) -> list[float]:
    """Fraction of words(B) that the prefix shuffle moves between PEs, per seed."""
    fractions = []
    for seed in range(seeds):
        trace = expand_step(generate(GeneratorSpec("expander", n, degree=degree, seed=seed)))
        cfg = MachineConfig(p, seed=seed)
        pair_pe = distribute_randomly(trace, p, seed)[trace.pair_elem]
        res = run_shuffle(trace, pair_pe, cfg, ShuffleConfig(seed=seed))
        fractions.append(res.report.ledger.total_sent("deliver") / trace.words_b)
    return fractions


def acceptance_traces() -> list[tuple[str, StepTrace]]:
    """Named full-size workloads reused by the shuffle and strike checks."""
    specs = [
        ("uniform-1e5", GeneratorSpec("uniform", 100_000)),
        ("zipf-1e4", GeneratorSpec("zipf", 10_000, key_count=2_000, zipf_theta=1.1, seed=1)),
        ("expander-1e4", GeneratorSpec("expander", 10_000, degree=3)),
        ("single-heavy-1e3", GeneratorSpec("single_heavy", 1_000)),
        ("heavy-reducer-1e4", GeneratorSpec("heavy_reducer", 10_000, heavy_volume=2_000, p=4)),
        ("all-same-key-1e3", GeneratorSpec("all_same_key", 1_000)),
    ]
    return [(name, expand_step(generate(spec))) for name, spec in specs]
