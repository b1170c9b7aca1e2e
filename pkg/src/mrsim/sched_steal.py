"""Distributed-memory work stealing over arrays of jobs with variable description length.

Each PE sorts its jobs by decreasing description length (bucketed by
floor(log2 x)), executes from the head, and answers steal requests by sending
the tail half of its unstarted jobs, so long descriptions tend to stay put
and short ones travel. The strike option stops a PE from doing local work
once it has produced more than b*m'/p output words.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .machine import (
    STREAM_SAMPLE,
    STREAM_STEAL,
    EngineDiagnostic,
    EventEngine,
    ExecutionReport,
    MachineConfig,
    PhaseRecord,
    derive_seed,
    log2_ceil,
    rng_for,
)
from .sched_bsp import check_input_balance


@dataclass(frozen=True)
class Job:
    id: int
    description_words: int
    exec_cost: float
    output_words: int = 0

    def __post_init__(self):
        if self.description_words < 1:
            raise ValueError(f"job {self.id}: description_words must be >= 1")
        if self.exec_cost < 0 or self.output_words < 0:
            raise ValueError(f"job {self.id}: negative cost or output")


STRIKE_MODES = ("off", "known", "estimated")


@dataclass(frozen=True)
class StealConfig:
    strike: str = "off"
    b: float = 2.0
    m_prime: Optional[int] = None
    sample_fraction: float = 0.05
    order: str = "sort"
    request_words: int = 1
    retry_delay: Optional[float] = None
    c_pre: float = 4.0
    max_events: int = 50_000_000

    def __post_init__(self):
        if self.strike not in STRIKE_MODES:
            raise ValueError(f"unknown strike mode {self.strike!r}")
        if self.strike != "off" and not self.b > 1:
            raise ValueError("strike factor b must exceed 1")
        if self.order not in ("sort", "permute"):
            raise ValueError(f"unknown job order {self.order!r}")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must lie in (0, 1]")


def length_bucket(x: int) -> int:
    return x.bit_length() - 1


def sort_jobs_desc_length(jobs: Sequence[Job]) -> list[Job]:
    """Stable bucket sort by floor(log2 description_words), largest bucket first."""
    buckets: dict[int, list[Job]] = {}
    for job in jobs:
        buckets.setdefault(length_bucket(job.description_words), []).append(job)
    return [job for b in sorted(buckets, reverse=True) for job in buckets[b]]


def split_subarray(queue: Sequence[Job], round_up: bool = False) -> tuple[list[Job], list[Job]]:
    """Split unstarted jobs into (kept, sent); sent is the tail floor(u/2).

    An empty `sent` means the request is rejected. `round_up` sends
    ceil(u/2) instead, which a PE on strike uses so its last job can leave.
    """
    u = len(queue)
    k = (u + 1) // 2 if round_up else u // 2
    return list(queue[: u - k]), list(queue[u - k :])


@dataclass
class SplitRecord:
    time: float
    victim: int
    thief: int
    queue_volume: int
    queue_len: int
    sent_volume: int
    sent_count: int


class _PE:
    __slots__ = ("queue", "head", "running", "striking", "output", "asking", "busy")

    def __init__(self, jobs: list[Job]):
        self.queue = jobs
        self.head = 0
        self.running = False
        self.striking = False
        self.output = 0
        self.asking = False
        self.busy = 0.0

    def pending(self) -> list[Job]:
        return self.queue[self.head :]


class _Stealing:
    def __init__(self, jobs_per_pe, cfg: MachineConfig, scfg: StealConfig):
        self.cfg = cfg
        self.scfg = scfg
        self.p = cfg.p
        self.rand = random.Random(derive_seed(cfg.seed, STREAM_STEAL))
        self.engine = EventEngine(cfg, phase="steal", max_events=scfg.max_events)
        self.retry = scfg.retry_delay if scfg.retry_delay is not None else max(cfg.L, 1.0)
        self.pes = [_PE(list(j)) for j in jobs_per_pe]
        self.remaining = sum(len(j) for j in jobs_per_pe)
        self.job_pe: dict[int, int] = {}
        self.hops: dict[int, int] = {}
        self.splits: list[SplitRecord] = []
        self.migrated = np.zeros(self.p, dtype=np.int64)
        self.threshold = math.inf
        self.end = 0.0

    # --- local actions ----------------------------------------------------------

    def execute(self, pe: int, job: Job) -> None:
        st = self.pes[pe - 1]
        st.running = True
        st.busy += job.exec_cost
        self.engine.schedule(self.engine.now + job.exec_cost, pe, "done", job)

    def try_work(self, pe: int) -> None:
        if self.remaining == 0:
            return
        st = self.pes[pe - 1]
        if st.running or st.striking:
            return
        if st.head < len(st.queue):
            job = st.queue[st.head]
            st.head += 1
            self.execute(pe, job)
        elif not st.asking and self.p > 1:
            victim = self.rand.randrange(1, self.p)
            if victim >= pe:
                victim += 1
            st.asking = True
            self.engine.send(pe, victim, self.scfg.request_words, "request", pe)

    # --- event handlers ---------------------------------------------------------

    def dispatch(self, eng: EventEngine, pe: int, kind: str, payload) -> None:
        getattr(self, "on_" + kind)(pe, payload)

    def on_start(self, pe, _):
        self.try_work(pe)

    def on_retry(self, pe, _):
        self.try_work(pe)

    def on_done(self, pe, job: Job):
        st = self.pes[pe - 1]
        st.running = False
        st.output += job.output_words
        self.job_pe[job.id] = pe
        self.remaining -= 1
        if self.remaining == 0:
            self.end = self.engine.now
            return
        if st.output > self.threshold:
            st.striking = True
        self.try_work(pe)

    def on_request(self, victim, thief):
        if self.remaining == 0:
            return
        st = self.pes[victim - 1]
        pending = st.pending()
        kept, sent = split_subarray(pending, round_up=st.striking and not st.running)
        if not sent:
            self.engine.send(victim, thief, self.scfg.request_words, "reject", None)
            return
        words = sum(j.description_words for j in sent)
        self.splits.append(
            SplitRecord(
                self.engine.now,
                victim,
                thief,
                sum(j.description_words for j in pending),
                len(pending),
                words,
                len(sent),
            )
        )
        st.queue, st.head = kept, 0
        for j in sent:
            self.hops[j.id] = self.hops.get(j.id, 0) + 1
        self.migrated[victim - 1] += words
        self.engine.send(victim, thief, words, "work", sent)

    def on_work(self, pe, jobs):
        st = self.pes[pe - 1]
        st.asking = False
        st.queue, st.head = jobs, 0
        self.try_work(pe)

    def on_reject(self, pe, _):
        self.pes[pe - 1].asking = False
        if self.remaining:
            self.engine.schedule(self.engine.now + self.retry, pe, "retry", None)

    def run(self) -> float:
        for pe in range(1, self.p + 1):
            self.engine.schedule(0.0, pe, "start", None)
        self.engine.run(self.dispatch)
        if self.remaining:
            raise EngineDiagnostic(
                f"work stealing stopped with {self.remaining} jobs left; "
                "every PE holding work is on strike"
            )
        return self.end


def _initial_order(jobs: Sequence[Job], scfg: StealConfig, rng: np.random.Generator) -> list[Job]:
    if scfg.order == "sort":
        return sort_jobs_desc_length(jobs)
    perm = rng.permutation(len(jobs))
    return [jobs[i] for i in perm]


def run_work_stealing(
    jobs_per_pe: Sequence[Sequence[Job]],
    cfg: MachineConfig,
    scfg: StealConfig = StealConfig(),
) -> ExecutionReport:
    """Process all jobs with randomized work stealing.

    `jobs_per_pe[i]` are the jobs initially stored on PE i+1. The report has
    a "steal" phase whose bottleneck work is the makespan (idle PEs wait for
    termination), an optional "sample" phase (estimated strikes) and a
    "termination" phase charging 2*ceil(log2 p) words per PE. `extra` holds
    the executing PE per job id, split records, hop counts and per-PE output.
    """
    p = cfg.p
    if len(jobs_per_pe) != p:
        raise ValueError(f"expected job lists for {p} PEs, got {len(jobs_per_pe)}")
    all_jobs = [j for js in jobs_per_pe for j in js]
    if all_jobs:
        volumes = np.array([sum(j.description_words for j in js) for js in jobs_per_pe])
        m = int(volumes.sum())
        m_hat = max(j.description_words for j in all_jobs)
        check_input_balance(volumes, m, m_hat, p, scfg.c_pre, what="job description")

    report = ExecutionReport(p)
    order_rng = rng_for(cfg.seed, STREAM_STEAL, 1)
    queues = [_initial_order(js, scfg, order_rng) for js in jobs_per_pe]

    threshold = math.inf
    pre_output = np.zeros(p, dtype=np.int64)
    pre_job_pe: dict[int, int] = {}
    m_prime = None
    if scfg.strike == "known":
        m_prime = scfg.m_prime if scfg.m_prime is not None else sum(j.output_words for j in all_jobs)
    elif scfg.strike == "estimated" and p > 1:
        # pre-pass: each PE runs a Bernoulli sample of its jobs; results are kept
        rng = rng_for(cfg.seed, STREAM_SAMPLE)
        busy = np.zeros(p)
        sampled_out = 0
        for i, q in enumerate(queues):
            take = rng.random(len(q)) < scfg.sample_fraction
            for job, t in zip(q, take):
                if t:
                    busy[i] += job.exec_cost
                    pre_output[i] += job.output_words
                    pre_job_pe[job.id] = i + 1
                    sampled_out += job.output_words
            queues[i] = [job for job, t in zip(q, take) if not t]
        lg = log2_ceil(p)
        report.ledger.charge_collective("sample", lg)
        report.add_superstep("sample", busy, report.ledger.phase("sample").h, cfg)
        if sampled_out > 0:
            m_prime = sampled_out / scfg.sample_fraction
    if m_prime is not None and m_prime > 0:
        threshold = scfg.b * m_prime / p

    sim = _Stealing(queues, cfg, scfg)
    sim.threshold = threshold
    sim.remaining = sum(len(q) for q in queues)
    for i in range(p):
        sim.pes[i].output = int(pre_output[i])
        if sim.pes[i].output > threshold:
            sim.pes[i].striking = True
    end = sim.run()

    busy = np.array([st.busy for st in sim.pes])
    ph = sim.engine.ledger.phases["steal"]
    report.phases.append(PhaseRecord("steal", busy, end, ph.h, end))
    report.ledger.merge(sim.engine.ledger)
    lg = log2_ceil(p)
    report.ledger.charge_collective("termination", 2 * lg)
    report.phases.append(PhaseRecord("termination", np.zeros(p), 0.0, report.ledger.phase("termination").h, 0.0))

    job_pe = dict(pre_job_pe)
    job_pe.update(sim.job_pe)
    output = pre_output.copy()
    for i, st in enumerate(sim.pes):
        output[i] = st.output
    initial_len = {j.id: len(js) for js in jobs_per_pe for j in js}
    report.extra.update(
        job_pe=job_pe,
        splits=sim.splits,
        hops=sim.hops,
        initial_len=initial_len,
        migrated=sim.migrated,
        job_output=output,
        strike_threshold=threshold,
        m_prime=m_prime,
        striking=[i + 1 for i, st in enumerate(sim.pes) if st.striking],
        events=sim.engine.processed,
    )
    return report
