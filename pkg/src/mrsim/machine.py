"""The modeled distributed-memory machine.

Holds the BSP parameters, the per-phase communication ledger, execution
reports, the seeded key hash and a small discrete-event engine used by the
asynchronous schedulers. PE ids are 1-based in every public interface.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np


class ConfigError(ValueError):
    pass


class EngineDiagnostic(RuntimeError):
    """The event engine could not finish (budget exhausted or stuck)."""


@dataclass(frozen=True)
class MachineConfig:
    p: int
    L: float = 1.0
    g: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        if self.L < 0 or self.g < 0:
            raise ConfigError("L and g must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")


def log2_ceil(p: int) -> int:
    return (p - 1).bit_length()


def superstep_cost(w_x: float, h: float, cfg: MachineConfig) -> float:
    return w_x + cfg.L + h * cfg.g


# --- hashing and random streams ----------------------------------------------

_M64 = (1 << 64) - 1


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _raw_hash(keys: np.ndarray, seed: int) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64).astype(np.uint64)
    s = _mix64(np.array([seed & _M64], dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15))
    return _mix64(k * np.uint64(0x9E3779B97F4A7C15) + s)


def hash_keys(keys, seed: int, range_size: int) -> np.ndarray:
    """Vectorized `hash_key`; uint64 array for ranges up to 2**64, object array beyond."""
    if range_size < 1:
        raise ConfigError("range_size must be at least 1")
    keys = np.asarray(keys, dtype=np.int64)
    h = _raw_hash(keys, seed)
    if range_size <= 1 << 64:
        if range_size == 1 << 64:
            return h
        return h % np.uint64(range_size)
    # wider ranges combine two independent 64-bit hashes
    lo = _raw_hash(keys, seed ^ 0x5851F42D4C957F2D)
    return np.array([((int(a) << 64) | int(b)) % range_size for a, b in zip(h, lo)], dtype=object)


def hash_key(key: int, seed: int, range_size: int) -> int:
    return int(hash_keys(np.array([key]), seed, range_size)[0])


def derive_seed(seed: int, *stream: int) -> int:
    """Independent 64-bit seed for a named random stream."""
    ss = np.random.SeedSequence([seed & _M64, *stream])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _M64, *stream]))


# stream ids
STREAM_PLACEMENT = 1
STREAM_HASH = 2
STREAM_DISPERSE = 3
STREAM_STEAL = 4
STREAM_SAMPLE = 5
STREAM_SHUFFLE = 6


# --- communication ledger ----------------------------------------------------


@dataclass
class PhaseComm:
    sent: np.ndarray
    received: np.ndarray
    messages: np.ndarray

    @property
    def volume(self) -> np.ndarray:
        return np.maximum(self.sent, self.received)

    @property
    def h(self) -> int:
        return int(self.volume.max(initial=0))


class CommLedger:
    """Per-phase, per-PE sent/received word and message counters."""

    def __init__(self, p: int):
        self.p = p
        self.phases: dict[str, PhaseComm] = {}

    def phase(self, name: str) -> PhaseComm:
        if name not in self.phases:
            z = lambda: np.zeros(self.p, dtype=np.int64)  # noqa: E731
            self.phases[name] = PhaseComm(z(), z(), z())
        return self.phases[name]

    def record(self, phase: str, src: int, dst: int, words: int) -> None:
        """Single message between 1-based PEs; self-messages are free."""
        if not (1 <= src <= self.p and 1 <= dst <= self.p):
            raise ConfigError(f"PE id out of range 1..{self.p}: {src}->{dst}")
        ph = self.phase(phase)
        if src == dst:
            return
        ph.sent[src - 1] += words
        ph.received[dst - 1] += words
        ph.messages[src - 1] += 1

    def record_many(self, phase: str, src: np.ndarray, dst: np.ndarray, words: np.ndarray) -> int:
        """Vectorized exchange of messages; returns the phase-local h of this batch."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        words = np.broadcast_to(np.asarray(words, dtype=np.int64), src.shape)
        if len(src) and (src.min() < 1 or dst.min() < 1 or src.max() > self.p or dst.max() > self.p):
            raise ConfigError(f"PE id out of range 1..{self.p}")
        ph = self.phase(phase)
        off = src != dst
        s, d, wd = src[off] - 1, dst[off] - 1, words[off]
        sent = np.bincount(s, weights=wd, minlength=self.p).astype(np.int64)
        recv = np.bincount(d, weights=wd, minlength=self.p).astype(np.int64)
        ph.sent += sent
        ph.received += recv
        ph.messages += np.bincount(s, minlength=self.p)
        return int(np.maximum(sent, recv).max(initial=0))

    def charge_collective(self, phase: str, words_per_pe: int) -> None:
        """Model a tree collective: every PE sends and receives `words_per_pe`."""
        ph = self.phase(phase)
        if self.p > 1:
            ph.sent += words_per_pe
            ph.received += words_per_pe

    def per_pe_volume(self) -> np.ndarray:
        total = np.zeros(self.p, dtype=np.int64)
        for ph in self.phases.values():
            total += ph.volume
        return total

    def bottleneck(self) -> int:
        return int(self.per_pe_volume().max(initial=0))

    def total_sent(self, phase: Optional[str] = None) -> int:
        phases = [self.phases[phase]] if phase else self.phases.values()
        return int(sum(int(ph.sent.sum()) for ph in phases))

    def merge(self, other: "CommLedger", prefix: str = "") -> None:
        for name, ph in other.phases.items():
            mine = self.phase(prefix + name)
            mine.sent += ph.sent
            mine.received += ph.received
            mine.messages += ph.messages


def exchange(messages: Iterable[tuple[int, int, int]], ledger: CommLedger, phase: str = "exchange") -> int:
    """Account a batch of (src, dst, words) messages; returns h of the batch."""
    msgs = list(messages)
    if not msgs:
        ledger.phase(phase)
        return 0
    src, dst, words = (np.array(c, dtype=np.int64) for c in zip(*msgs))
    return ledger.record_many(phase, src, dst, words)


# --- reports -----------------------------------------------------------------


@dataclass
class PhaseRecord:
    """One synchronized phase. `busy` is per-PE work; `w_x` the phase's
    bottleneck work including waiting; `time` the modeled wall time."""

    name: str
    busy: np.ndarray
    w_x: float
    h: int
    time: float


@dataclass
class ExecutionReport:
    p: int
    phases: list[PhaseRecord] = field(default_factory=list)
    ledger: CommLedger = None
    output_words: np.ndarray = None
    d_placement: list[tuple[int, int, int]] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.ledger is None:
            self.ledger = CommLedger(self.p)
        if self.output_words is None:
            self.output_words = np.zeros(self.p, dtype=np.int64)

    @property
    def busy_work(self) -> np.ndarray:
        total = np.zeros(self.p, dtype=float)
        for ph in self.phases:
            total += ph.busy
        return total

    @property
    def total_work(self) -> float:
        return float(self.busy_work.sum())

    @property
    def bottleneck_work(self) -> float:
        return float(sum(ph.w_x for ph in self.phases))

    @property
    def bottleneck_comm(self) -> int:
        return self.ledger.bottleneck()

    @property
    def max_output_words(self) -> int:
        return int(self.output_words.max(initial=0))

    @property
    def model_time(self) -> float:
        return float(sum(ph.time for ph in self.phases))

    def add_superstep(self, name: str, busy, h: int, cfg: MachineConfig) -> PhaseRecord:
        busy = np.asarray(busy, dtype=float)
        w_x = float(busy.max(initial=0.0))
        rec = PhaseRecord(name, busy, w_x, h, superstep_cost(w_x, h, cfg))
        self.phases.append(rec)
        return rec

    def absorb(self, other: "ExecutionReport", prefix: str = "") -> None:
        """Append another stage's phases and ledger (outputs are not merged)."""
        for ph in other.phases:
            self.phases.append(PhaseRecord(prefix + ph.name, ph.busy, ph.w_x, ph.h, ph.time))
        self.ledger.merge(other.ledger, prefix)


# --- asynchronous event engine -------------------------------------------------


@dataclass(frozen=True)
class AsyncEngineConfig:
    request_words: int = 1
    max_events: int = 50_000_000

    def __post_init__(self):
        if self.request_words < 0:
            raise ConfigError("request_words must be nonnegative")


class EventEngine:
    """Single-threaded discrete-event engine.

    Events fire in (time, event id) order; ids are assigned monotonically at
    scheduling time, so simultaneous events keep their scheduling order.
    """

    def __init__(self, cfg: MachineConfig, phase: str = "async", max_events: int = 50_000_000):
        self.cfg = cfg
        self.phase = phase
        self.ledger = CommLedger(cfg.p)
        self.ledger.phase(phase)
        self.now = 0.0
        self.max_events = max_events
        self.processed = 0
        self._queue: list = []
        self._next_id = 0

    def schedule(self, time: float, pe: int, kind: str, payload: Any = None) -> None:
        heapq.heappush(self._queue, (time, self._next_id, pe, kind, payload))
        self._next_id += 1

    def send(self, src: int, dst: int, words: int, kind: str, payload: Any = None) -> float:
        """Charge the ledger and deliver after L + g*words; returns arrival time."""
        self.ledger.record(self.phase, src, dst, words)
        arrival = self.now + self.cfg.L + self.cfg.g * words
        self.schedule(arrival, dst, kind, payload)
        return arrival

    def run(self, dispatch: Callable[["EventEngine", int, str, Any], None]) -> float:
        q = self._queue
        while q:
            if self.processed >= self.max_events:
                raise EngineDiagnostic(
                    f"event budget of {self.max_events} exhausted at time {self.now}; "
                    "the configuration may livelock"
                )
            time, _, pe, kind, payload = heapq.heappop(q)
            self.now = time
            self.processed += 1
            dispatch(self, pe, kind, payload)
        return self.now


def run_async(
    events: Sequence[tuple[float, int, str, Any]],
    handlers: Mapping[str, Callable],
    cfg: MachineConfig,
    max_events: int = 50_000_000,
) -> ExecutionReport:
    """Run handlers over an initial event list.

    A handler is called as handler(engine, pe, payload) and may schedule or
    send further events. It reports busy time by returning the number of work
    units it started on `pe` (or None). Every PE is counted as working until
    the last event, which is how waiting enters the per-PE work.
    """
    engine = EventEngine(cfg, max_events=max_events)
    busy = np.zeros(cfg.p, dtype=float)
    for time, pe, kind, payload in events:
        engine.schedule(time, pe, kind, payload)

    def dispatch(eng, pe, kind, payload):
        try:
            handler = handlers[kind]
        except KeyError:
            raise EngineDiagnostic(f"no handler for event kind {kind!r}") from None
        spent = handler(eng, pe, payload)
        if spent:
            busy[pe - 1] += spent

    end = engine.run(dispatch)
    report = ExecutionReport(cfg.p, ledger=engine.ledger)
    report.phases.append(PhaseRecord(engine.phase, busy, end, engine.ledger.phases[engine.phase].h, end))
    report.extra["events"] = engine.processed
    return report
