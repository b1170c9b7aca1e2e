"""Domain types for one MapReduce step and its cost parameters.

A step is declarative: every input element carries its map cost and the
key-value pairs it emits, and a `ReduceRule` states what a reduction costs
and how many output words it produces. `expand_step` turns that description
into the full pair multiset, the key groups and the reduce outputs, stored
columnwise so the schedulers can work on large steps with numpy.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np


class WorkloadError(ValueError):
    """A step or generator description is inconsistent."""


@dataclass(frozen=True)
class EmittedPair:
    key: int
    key_size: int = 1
    value_size: int = 1

    @property
    def words(self) -> int:
        return self.key_size + self.value_size


@dataclass(frozen=True)
class InputElement:
    id: int
    size_words: int
    map_cost: int
    emissions: tuple[EmittedPair, ...] = ()

    @property
    def output_words(self) -> int:
        return sum(e.words for e in self.emissions)


@dataclass(frozen=True)
class ReduceRule:
    """Cost and output of the reduction applied to every key group.

    cost = alpha + beta * (input words of the group). Outputs are either the
    fixed list `out_sizes` per group (mode "fixed") or one element of size
    `out_sizes[0]` per pair in the group (mode "per_pair").
    """

    alpha: int = 1
    beta: int = 0
    out_sizes: tuple[int, ...] = (1,)
    mode: str = "fixed"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise WorkloadError("reduce costs must be nonnegative")
        if any(s < 0 for s in self.out_sizes):
            raise WorkloadError("output sizes must be nonnegative")
        if self.mode not in ("fixed", "per_pair"):
            raise WorkloadError(f"unknown reduce output mode {self.mode!r}")
        if self.mode == "per_pair" and len(self.out_sizes) != 1:
            raise WorkloadError("per_pair mode takes exactly one output size")

    def cost(self, input_words: int) -> int:
        return self.alpha + self.beta * input_words

    def output_sizes(self, key: int, input_words: int, pair_count: int) -> tuple[int, ...]:
        if self.mode == "per_pair":
            return self.out_sizes * pair_count
        return self.out_sizes


@dataclass(frozen=True)
class WorkloadStep:
    elements: tuple[InputElement, ...]
    reduce_rule: ReduceRule = ReduceRule()
    initial_placement: Optional[Mapping[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        ids = [e.id for e in self.elements]
        if len(set(ids)) != len(ids):
            raise WorkloadError("element ids must be unique")
        key_sizes: dict[int, int] = {}
        for e in self.elements:
            if e.size_words < 1:
                raise WorkloadError(f"element {e.id} has size < 1")
            if e.map_cost < 0:
                raise WorkloadError(f"element {e.id} has negative map cost")
            for pair in e.emissions:
                if pair.key_size < 1 or pair.value_size < 0:
                    raise WorkloadError(f"element {e.id} emits a pair with invalid sizes")
                if key_sizes.setdefault(pair.key, pair.key_size) != pair.key_size:
                    raise WorkloadError(f"key {pair.key} is emitted with differing key sizes")
        if self.initial_placement is not None:
            missing = set(ids) - set(self.initial_placement)
            if missing:
                raise WorkloadError(f"placement misses {len(missing)} elements")

    def check_placement(self, p: int) -> None:
        if self.initial_placement is None:
            return
        bad = [pe for pe in self.initial_placement.values() if not 1 <= pe <= p]
        if bad:
            raise WorkloadError(f"placement uses PE ids outside 1..{p}: {sorted(set(bad))[:5]}")


@dataclass(frozen=True)
class StepParameters:
    w: int
    w_hat: int
    m: int
    m_hat: int


@dataclass
class StepTrace:
    """Columnar expansion of a step into the sets B (pairs), C (groups), D (outputs).

    Pair arrays are aligned with each other, group arrays are aligned with
    `group_key` (sorted ascending), and `output_group` maps every output
    element of D to the group that produced it. Within a group, outputs keep
    the order returned by the reduce rule.
    """

    step: WorkloadStep
    elem_size: np.ndarray
    elem_cost: np.ndarray
    elem_out: np.ndarray
    pair_elem: np.ndarray
    pair_key: np.ndarray
    pair_ksize: np.ndarray
    pair_vsize: np.ndarray
    pair_group: np.ndarray
    group_key: np.ndarray
    group_ksize: np.ndarray
    group_value_words: np.ndarray
    group_pairs: np.ndarray
    group_cost: np.ndarray
    group_out_words: np.ndarray
    output_group: np.ndarray
    output_size: np.ndarray

    @property
    def n(self) -> int:
        return len(self.elem_size)

    @property
    def pair_words(self) -> np.ndarray:
        return self.pair_ksize + self.pair_vsize

    @property
    def group_volume(self) -> np.ndarray:
        return self.group_ksize + self.group_value_words

    @property
    def words_a(self) -> int:
        return int(self.elem_size.sum())

    @property
    def words_b(self) -> int:
        return int(self.pair_words.sum())

    @property
    def words_c(self) -> int:
        return int(self.group_volume.sum())

    @property
    def words_d(self) -> int:
        return int(self.output_size.sum())

    def outputs(self) -> list[tuple[int, int]]:
        """D as (origin key, size) tuples, canonically sorted."""
        keys = self.group_key[self.output_group]
        return sorted(zip(keys.tolist(), self.output_size.tolist()))

    def groups(self) -> list[tuple[int, int]]:
        """C as (key, group volume) tuples sorted by key."""
        return list(zip(self.group_key.tolist(), self.group_volume.tolist()))


def _i64(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


def expand_step(step: WorkloadStep) -> StepTrace:
    elems = step.elements
    elem_size = _i64([e.size_words for e in elems])
    elem_cost = _i64([e.map_cost for e in elems])
    elem_out = _i64([e.output_words for e in elems])

    pair_elem, pair_key, pair_ksize, pair_vsize = [], [], [], []
    for i, e in enumerate(elems):
        for pair in e.emissions:
            pair_elem.append(i)
            pair_key.append(pair.key)
            pair_ksize.append(pair.key_size)
            pair_vsize.append(pair.value_size)
    pair_elem, pair_key = _i64(pair_elem), _i64(pair_key)
    pair_ksize, pair_vsize = _i64(pair_ksize), _i64(pair_vsize)

    group_key, first, pair_group = np.unique(pair_key, return_index=True, return_inverse=True)
    pair_group = pair_group.reshape(-1).astype(np.int64)
    n_groups = len(group_key)
    group_ksize = pair_ksize[first] if n_groups else _i64([])
    group_value_words = np.bincount(pair_group, weights=pair_vsize, minlength=n_groups).astype(np.int64)
    group_pairs = np.bincount(pair_group, minlength=n_groups).astype(np.int64)
    group_volume = group_ksize + group_value_words

    rule = step.reduce_rule
    group_cost = rule.alpha + rule.beta * group_volume
    output_group, output_size, out_words = [], [], []
    for g, (key, vol, cnt) in enumerate(zip(group_key.tolist(), group_volume.tolist(), group_pairs.tolist())):
        sizes = rule.output_sizes(key, vol, cnt)
        output_group.extend([g] * len(sizes))
        output_size.extend(sizes)
        out_words.append(sum(sizes))

    return StepTrace(
        step=step,
        elem_size=elem_size,
        elem_cost=elem_cost,
        elem_out=elem_out,
        pair_elem=pair_elem,
        pair_key=pair_key,
        pair_ksize=pair_ksize,
        pair_vsize=pair_vsize,
        pair_group=pair_group,
        group_key=_i64(group_key),
        group_ksize=_i64(group_ksize),
        group_value_words=group_value_words,
        group_pairs=group_pairs,
        group_cost=_i64(group_cost),
        group_out_words=_i64(out_words),
        output_group=_i64(output_group),
        output_size=_i64(output_size),
    )


def compute_parameters(trace: StepTrace | WorkloadStep, count_c: bool = True) -> StepParameters:
    """(w, w_hat, m, m_hat) of a step.

    With `count_c=False` the key groups are not counted a second time in m,
    which gives the non-duplicated variant used for sensitivity checks.
    """
    if isinstance(trace, WorkloadStep):
        trace = expand_step(trace)
    map_cost, red_cost = trace.elem_cost, trace.group_cost
    w = int(map_cost.sum() + red_cost.sum())
    w_hat = max(int(map_cost.max(initial=0)), int(red_cost.max(initial=0)))
    m = trace.words_a + trace.words_b + trace.words_d
    if count_c:
        m += trace.words_c
    map_io = np.maximum(trace.elem_size, trace.elem_out)
    red_io = np.maximum(trace.group_volume, trace.group_out_words)
    m_hat = max(int(map_io.max(initial=0)), int(red_io.max(initial=0)))
    return StepParameters(w=w, w_hat=w_hat, m=m, m_hat=m_hat)


def sequential_reference(step: WorkloadStep) -> list[tuple[int, int]]:
    """Single-PE in-order evaluation; returns D as sorted (key, size) tuples."""
    groups: dict[int, list[int]] = {}
    key_size: dict[int, int] = {}
    for e in step.elements:
        for pair in e.emissions:
            groups.setdefault(pair.key, []).append(pair.value_size)
            key_size[pair.key] = pair.key_size
    out = []
    for key in sorted(groups):
        values = groups[key]
        words = key_size[key] + sum(values)
        for size in step.reduce_rule.output_sizes(key, words, len(values)):
            out.append((key, size))
    return sorted(out)


def output_multiset(outputs: Sequence[tuple[int, int]]) -> Counter:
    return Counter(outputs)


# --- workload JSON -----------------------------------------------------------

FORMAT_VERSION = 1


def step_to_dict(step: WorkloadStep) -> dict:
    rule = step.reduce_rule
    reduce = {"alpha": rule.alpha, "beta": rule.beta, "out_sizes": list(rule.out_sizes)}
    if rule.mode != "fixed":
        reduce["mode"] = rule.mode
    d = {
        "elements": [
            {
                "id": e.id,
                "size": e.size_words,
                "map_cost": e.map_cost,
                "emits": [{"key": q.key, "ksize": q.key_size, "vsize": q.value_size} for q in e.emissions],
            }
            for e in step.elements
        ],
        "reduce": reduce,
    }
    if step.initial_placement is not None:
        d["placement"] = {str(k): v for k, v in step.initial_placement.items()}
    return d


def step_from_dict(d: dict) -> WorkloadStep:
    try:
        elements = tuple(
            InputElement(
                id=int(e["id"]),
                size_words=int(e["size"]),
                map_cost=int(e["map_cost"]),
                emissions=tuple(
                    EmittedPair(int(q["key"]), int(q.get("ksize", 1)), int(q.get("vsize", 1)))
                    for q in e.get("emits", [])
                ),
            )
            for e in d["elements"]
        )
        r = d.get("reduce", {})
        rule = ReduceRule(
            alpha=int(r.get("alpha", 1)),
            beta=int(r.get("beta", 0)),
            out_sizes=tuple(int(s) for s in r.get("out_sizes", [1])),
            mode=r.get("mode", "fixed"),
        )
    except (KeyError, TypeError) as exc:
        raise WorkloadError(f"malformed workload entry: {exc!r}") from exc
    placement = d.get("placement")
    if placement:
        placement = {int(k): int(v) for k, v in placement.items()}
    else:
        placement = None
    return WorkloadStep(elements=elements, reduce_rule=rule, initial_placement=placement)


def dump_workload(steps: Sequence[WorkloadStep]) -> dict:
    return {"version": FORMAT_VERSION, "steps": [step_to_dict(s) for s in steps]}


def parse_workload(doc: dict) -> list[WorkloadStep]:
    if doc.get("version") != FORMAT_VERSION:
        raise WorkloadError(f"unsupported workload version {doc.get('version')!r}")
    return [step_from_dict(s) for s in doc.get("steps", [])]


def save_workload(path, steps: Sequence[WorkloadStep]) -> None:
    import json

    with open(path, "w") as fh:
        json.dump(dump_workload(steps), fh, separators=(",", ":"))


def load_workload(path) -> list[WorkloadStep]:
    import json

    with open(path) as fh:
        return parse_workload(json.load(fh))
