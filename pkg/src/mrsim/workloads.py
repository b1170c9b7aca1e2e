"""Synthetic workload generators and multi-step chaining."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import (
    EmittedPair,
    InputElement,
    ReduceRule,
    WorkloadError,
    WorkloadStep,
    compute_parameters,
)
from .machine import rng_for

KINDS = ("uniform", "zipf", "single_heavy", "heavy_reducer", "expander", "all_same_key")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of a synthetic step.

    `key_count` defaults to n. `heavy_volume` is the number of elements that
    feed the heavy key (heavy_reducer, default n). `p` is only used by
    heavy_reducer to place its sources round-robin.
    """

    kind: str
    n: int
    key_count: Optional[int] = None
    zipf_theta: float = 1.0
    heavy_volume: Optional[int] = None
    degree: int = 3
    p: int = 1
    seed: int = 0
    reduce_rule: ReduceRule = ReduceRule()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise WorkloadError(f"unknown generator kind {self.kind!r}")
        if self.n < 0:
            raise WorkloadError("n must be nonnegative")
        if self.key_count is not None and self.key_count < 1 and self.n > 0:
            raise WorkloadError("key_count must be positive when n > 0")
        if self.zipf_theta < 0:
            raise WorkloadError("zipf_theta must be nonnegative")
        if self.degree < 1:
            raise WorkloadError("degree must be positive")
        if self.p < 1:
            raise WorkloadError("p must be positive")
        if self.heavy_volume is not None and not 0 <= self.heavy_volume <= self.n:
            raise WorkloadError("heavy_volume must lie in 0..n")
        if self.kind == "expander" and self.n > 0:
            keys = self.key_count or self.n
            if (self.degree * self.n) % keys:
                raise WorkloadError("expander needs degree*n divisible by key_count")


def _unit(i: int, key: int) -> InputElement:
    return InputElement(id=i, size_words=1, map_cost=1, emissions=(EmittedPair(key, 1, 1),))


def generate(spec: GeneratorSpec) -> WorkloadStep:
    spec.validate()
    n, rule = spec.n, spec.reduce_rule
    rng = rng_for(spec.seed, 100 + KINDS.index(spec.kind))
    placement = None

    if spec.kind == "uniform":
        elements = [_unit(i, i) for i in range(n)]
    elif spec.kind == "all_same_key":
        elements = [_unit(i, 0) for i in range(n)]
    elif spec.kind == "zipf" and n == 0:
        elements = []
    elif spec.kind == "zipf":
        keys = spec.key_count or n
        ranks = np.arange(1, keys + 1, dtype=float)
        cdf = np.cumsum(ranks ** -spec.zipf_theta)
        cdf /= cdf[-1]
        drawn = np.searchsorted(cdf, rng.random(n), side="right")
        drawn = np.minimum(drawn, keys - 1)
        elements = [_unit(i, int(k)) for i, k in enumerate(drawn)]
    elif spec.kind == "single_heavy":
        if n == 0:
            elements = []
        else:
            elements = [_unit(i, i) for i in range(n)]
            elements[0] = replace(elements[0], map_cost=0)
            rest = compute_parameters(WorkloadStep(tuple(elements), rule)).w
            elements[0] = replace(elements[0], map_cost=rest)
    elif spec.kind == "heavy_reducer":
        heavy = n if spec.heavy_volume is None else spec.heavy_volume
        elements = [_unit(i, 0 if i < heavy else i) for i in range(n)]
        placement = {i: 1 + i % spec.p for i in range(n)}
    else:  # expander
        keys = spec.key_count or n
        stubs = np.repeat(np.arange(keys), spec.degree * n // keys) if n else np.array([], dtype=int)
        rng.shuffle(stubs)
        stubs = stubs.reshape(n, spec.degree)
        elements = [
            InputElement(
                id=i,
                size_words=1,
                map_cost=spec.degree,
                emissions=tuple(EmittedPair(int(k), 1, 1) for k in row),
            )
            for i, row in enumerate(stubs)
        ]
    return WorkloadStep(tuple(elements), rule, placement)


# --- chaining -----------------------------------------------------------------


@dataclass(frozen=True)
class ChainRule:
    """How output element j of step i (key k, size s) becomes an input of step i+1.

    The new element has size s, map cost `map_alpha + map_beta * s` and emits
    one pair keyed `k // key_fold` whose value fills the remaining s - 1 words.
    """

    map_alpha: int = 1
    map_beta: int = 0
    key_fold: int = 1

    def __post_init__(self):
        if self.key_fold < 1:
            raise WorkloadError("key_fold must be positive")

    def derive(self, outputs: Sequence[tuple[int, int, int]], reduce_rule: ReduceRule) -> WorkloadStep:
        """Build the next step from (key, size, pe) output records, keeping their placement."""
        elements, placement = [], {}
        for j, (key, size, pe) in enumerate(outputs):
            size = max(int(size), 1)
            elements.append(
                InputElement(
                    id=j,
                    size_words=size,
                    map_cost=self.map_alpha + self.map_beta * size,
                    emissions=(EmittedPair(int(key) // self.key_fold, 1, size - 1),),
                )
            )
            placement[j] = int(pe)
        return WorkloadStep(tuple(elements), reduce_rule, placement)


@dataclass(frozen=True)
class Pipeline:
    first: WorkloadStep
    reduce_rules: tuple[ReduceRule, ...] = ()
    rule: ChainRule = field(default_factory=ChainRule)

    def __len__(self) -> int:
        return 1 + len(self.reduce_rules)


def chain(steps: Sequence[WorkloadStep], rule: ChainRule = ChainRule()) -> Pipeline:
    """Chain steps: step 0 is used as given, later steps contribute their reduce rule
    and take their inputs from the previous step's outputs at execution time."""
    if not steps:
        raise WorkloadError("chain needs at least one step")
    return Pipeline(steps[0], tuple(s.reduce_rule for s in steps[1:]), rule)


def random_step(seed: int, n_max: int = 200, key_range: int | None = None) -> WorkloadStep:
    """Irregular step for oracle testing: random sizes, costs, 0-3 emissions per
    element, shared keys, and a random reduce rule (sometimes multi-output)."""
    rng = rng_for(seed, 200)
    n = int(rng.integers(0, n_max + 1))
    keys = key_range or max(1, int(rng.integers(1, max(2, n))))
    key_size = rng.integers(1, 3, size=keys)
    elements = []
    for i in range(n):
        k = int(rng.integers(0, 4))
        emits = []
        for key in rng.integers(0, keys, size=k):
            emits.append(EmittedPair(int(key), int(key_size[key]), int(rng.integers(0, 5))))
        elements.append(
            InputElement(
                id=i,
                size_words=int(rng.integers(1, 6)),
                map_cost=int(rng.integers(0, 10)),
                emissions=tuple(emits),
            )
        )
    if rng.random() < 0.3:
        rule = ReduceRule(int(rng.integers(0, 4)), int(rng.integers(0, 2)), (int(rng.integers(1, 3)),), "per_pair")
    else:
        outs = tuple(int(s) for s in rng.integers(0, 4, size=int(rng.integers(0, 4))))
        rule = ReduceRule(int(rng.integers(0, 4)), int(rng.integers(0, 2)), outs)
    return WorkloadStep(tuple(elements), rule)
