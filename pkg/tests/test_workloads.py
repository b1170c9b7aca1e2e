import warnings

import numpy as np
import pytest

from mrsim.core import ReduceRule, WorkloadError, compute_parameters, expand_step, sequential_reference
from mrsim.machine import MachineConfig
from mrsim.pipeline import SCHEDULERS, RunConfig, run_pipeline, run_step
from mrsim.sched_bsp import PreconditionWarning
from mrsim.workloads import ChainRule, GeneratorSpec, chain, generate, random_step


def test_uniform_generator_contract():
    step = generate(GeneratorSpec("uniform", 100, seed=1))
    prm = compute_parameters(step)
    assert len(step.elements) == 100 and prm.w_hat == 1
    assert prm == compute_parameters(generate(GeneratorSpec("uniform", 100, seed=2)))


def test_zipf_theta_zero_is_uniform():
    keys, n = 10, 20_000
    tr = expand_step(generate(GeneratorSpec("zipf", n, key_count=keys, zipf_theta=0.0, seed=3)))
    counts = tr.group_pairs
    assert len(counts) == keys
    chi2 = float(((counts - n / keys) ** 2 / (n / keys)).sum())
    assert chi2 < 27.88  # df=9, alpha=0.001


def test_zipf_is_skewed():
    tr = expand_step(generate(GeneratorSpec("zipf", 20_000, key_count=1000, zipf_theta=1.2, seed=3)))
    assert tr.group_pairs.max() > 20 * np.median(tr.group_pairs)


def test_heavy_reducer_group_spans_pes():
    step = generate(GeneratorSpec("heavy_reducer", 20, heavy_volume=8, p=4))
    tr = expand_step(step)
    assert tr.group_pairs.max() == 8 and int((tr.group_pairs == 8).sum()) == 1
    sources = {step.initial_placement[e.id] for e in step.elements if e.emissions[0].key == 0}
    assert sources == {1, 2, 3, 4}


def test_single_heavy_takes_half_the_work():
    prm = compute_parameters(generate(GeneratorSpec("single_heavy", 100)))
    assert 2 * prm.w_hat == prm.w


def test_expander_is_regular():
    step = generate(GeneratorSpec("expander", 300, key_count=100, degree=3, seed=5))
    tr = expand_step(step)
    assert tr.group_pairs.tolist() == [9] * 100
    assert all(len(e.emissions) == 3 and e.map_cost == 3 for e in step.elements)


def test_all_same_key():
    tr = expand_step(generate(GeneratorSpec("all_same_key", 50)))
    assert tr.group_pairs.tolist() == [50]


@pytest.mark.parametrize("kind", ["uniform", "zipf", "single_heavy", "heavy_reducer", "expander", "all_same_key"])
def test_empty_generators(kind):
    assert generate(GeneratorSpec(kind, 0)).elements == ()


@pytest.mark.parametrize(
    "spec",
    [
        GeneratorSpec("nope", 5),
        GeneratorSpec("zipf", 5, key_count=0),
        GeneratorSpec("uniform", -1),
        GeneratorSpec("heavy_reducer", 5, heavy_volume=6),
        GeneratorSpec("expander", 5, key_count=3, degree=2),
        GeneratorSpec("zipf", 5, zipf_theta=-1),
    ],
)
def test_generator_validation(spec):
    with pytest.raises(WorkloadError):
        generate(spec)


def test_random_step_deterministic():
    assert random_step(11) == random_step(11)


def test_chain_of_one_equals_single_step():
    step = generate(GeneratorSpec("zipf", 500, key_count=50, seed=2))
    rc = RunConfig(MachineConfig(4, seed=3), "steal", "prefix")
    (trace, rep), = run_pipeline(chain([step]), rc)
    single = run_step(step, None, rc)
    assert rep.d_placement == single.d_placement
    assert rep.bottleneck_work == single.bottleneck_work
    assert rep.bottleneck_comm == single.bottleneck_comm


@pytest.mark.parametrize("scheduler", SCHEDULERS)
def test_chain_of_two_keeps_precondition(scheduler):
    first = generate(GeneratorSpec("uniform", 4000, seed=1))
    pipe = chain([first, first], ChainRule(key_fold=4))
    rc = RunConfig(MachineConfig(8, seed=1), scheduler, "prefix")
    with warnings.catch_warnings():
        warnings.simplefilter("error", PreconditionWarning)
        results = run_pipeline(pipe, rc)
    assert len(results) == 2
    assert results[1][1].extra["input_balanced"]


@pytest.mark.parametrize("scheduler", ["bsp", "steal"])
def test_chain_of_three_work_is_additive(scheduler):
    first = generate(GeneratorSpec("zipf", 2000, key_count=300, seed=4, reduce_rule=ReduceRule(1, 1, (2, 1))))
    later = generate(GeneratorSpec("uniform", 0, reduce_rule=ReduceRule(2, 0, (3,))))
    pipe = chain([first, later, later], ChainRule(map_alpha=1, map_beta=1, key_fold=3))
    rc = RunConfig(MachineConfig(8, seed=2), scheduler, "hash")
    results = run_pipeline(pipe, rc)
    assert len(results) == 3
    for trace, rep in results:
        assert rep.total_work == compute_parameters(trace).w
        assert sorted((k, s) for k, s, _ in rep.d_placement) == sequential_reference(trace.step)
    # each later step consumes exactly the previous outputs
    for (_, prev), (trace, _) in zip(results, results[1:]):
        assert trace.n == len(prev.d_placement)
