import pytest
from hypothesis import given

from conftest import steps
from mrsim.core import (
    EmittedPair,
    InputElement,
    ReduceRule,
    StepParameters,
    WorkloadError,
    WorkloadStep,
    compute_parameters,
    dump_workload,
    expand_step,
    load_workload,
    parse_workload,
    save_workload,
    sequential_reference,
)


def _unit_step(n):
    return WorkloadStep(tuple(InputElement(i, 1, 1, (EmittedPair(i, 1, 1),)) for i in range(n)))


def test_empty_step_has_empty_sets():
    tr = expand_step(WorkloadStep(()))
    assert tr.n == 0
    assert len(tr.pair_key) == 0 and len(tr.group_key) == 0 and len(tr.output_size) == 0


def test_shared_key_forms_one_group():
    step = WorkloadStep(
        (
            InputElement(0, 1, 1, (EmittedPair(7, 1, 1),)),
            InputElement(1, 1, 1, (EmittedPair(7, 1, 2),)),
        )
    )
    # key once plus both values: 1 + 1 + 2
    assert expand_step(step).groups() == [(7, 4)]


def test_distinct_keys_give_singleton_groups():
    tr = expand_step(_unit_step(3))
    assert len(tr.group_key) == 3
    assert tr.group_pairs.tolist() == [1, 1, 1]


def test_parameters_of_empty_step():
    assert compute_parameters(WorkloadStep(())) == StepParameters(0, 0, 0, 0)


def test_parameters_single_element_hand_count():
    step = WorkloadStep(
        (InputElement(0, 2, 3, (EmittedPair(5, 1, 1),)),),
        ReduceRule(alpha=4, beta=0, out_sizes=(1,)),
    )
    assert compute_parameters(step) == StepParameters(w=7, w_hat=4, m=7, m_hat=2)


@pytest.mark.parametrize("n", [1, 10, 257])
def test_parameters_unit_closed_form(n):
    assert compute_parameters(_unit_step(n)) == StepParameters(2 * n, 1, 6 * n, 2)


def test_non_duplicated_variant_drops_groups():
    step = _unit_step(5)
    assert compute_parameters(step, count_c=False).m == 6 * 5 - 2 * 5


def test_sequential_reference_examples():
    assert sequential_reference(WorkloadStep(())) == []
    step = WorkloadStep(
        (InputElement(0, 2, 3, (EmittedPair(5, 1, 1),)),),
        ReduceRule(alpha=4, beta=0, out_sizes=(1,)),
    )
    assert sequential_reference(step) == [(5, 1)]


def test_per_pair_rule_emits_per_pair():
    step = WorkloadStep(
        tuple(InputElement(i, 1, 1, (EmittedPair(0, 1, 1),)) for i in range(4)),
        ReduceRule(0, 0, (2,), "per_pair"),
    )
    assert sequential_reference(step) == [(0, 2)] * 4


@given(steps())
def test_trace_matches_reference(step):
    assert expand_step(step).outputs() == sequential_reference(step)


@given(steps())
def test_trace_word_counts_consistent(step):
    tr = expand_step(step)
    assert tr.words_b == int(tr.elem_out.sum())
    # group keys are stored once, so C can only shrink relative to B
    assert tr.words_c <= tr.words_b
    prm = compute_parameters(tr)
    assert prm.m == tr.words_a + tr.words_b + tr.words_c + tr.words_d
    assert prm.w == int(tr.elem_cost.sum() + tr.group_cost.sum())


@given(steps())
def test_json_round_trip(step):
    assert parse_workload(dump_workload([step])) == [step]


def test_file_round_trip(tmp_path):
    step = WorkloadStep(_unit_step(3).elements, ReduceRule(2, 1, (1, 3)), {0: 1, 1: 2, 2: 1})
    path = tmp_path / "w.json"
    save_workload(path, [step, step])
    assert load_workload(path) == [step, step]


@pytest.mark.parametrize(
    "build",
    [
        lambda: WorkloadStep((InputElement(0, 1, 1), InputElement(0, 1, 1))),
        lambda: WorkloadStep((InputElement(0, 0, 1),)),
        lambda: WorkloadStep((InputElement(0, 1, -1),)),
        lambda: WorkloadStep(
            (InputElement(0, 1, 1, (EmittedPair(1, 1, 1),)), InputElement(1, 1, 1, (EmittedPair(1, 2, 1),)))
        ),
        lambda: WorkloadStep((InputElement(0, 1, 1),), initial_placement={}),
        lambda: ReduceRule(-1),
        lambda: ReduceRule(mode="bogus"),
        lambda: ReduceRule(out_sizes=(1, 2), mode="per_pair"),
    ],
)
def test_invalid_steps_rejected(build):
    with pytest.raises(WorkloadError):
        build()


def test_parse_rejects_bad_documents():
    with pytest.raises(WorkloadError):
        parse_workload({"version": 99, "steps": []})
    with pytest.raises(WorkloadError):
        parse_workload({"version": 1, "steps": [{"elements": [{"id": 0}]}]})


def test_placement_outside_machine_rejected():
    step = WorkloadStep((InputElement(0, 1, 1),), initial_placement={0: 5})
    step.check_placement(5)
    with pytest.raises(WorkloadError):
        step.check_placement(4)
