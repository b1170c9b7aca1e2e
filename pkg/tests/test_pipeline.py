import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import steps
from mrsim.core import ReduceRule, compute_parameters, expand_step, sequential_reference
from mrsim.machine import MachineConfig
from mrsim.pipeline import REMAPS, SCHEDULERS, SHUFFLES, RunConfig, make_row, run_step
from mrsim.workloads import GeneratorSpec, generate


@given(
    steps(),
    st.sampled_from(SCHEDULERS),
    st.sampled_from(SHUFFLES),
    st.sampled_from(REMAPS),
    st.sampled_from([1, 2, 3, 8]),
    st.booleans(),
)
def test_every_combination_matches_reference(step, sched, shuffle, remap, p, force):
    rc = RunConfig(MachineConfig(p, seed=3), sched, shuffle, remap, force_remap=force)
    rep = run_step(step, None, rc)
    assert sorted((k, s) for k, s, _ in rep.d_placement) == sequential_reference(step)
    assert int(rep.output_words.sum()) == expand_step(step).words_d


def test_remap_triggers_only_on_skew():
    step = generate(GeneratorSpec("heavy_reducer", 3000, heavy_volume=1500, p=1))
    tr = expand_step(step)
    # all input on PE 1, so the map output is maximally skewed
    rep = run_step(tr, np.ones(tr.n, dtype=np.int64), RunConfig(MachineConfig(8), "bsp", "hash", "redundant"))
    assert rep.extra.get("map_remapped")
    assert rep.extra["map_remap_ok"] == (True, True)
    p = 8
    m_prime = int(tr.elem_out.sum())
    assert np.all(p * rep.extra["map_output"] <= 2 * m_prime + p * int(tr.elem_out.max()))

    spread = np.random.default_rng(0).integers(1, 9, tr.n)
    calm = run_step(tr, spread, RunConfig(MachineConfig(8), "bsp", "hash", "redundant"))
    assert not calm.extra.get("map_remapped")


def test_reduce_phase_remap():
    step = generate(GeneratorSpec("zipf", 3000, key_count=40, zipf_theta=1.5, seed=1, reduce_rule=ReduceRule(1, 0, (1,), "per_pair")))
    rc = RunConfig(MachineConfig(16), "bsp", "prefix", "redundant", force_remap=True)
    rep = run_step(step, None, rc)
    assert rep.extra["reduce_remapped"] and rep.extra["reduce_remap_ok"] == (True, True)
    names = [ph.name for ph in rep.phases]
    assert "reduce-remap-exec" in names and "map-remap-exec" in names


def test_steal_phases_are_prefixed():
    rep = run_step(generate(GeneratorSpec("uniform", 500)), None, RunConfig(MachineConfig(4), "steal", "prefix"))
    names = [ph.name for ph in rep.phases]
    assert names[:2] == ["map/steal", "map/termination"]
    assert "shuffle/deliver" in names and "reduce/steal" in names


def test_steal_does_not_disperse():
    step = generate(GeneratorSpec("uniform", 200, reduce_rule=ReduceRule(1, 0, (1, 1))))
    rep = run_step(step, None, RunConfig(MachineConfig(4), "steal", "hash"))
    assert rep.ledger.total_sent("disperse") == 0


@pytest.mark.parametrize(
    "kw", [dict(scheduler="fifo"), dict(shuffle="sort"), dict(remap="partial"), dict(strike_mode="guess")]
)
def test_run_config_validation(kw):
    with pytest.raises(ValueError):
        RunConfig(MachineConfig(2), **kw)


def test_make_row_fields():
    step = generate(GeneratorSpec("uniform", 64))
    rc = RunConfig(MachineConfig(4, seed=9), "steal-strikes", "prefix", "off")
    rep = run_step(step, None, rc)
    row = make_row(rc, compute_parameters(step), rep)
    assert row["seed"] == 9 and row["scheduler"] == "steal-strikes"
    assert row["bottleneck_comm"] == rep.bottleneck_comm
