import hypothesis.strategies as st
from hypothesis import settings

from mrsim.core import EmittedPair, InputElement, ReduceRule, WorkloadStep

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def steps(draw, max_elements=30, max_keys=8):
    """Small irregular steps with consistent key sizes."""
    n = draw(st.integers(0, max_elements))
    keys = draw(st.integers(1, max_keys))
    ksize = draw(st.lists(st.integers(1, 3), min_size=keys, max_size=keys))
    elements = []
    for i in range(n):
        emits = draw(
            st.lists(
                st.tuples(st.integers(0, keys - 1), st.integers(0, 4)),
                max_size=3,
            )
        )
        elements.append(
            InputElement(
                id=i,
                size_words=draw(st.integers(1, 5)),
                map_cost=draw(st.integers(0, 9)),
                emissions=tuple(EmittedPair(k, ksize[k], v) for k, v in emits),
            )
        )
    if draw(st.booleans()):
        rule = ReduceRule(draw(st.integers(0, 3)), draw(st.integers(0, 2)), (draw(st.integers(0, 3)),), "per_pair")
    else:
        outs = tuple(draw(st.lists(st.integers(0, 3), max_size=3)))
        rule = ReduceRule(draw(st.integers(0, 3)), draw(st.integers(0, 2)), outs)
    return WorkloadStep(tuple(elements), rule)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
