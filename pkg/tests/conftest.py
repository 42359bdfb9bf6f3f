import itertools
from fractions import Fraction

import hypothesis.strategies as st
from hypothesis import HealthCheck, settings

from monodimer.graph import Graph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@st.composite
def small_graphs(draw, max_n=6, max_m=7, min_m=1):
    n = draw(st.integers(2, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    k = draw(st.integers(min(min_m, len(pairs)), min(max_m, len(pairs))))
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=k, max_size=k, unique=True))
    order = draw(st.permutations(range(n)))
    return Graph.from_edges(n, chosen, vertex_order=order)


lambdas = st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(5, 2)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
