import pytest
from hypothesis import settings, strategies as st

from conpart.combinatorics import ConstraintSeq, enumerate_partitions

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

RHO_TEXTS = (";1", "1,2;1", ";2", "1,2,3;1")
RHO_SET = tuple(ConstraintSeq.parse(t) for t in RHO_TEXTS)


@pytest.fixture(params=RHO_TEXTS)
def rho(request):
    return ConstraintSeq.parse(request.param)


rhos = st.sampled_from(RHO_SET)


@st.composite
def partitions(draw, max_n=8):
    """A constrained partition drawn uniformly from the enumeration, with its rho."""
    r = draw(rhos)
    n = draw(st.integers(1, max_n))
    pis = enumerate_partitions(n, r)
    return draw(st.sampled_from(pis)), r


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
