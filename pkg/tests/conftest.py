import pytest
from hypothesis import strategies as st

from fwbound import extended
from fwbound.dynamics import sbar


@pytest.fixture(scope="session")
def ctx256():
    return extended(256)


def m_states(min_r=1e-6):
    """(r, s) pairs in the forward domain M, bounded away from r = 0."""

    @st.composite
    def build(draw):
        r = draw(st.floats(min_value=min_r, max_value=2.0))
        u = draw(st.floats(min_value=0.0, max_value=1.0))
        return r, u * sbar(r)

    return build()


def mtilde_states(min_u=0.0, min_r=1e-6):
    """(r, s) pairs in the backward domain Mtilde, s = u/(1+r)."""

    @st.composite
    def build(draw):
        r = draw(st.floats(min_value=min_r, max_value=1 / 3))
        u = draw(st.floats(min_value=min_u, max_value=1.0))
        return r, u / (1 + r)

    return build()


def polar_states():
    """Feasible polar states: r in (0, 2], theta in [-1, -r/2]."""

    @st.composite
    def build(draw):
        r = draw(st.floats(min_value=1e-6, max_value=2.0))
        u = draw(st.floats(min_value=0.0, max_value=1.0))
        return r, -(r / 2 + u * (1 - r / 2))

    return build()
