import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from mixedcurv import expr as ex
from mixedcurv.geometry import Chart, MetricField

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def sphere_metric():
    chart = Chart(((0.3, np.pi - 0.3), (0.0, 2 * np.pi)), (False, True), "sphere")
    return MetricField(chart, [["1", "0"], ["0", "sin(x0)^2"]])


def hyperbolic_metric():
    chart = Chart(((-1.0, 1.0), (0.5, 2.0)), (False, False), "half_plane")
    return MetricField(chart, [["1/x1^2", "0"], ["0", "1/x1^2"]])


def flat_torus():
    chart = Chart(((0.0, 2 * np.pi), (0.0, 2 * np.pi)), (True, True), "flat_T2")
    return MetricField(chart, [["1", "0"], ["0", "1"]])


def bumpy_metric():
    """A generic non-diagonal metric on a 3-box, used for tensor symmetries."""
    chart = Chart(((-1.0, 1.0),) * 3, (False,) * 3, "bumpy")
    return MetricField(
        chart,
        [
            ["2 + sin(x0*x1)", "0.3*cos(x2)", "0.1*x0*x1"],
            ["0.3*cos(x2)", "3 + x2^2", "0.2*sin(x0 + x2)"],
            ["0.1*x0*x1", "0.2*sin(x0 + x2)", "2.5 + cos(x1)"],
        ],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _leaf(dim):
    return st.one_of(
        st.integers(0, dim - 1).map(ex.coord),
        st.floats(-2.0, 2.0, allow_nan=False).map(lambda v: ex.const(round(v, 3))),
    )


def expr_trees(dim=2, max_leaves=8):
    """Random trees over guard-free operations (values stay moderate on [-1, 1]^dim)."""

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: ab[0] + ab[1]),
            st.tuples(children, children).map(lambda ab: ab[0] * ab[1]),
            st.tuples(children, children).map(lambda ab: ab[0] / (ex.const(2.0) + ex.sin(ab[1]))),
            children.map(ex.sin),
            children.map(ex.cos),
            children.map(lambda a: ex.exp(ex.sin(a))),
            children.map(lambda a: ex.sqrt(ex.const(1.5) + ex.cos(a))),
            children.map(lambda a: ex.power(a, 3)),
        )

    return st.recursive(_leaf(dim), extend, max_leaves=max_leaves)


def points(dim=2):
    return st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=dim, max_size=dim).map(np.array)


# acceptance criteria register their outcome here; printed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
