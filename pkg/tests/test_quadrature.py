import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import flat_torus, sphere_metric
from mixedcurv import catalog
from mixedcurv.almost_product import structure
from mixedcurv.errors import BallOutsideDomain, NonClosedChart
from mixedcurv.geometry import Chart, MetricField, VectorField
from mixedcurv.quadrature import GridSpec, axis_rule, green_check, integrate, karp_quotient, l1_norm

FLOOR = 1e-13


def test_grid_minimum():
    with pytest.raises(ValueError):
        GridSpec((8, 7))
    assert GridSpec.uniform(2, 9).rules(sphere_metric().chart) == ("gauss_legendre", "trapezoid")


def test_axis_rules_integrate_exactly():
    x, w = axis_rule(0.0, 2.0, 8, False)
    assert np.sum(w * x**15) == pytest.approx(2.0**16 / 16, rel=1e-14)
    x, w = axis_rule(0.0, 2 * np.pi, 8, True)
    assert abs(np.sum(w * np.cos(3 * x))) <= 1e-15


def test_sphere_band_area():
    a = 0.3
    assert integrate(sphere_metric(), 1.0, 16) == pytest.approx(4 * np.pi * np.cos(a), rel=1e-13)


def test_integrand_forms_agree():
    g = sphere_metric()
    a = integrate(g, "cos(x0)^2", 16)
    b = integrate(g, lambda p: np.cos(p[:, 0]) ** 2, 16)
    assert a == pytest.approx(b, rel=1e-15)


@given(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))
def test_integrate_is_linear(a, b):
    g = sphere_metric()
    f1, f2 = "sin(x0)*cos(x1)^2", "x0^2"
    lhs = integrate(g, f"{a}*({f1}) + {b}*({f2})", 12)
    rhs = a * integrate(g, f1, 12) + b * integrate(g, f2, 12)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 10)


@given(st.floats(0.0, 5.0, allow_nan=False), st.floats(0.0, 5.0, allow_nan=False))
def test_integrate_is_monotone(a, b):
    g = sphere_metric()
    small = integrate(g, f"{a}*sin(x1)^2", 10)
    big = integrate(g, f"{a}*sin(x1)^2 + {b}*cos(x0)^2", 10)
    assert small >= -1e-15 and big >= small - 1e-12


def test_l1_zero_iff_zero_field():
    g = flat_torus()
    assert l1_norm(g, VectorField.parse(["0", "0"], 2), 8) == 0.0
    assert l1_norm(g, VectorField.parse(["0", "1"], 2), 8) == pytest.approx(4 * np.pi**2, rel=1e-14)
    # vanishes on all nodes but one axis value
    assert l1_norm(g, VectorField.parse(["sin(x0)^2", "0"], 2), 8) > 0


def test_green_on_flat_torus():
    X = VectorField.parse(["sin(x0)", "cos(x1)"], 2)
    assert abs(green_check(flat_torus(), X, 64)) <= 1e-10


def test_green_needs_closed_chart():
    with pytest.raises(NonClosedChart):
        green_check(sphere_metric(), VectorField.parse(["0", "1"], 2), 16)


@pytest.mark.parametrize("name", ["warped_torus", "double_twisted_T2", "product_T2"])
def test_green_on_mean_curvature_fields(name):
    sc = catalog.build(name)
    assert abs(green_check(sc.metric, structure(sc.metric, sc.distribution).xi_sum, 64)) <= 1e-10


def test_spectral_convergence():
    sc = catalog.build("double_twisted_T2")
    X = structure(sc.metric, sc.distribution).xi_sum
    errs = [abs(green_check(sc.metric, X, N)) for N in (8, 16, 32, 64)]
    assert errs[0] > 1e-6
    for a, b in zip(errs, errs[1:]):
        if a > FLOOR:
            assert b <= a / 10 or b <= FLOOR


def test_karp_quotient_of_unit_field():
    chart = Chart(((-5.0, 5.0), (-5.0, 5.0)), (False, False))
    g = MetricField(chart, [["1", "0"], ["0", "1"]])
    X = VectorField.parse(["1", "0"], 2)
    r = 1.5
    assert karp_quotient(g, X, r) == pytest.approx(3 * np.pi * r, rel=1e-12)
    with pytest.raises(BallOutsideDomain):
        karp_quotient(g, X, 3.0)
