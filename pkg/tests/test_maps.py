import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bumpy_metric, sphere_metric
from mixedcurv import catalog
from mixedcurv import expr as ex
from mixedcurv.errors import NotASubmersion, SingularJacobian
from mixedcurv.geometry import Chart, MetricField
from mixedcurv.identities import conformal_metric
from mixedcurv.maps import (
    SmoothMap,
    classify_submersion,
    compose,
    conformal_factor,
    jacobian_kernel,
    kernel_distribution,
    projective_psi,
    pullback_metric,
)

BOX2 = Chart(((-1.0, 1.0), (-1.0, 1.0)), (False, False), "box2")
R3 = Chart(((-10.0, 10.0),) * 3, (False,) * 3, "R3")


def test_jacobian_values():
    f = SmoothMap(BOX2, ["x0*x1", "sin(x0)"])
    np.testing.assert_allclose(f.jacobian([0.5, 2.0]), [[2.0, 0.5], [np.cos(0.5), 0.0]], atol=1e-15)
    np.testing.assert_allclose(f([0.5, 2.0]), [1.0, np.sin(0.5)], atol=1e-15)


def test_kernel_of_projection():
    f = SmoothMap(Chart(((-1.0, 1.0),) * 3, (False,) * 3), ["x0 + x2"])
    J, K = jacobian_kernel(f, [0.1, 0.2, 0.3])
    assert K.shape == (3, 2)
    np.testing.assert_allclose(J @ K, 0.0, atol=1e-14)
    np.testing.assert_allclose(K.T @ K, np.eye(2), atol=1e-14)
    for c in range(2):
        nz = np.flatnonzero(np.abs(K[:, c]) > 1e-12)
        assert K[nz[0], c] > 0


def test_not_a_submersion():
    f = SmoothMap(BOX2, ["x0^2"])
    with pytest.raises(NotASubmersion):
        jacobian_kernel(f, [0.0, 0.3])


def test_pullback_needs_full_rank():
    f = SmoothMap(BOX2, ["x0", "x0", "x0"])
    with pytest.raises(SingularJacobian):
        pullback_metric(f, MetricField(R3, np.eye(3).astype(int).astype(str).tolist()))
    with pytest.raises(SingularJacobian):
        pullback_metric(SmoothMap(BOX2, ["x0"]), MetricField(Chart(((-1.0, 1.0),), (False,)), [["1"]]))


def test_gnomonic_embedding_pulls_back_round_metric():
    sc = catalog.build("gnomonic_projective_pair")
    pb = pullback_metric(sc.embedding, sc.embedding_metric)
    pts = sc.chart.random_points(20, np.random.default_rng(3))
    np.testing.assert_allclose(pb.values(pts), sc.metric.values(pts), atol=1e-13)


def test_psi_is_half_log_two_at_one_zero():
    sc = catalog.build("gnomonic_projective_pair")
    assert ex.evaluate(projective_psi(sc.metric, sc.metric_bar), [1.0, 0.0]) == pytest.approx(0.5 * np.log(2), abs=1e-12)


# a non-flat ambient metric on R^3 and a diffeomorphism of the box
GBAR = MetricField(R3, [["1 + x2^2", "0", "0.1*x0"], ["0", "2 + sin(x0)", "0"], ["0.1*x0", "0", "1.5"]])
F = SmoothMap(Chart(((-2.0, 2.0), (-2.0, 2.0)), (False, False)), ["x0", "x1", "0.5*(x0^2 - x1^2)"], R3)
H = SmoothMap(BOX2, ["x0 + 0.3*sin(x1)", "x1 + 0.2*x0^2"], F.source)


@given(st.lists(st.floats(-0.95, 0.95, allow_nan=False), min_size=2, max_size=2))
def test_pullback_functoriality(p):
    lhs = pullback_metric(compose(F, H), GBAR).values(p)
    rhs = pullback_metric(H, pullback_metric(F, GBAR)).values(p)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(st.lists(st.floats(0.35, np.pi - 0.35, allow_nan=False), min_size=1, max_size=1), st.floats(0, 6.2))
def test_kernel_is_annihilated(theta, phi):
    chart = Chart(((0.3, np.pi - 0.3), (0.0, 2 * np.pi)), (False, True))
    f = SmoothMap(chart, ["cos(x0)*cos(x1)"])
    p = [theta[0], phi]
    try:
        J, K = jacobian_kernel(f, p)
    except NotASubmersion:
        return
    assert np.abs(J @ K).max() <= 1e-10


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_conformal_factor_recovers_sigma(a, b, c):
    g = bumpy_metric()
    sigma = ex.parse(f"{a}*sin(x0) + {b}*x1*x2 + {c}", 3)
    pts = g.chart.random_points(10, np.random.default_rng(7))
    s, res = conformal_factor(g, conformal_metric(g, sigma), pts)
    np.testing.assert_allclose(s, ex.evaluate_many([sigma], pts)[0], atol=1e-10)
    assert res.max() <= 1e-9 * np.exp(2 * (abs(a) + abs(b) + abs(c)))


def test_kernel_distribution_is_horizontal_gradient_span():
    g = sphere_metric()
    D = kernel_distribution(SmoothMap(g.chart, ["x0"]), g)
    assert D.role == "horizontal" and D.rank == 1
    np.testing.assert_allclose(D.spans[0].evaluate([1.0, 2.0]), [1.0, 0.0])


def test_riemannian_submersion_is_horizontally_conformal_with_unit_factor():
    sc = catalog.build("sphere_latitude_submersion")
    for p in sc.chart.random_points(10, np.random.default_rng(0)):
        c = classify_submersion(sc.map, sc.metric, sc.target_metric, p)
        assert c.riemannian_submersion
        assert c.horizontally_conformal
        assert abs(c.conformal_factor - 1.0) <= 1e-9
        assert not c.fibers_minimal
        assert c.residuals["fibers_minimal"] == pytest.approx(abs(np.cos(p[0]) / np.sin(p[0])), abs=1e-10)


def test_double_twisted_classification():
    sc = catalog.build("double_twisted_T2")
    x, y = 0.4, 1.3
    c = classify_submersion(sc.map, sc.metric, sc.target_metric, [x, y])
    assert c.horizontally_conformal and not c.riemannian_submersion
    assert c.conformal_factor == pytest.approx(1 / (2 + np.cos(y) + 0.5 * np.sin(x)), abs=1e-12)
    assert c.fibers_umbilical and not c.fibers_minimal
