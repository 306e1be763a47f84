import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bumpy_metric, expr_trees, flat_torus, hyperbolic_metric, sphere_metric
from mixedcurv import expr as ex
from mixedcurv.errors import DegeneratePlane, SingularMetric
from mixedcurv.geometry import (
    Chart,
    MetricField,
    VectorField,
    christoffel,
    curvature,
    divergence,
    divergence_routes,
    scalar_calculus,
    sectional,
)


def test_sphere_christoffel():
    th = 0.8
    G = christoffel(sphere_metric(), [th, 1.0])
    assert G[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th), abs=1e-14)
    assert G[1, 0, 1] == pytest.approx(np.cos(th) / np.sin(th), abs=1e-14)
    assert G[1, 1, 0] == pytest.approx(G[1, 0, 1], abs=0)
    assert G[0, 0, 0] == 0.0


def test_sphere_ricci_and_scalar():
    g = sphere_metric()
    c = curvature(g, [1.1, 0.4])
    np.testing.assert_allclose(c.ricci, g.values([1.1, 0.4]), atol=1e-13)
    assert c.scalar == pytest.approx(2.0, abs=1e-13)


def test_hyperbolic_scalar():
    c = curvature(hyperbolic_metric(), [[0.2, 0.7], [-0.5, 1.9]])
    np.testing.assert_allclose(c.scalar, -2.0, atol=1e-12)


def test_flat_everything_zero():
    c = curvature(flat_torus(), [1.0, 2.0])
    assert np.abs(c.riemann).max() == 0.0


@pytest.mark.parametrize("metric, K", [(sphere_metric, 1.0), (hyperbolic_metric, -1.0)])
def test_constant_curvature_on_random_planes(metric, K, rng):
    g = metric()
    pts = g.chart.random_points(100, rng)
    X = rng.normal(size=(100, 2))
    Y = rng.normal(size=(100, 2))
    np.testing.assert_allclose(sectional(g, pts, X, Y), K, atol=1e-8)


def test_sectional_of_parallel_vectors_raises():
    with pytest.raises(DegeneratePlane):
        sectional(sphere_metric(), [1.0, 0.0], [1.0, 2.0], [2.0, 4.0])


def test_singular_metric():
    chart = Chart(((-1.0, 1.0), (-1.0, 1.0)), (False, False))
    g = MetricField(chart, [["1", "x0"], ["x0", "1"]])
    with pytest.raises(SingularMetric):
        curvature(g, [1.0, 0.0])


def test_metric_must_be_symmetric():
    chart = Chart(((-1.0, 1.0), (-1.0, 1.0)), (False, False))
    with pytest.raises(ValueError):
        MetricField(chart, [["1", "x0"], ["0", "1"]])


def test_sphere_laplacian_of_cos_theta():
    g = sphere_metric()
    pts = np.array([[0.5, 0.0], [1.3, 2.0], [2.4, 5.0]])
    sc = scalar_calculus(g, "cos(x0)", pts)
    np.testing.assert_allclose(sc.laplacian, -2.0 * np.cos(pts[:, 0]), atol=1e-13)
    np.testing.assert_allclose(sc.gradient[:, 0], -np.sin(pts[:, 0]), atol=1e-14)


def test_sweep_and_random_points(rng):
    chart = Chart(((0.0, 1.0), (0.0, 2 * np.pi)), (False, True))
    grid = chart.sweep_points(5)
    assert grid.shape == (25, 2)
    assert grid[:, 0].max() == 1.0 and grid[:, 1].max() < 2 * np.pi
    r = chart.random_points(200, rng)
    assert np.all(r[:, 0] >= 0.05) and np.all(r[:, 0] <= 0.95)


def _lowered(g, p):
    c = curvature(g, p)
    return np.einsum("lijk,lm->ijkm", c.riemann, g.values(p))


def test_metric_compatibility(rng):
    g = bumpy_metric()
    pts = g.chart.random_points(100, rng)
    gv, dg = g.jet(pts, order=1)
    G = christoffel(g, pts)
    # dg[b, k, i, j] = d_k g_ij
    nab = dg - np.einsum("blki,blj->bkij", G, gv) - np.einsum("blkj,bil->bkij", G, gv)
    assert np.abs(nab).max() <= 1e-10


@given(st.lists(st.floats(-0.9, 0.9, allow_nan=False), min_size=3, max_size=3))
def test_curvature_symmetries(p):
    R = _lowered(bumpy_metric(), np.array(p))
    scale = 1 + np.abs(R).max()
    assert np.abs(R + R.transpose(1, 0, 2, 3)).max() <= 1e-10 * scale
    assert np.abs(R + R.transpose(0, 1, 3, 2)).max() <= 1e-10 * scale
    assert np.abs(R - R.transpose(2, 3, 0, 1)).max() <= 1e-10 * scale
    bianchi = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
    assert np.abs(bianchi).max() <= 1e-10 * scale


def test_mixed_partials_of_metric_jet_are_symmetric(rng):
    g = bumpy_metric()
    _, _, ddg = g.jet(g.chart.random_points(10, rng))
    np.testing.assert_allclose(ddg, ddg.transpose(0, 2, 1, 3, 4), atol=1e-13)


@given(expr_trees(dim=3, max_leaves=5), expr_trees(dim=3, max_leaves=5), expr_trees(dim=3, max_leaves=5))
def test_divergence_routes_agree(a, b, c):
    g = bumpy_metric()
    X = VectorField((a, b, c))
    pts = g.chart.random_points(20, np.random.default_rng(5))
    vol, tr = divergence_routes(g, X, pts)
    assert np.abs(vol - tr).max() <= 1e-10 * (1 + np.abs(vol).max())


def test_divergence_on_flat_torus():
    X = VectorField.parse(["sin(x0)", "cos(x1)"], 2)
    p = np.array([[0.4, 1.1]])
    np.testing.assert_allclose(divergence(flat_torus(), X, p), np.cos(0.4) - np.sin(1.1), atol=1e-15)


def test_divergence_of_rotation_on_sphere_is_zero():
    X = VectorField((ex.ZERO, ex.ONE))
    assert abs(divergence(sphere_metric(), X, [1.0, 0.3])) <= 1e-15
