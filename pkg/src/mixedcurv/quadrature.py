"""Tensor-product quadrature with the Riemannian volume element.

Periodic axes use the trapezoid rule on equispaced nodes (the duplicate
endpoint dropped), which is spectrally accurate for smooth periodic
integrands.  Other axes use Gauss-Legendre.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import BallOutsideDomain, NonClosedChart
from .geometry import MetricField, VectorField, divergence_routes, norm_sq

MIN_NODES = 8


@dataclass(frozen=True)
class GridSpec:
    """Points per axis; the rule of each axis follows the chart's periodic flag."""

    N: tuple

    def __post_init__(self):
        N = tuple(int(k) for k in self.N)
        if any(k < MIN_NODES for k in N):
            raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {N}")
        object.__setattr__(self, "N", N)

    @classmethod
    def uniform(cls, dim, N):
        return cls((N,) * dim)

    def rules(self, chart):
        return tuple("trapezoid" if p else "gauss_legendre" for p in chart.periodic)


def axis_rule(lo, hi, N, periodic):
    if periodic:
        h = (hi - lo) / N
        return lo + h * np.arange(N), np.full(N, h)
    x, w = np.polynomial.legendre.leggauss(N)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def nodes_weights(chart, grid: GridSpec, axes=None):
    """Tensor nodes (K, len(axes)) and weights (K,) over the chosen axes."""
    axes = range(chart.dim) if axes is None else axes
    rules = [axis_rule(*chart.bounds[a], grid.N[a], chart.periodic[a]) for a in axes]
    xs = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    ws = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([x.ravel() for x in xs], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in ws], axis=1), axis=1)
    return nodes, weights


def _as_grid(g, grid):
    if isinstance(grid, GridSpec):
        return grid
    return GridSpec.uniform(g.dim, int(grid))


def _values(g, e, nodes):
    if isinstance(e, str):
        e = ex.parse(e, g.dim)
    if isinstance(e, (int, float)):
        e = ex.const(e)
    if isinstance(e, ex.ScalarExpr):
        return ex.evaluate_many([e], nodes)[0]
    return np.asarray(e(nodes), dtype=float)


def integrate(g: MetricField, e, grid) -> float:
    """``int e dVol_g`` over the whole chart.

    ``e`` is an expression, an expression string, a number, or a callable
    mapping nodes (K, n) to values (K,).
    """
    grid = _as_grid(g, grid)
    nodes, w = nodes_weights(g.chart, grid)
    vol = np.sqrt(np.linalg.det(g.values(nodes)))
    return float(np.sum(w * vol * _values(g, e, nodes)))


def _vector_values(X, nodes):
    if isinstance(X, VectorField):
        return X.evaluate(nodes)
    return np.asarray(X(nodes), dtype=float)


def l1_norm(g: MetricField, X, grid) -> float:
    """``int |X|_g dVol_g``; ``X`` is a VectorField or a callable (K, n) -> (K, n)."""
    grid = _as_grid(g, grid)
    nodes, w = nodes_weights(g.chart, grid)
    gv = g.values(nodes)
    Xv = _vector_values(X, nodes)
    mag = np.sqrt(np.maximum(norm_sq(gv, Xv), 0.0))
    return float(np.sum(w * np.sqrt(np.linalg.det(gv)) * mag))


def green_check(g: MetricField, X: VectorField, grid) -> float:
    """``int div X dVol_g`` on a closed (all-periodic) chart; should vanish."""
    if not all(g.chart.periodic):
        raise NonClosedChart(f"chart {g.chart.name!r} has non-periodic axes")
    grid = _as_grid(g, grid)
    nodes, w = nodes_weights(g.chart, grid)
    div, _ = divergence_routes(g, X, nodes)
    vol = np.sqrt(np.linalg.det(g.values(nodes)))
    return float(np.sum(w * vol * div))


def karp_quotient(g: MetricField, X, r: float, center=None, n_radial: int = 24, n_angular: int = 64) -> float:
    """``(1/r) int_{B(2r) minus B(r)} |X| dVol_g`` with coordinate balls.

    Illustrative only: coordinate balls stand in for geodesic balls, which is
    faithful on flat-background charts.  Two-dimensional charts only.
    """
    chart = g.chart
    if chart.dim != 2:
        raise ValueError("karp_quotient is implemented for 2-dimensional charts")
    if any(chart.periodic):
        raise ValueError("karp_quotient needs a non-periodic chart")
    if r <= 0:
        raise ValueError("radius must be positive")
    c = 0.5 * (chart.lo + chart.hi) if center is None else np.asarray(center, dtype=float)
    if np.any(c - 2 * r < chart.lo) or np.any(c + 2 * r > chart.hi):
        raise BallOutsideDomain(f"B({2 * r}) around {tuple(c)} leaves the chart")
    rho, wr = axis_rule(r, 2 * r, n_radial, False)
    phi, wp = axis_rule(0.0, 2 * np.pi, n_angular, True)
    R, PHI = np.meshgrid(rho, phi, indexing="ij")
    W = np.outer(wr, wp).ravel() * R.ravel()
    nodes = np.stack([c[0] + (R * np.cos(PHI)).ravel(), c[1] + (R * np.sin(PHI)).ravel()], axis=1)
    gv = g.values(nodes)
    Xv = _vector_values(X, nodes)
    mag = np.sqrt(np.maximum(norm_sq(gv, Xv), 0.0))
    return float(np.sum(W * np.sqrt(np.linalg.det(gv)) * mag)) / r
