"""Smooth maps between charts: Jacobians, kernels, pullbacks and the
submersion classifier.

A map is stored as component expressions over the source coordinates.
Target-side expressions (a target metric, say) are pulled back by
substituting the components for the target coordinates.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import expr as ex
from .almost_product import DistributionSpec, structure
from .errors import NotASubmersion, SingularJacobian, SingularMetric
from .geometry import Chart, MetricField, VectorField, as_points, check_spd

RANK_TOL = 1e-10
DEFAULT_GATE_TOL = 1e-8
CONFORMAL_TOL = 1e-9


class SmoothMap:
    """``f: source -> target`` given by ``m`` component expressions."""

    def __init__(self, source: Chart, components, target: Chart | None = None):
        n = source.dim
        comps = tuple(ex.parse(c, n) if isinstance(c, str) else ex.as_expr(c) for c in components)
        if not comps:
            raise ValueError("a map needs at least one component")
        if target is not None and target.dim != len(comps):
            raise ValueError("target chart dimension does not match the number of components")
        self.source = source
        self.target = target
        self.components = comps

    def __repr__(self):
        return f"SmoothMap({self.source.dim} -> {self.target_dim})"

    @property
    def source_dim(self):
        return self.source.dim

    @property
    def target_dim(self):
        return len(self.components)

    @functools.cached_property
    def jacobian_exprs(self):
        return tuple(tuple(ex.differentiate(c, i) for i in range(self.source_dim)) for c in self.components)

    def __call__(self, points):
        pts, single = as_points(points, self.source_dim)
        out = ex.evaluate_many(self.components, pts).T
        return out[0] if single else out

    def jacobian(self, points):
        """``J[..., a, i] = d_i f^a``."""
        pts, single = as_points(points, self.source_dim)
        flat = [d for row in self.jacobian_exprs for d in row]
        J = ex.evaluate_many(flat, pts).T.reshape(-1, self.target_dim, self.source_dim)
        return J[0] if single else J


def compose(f: SmoothMap, h: SmoothMap) -> SmoothMap:
    """``f o h``."""
    if h.target_dim != f.source_dim:
        raise ValueError("cannot compose: dimension mismatch")
    subs = dict(enumerate(h.components))
    return SmoothMap(h.source, [ex.substitute(c, subs) for c in f.components], f.target)


def _rank(s, scale):
    return int(np.sum(s > RANK_TOL * max(scale, 1.0)))


def kernel_basis(J):
    """Orthonormal (Euclidean) basis of ker J from pivoted QR of J^T, signs
    fixed so the first nonzero component of each vector is positive."""
    m, n = J.shape
    s = np.linalg.svd(J, compute_uv=False)
    r = _rank(s, s[0] if s.size else 0.0)
    Q, _, _ = scipy.linalg.qr(J.T, pivoting=True)
    K = Q[:, r:]
    for c in range(K.shape[1]):
        nz = np.flatnonzero(np.abs(K[:, c]) > 1e-12)
        if nz.size and K[nz[0], c] < 0:
            K[:, c] = -K[:, c]
    return K, r


def jacobian_kernel(f: SmoothMap, p, require_submersion: bool = True):
    """Jacobian of ``f`` at one point and a basis of its kernel (columns)."""
    pt = np.asarray(p, dtype=float)
    if pt.ndim != 1:
        raise ValueError("jacobian_kernel takes a single point")
    J = f.jacobian(pt)
    K, r = kernel_basis(J)
    if require_submersion and r < f.target_dim:
        raise NotASubmersion(f"rank {r} < {f.target_dim} at {tuple(pt)}")
    return J, K


def pullback_metric(f: SmoothMap, gbar: MetricField, check_points: int = 5) -> MetricField:
    """``(f* gbar)_ij = d_i f^a d_j f^b gbar_ab(f)`` as expression trees.

    Immersions (target dimension at least the source dimension) are
    accepted; the Jacobian must have full column rank at the sampled nodes.
    """
    n, m = f.source_dim, f.target_dim
    if gbar.dim != m:
        raise ValueError("target metric dimension does not match the map")
    if m < n:
        raise SingularJacobian("pullback needs target dimension >= source dimension")
    pts = f.source.sweep_points(check_points)
    s = np.linalg.svd(f.jacobian(pts), compute_uv=False)
    if np.any(s[:, -1] <= RANK_TOL * np.maximum(s[:, 0], 1.0)):
        i = int(np.argmin(s[:, -1]))
        raise SingularJacobian(f"Jacobian rank-deficient at {tuple(pts[i])}")
    subs = dict(enumerate(f.components))
    gb = [[ex.substitute(gbar.components[a][b], subs) for b in range(m)] for a in range(m)]
    J = f.jacobian_exprs
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            acc = ex.ZERO
            for a in range(m):
                if J[a][i].kind == "const" and J[a][i].value == 0.0:
                    continue
                for b in range(m):
                    acc = acc + J[a][i] * J[b][j] * gb[a][b]
            rows[i][j] = rows[j][i] = acc
    return MetricField(f.source, rows)


def conformal_factor(g: MetricField, gbar: MetricField, p):
    """``sigma = log(det gbar / det g) / (2n)`` and ``max|gbar - e^{2 sigma} g|``."""
    pts, single = as_points(p, g.dim)
    gv = g.values(pts)
    gb = gbar.values(pts)
    check_spd(gv, pts)
    check_spd(gb, pts)
    n = g.dim
    _, ld = np.linalg.slogdet(gv)
    _, ldb = np.linalg.slogdet(gb)
    sigma = (ldb - ld) / (2 * n)
    res = np.abs(gb - np.exp(2 * sigma)[:, None, None] * gv).max(axis=(1, 2))
    return (sigma[0], res[0]) if single else (sigma, res)


def projective_psi(g: MetricField, gbar: MetricField) -> ex.ScalarExpr:
    """``log(det gbar / det g) / (2(n+1))`` with the additive constant set to 0."""
    if g.dim != gbar.dim:
        raise ValueError("metrics live on charts of different dimension")
    n = g.dim
    return ex.log(gbar.det_expr / g.det_expr) / (2 * (n + 1))


@functools.lru_cache(maxsize=64)
def kernel_distribution(f: SmoothMap, g: MetricField) -> DistributionSpec:
    """``(Ker f_*)^perp`` spanned by the gradients of the components; the
    kernel itself is the vertical member."""
    n = g.dim
    ginv = g.inverse_exprs
    spans = []
    for c in f.components:
        d = [ex.differentiate(c, j) for j in range(n)]
        spans.append(VectorField(tuple(sum((ginv[i][j] * d[j] for j in range(n)), ex.ZERO) for i in range(n))))
    return DistributionSpec(tuple(spans), role="horizontal")


@dataclass(frozen=True)
class MapClassification:
    rank: int
    kernel_basis: np.ndarray
    flags: dict
    residuals: dict
    conformal_factor: float
    thresholds: dict = field(default_factory=dict)

    def __getattr__(self, name):
        flags = object.__getattribute__(self, "flags")
        if name in flags:
            return flags[name]
        raise AttributeError(name)


FLAG_NAMES = (
    "riemannian_submersion",
    "horizontally_conformal",
    "fibers_minimal",
    "fibers_umbilical",
    "horizontal_totally_geodesic",
)


def classify_batch(f: SmoothMap, g: MetricField, gbar: MetricField, points, D=None):
    """Classifier residuals at a batch of points; returns a dict of arrays."""
    pts = np.asarray(points, dtype=float)
    if D is None:
        D = kernel_distribution(f, g)
    J = f.jacobian(pts)
    s_all = np.linalg.svd(J, compute_uv=False)
    low = s_all[:, -1] <= RANK_TOL * np.maximum(s_all[:, 0], 1.0)
    if np.any(low):
        i = int(np.flatnonzero(low)[0])
        raise NotASubmersion(f"rank < {f.target_dim} at {tuple(pts[i])}")
    pkg = structure(g, D).evaluate(pts)
    gb = gbar.values(f(pts))
    try:
        w, U = np.linalg.eigh(gb)
    except np.linalg.LinAlgError as err:  # pragma: no cover
        raise SingularMetric(str(err)) from err
    if np.any(w <= 0):
        raise SingularMetric("target metric not positive definite")
    root = np.einsum("bij,bj,bkj->bik", U, np.sqrt(w), U)
    A = root @ J @ pkg.frame_H
    sv = np.linalg.svd(A, compute_uv=False)
    return {
        "riemannian_submersion": np.abs(sv - 1.0).max(axis=1),
        "horizontally_conformal": sv.max(axis=1) - sv.min(axis=1),
        "conformal_factor": sv.mean(axis=1),
        "fibers_minimal": np.sqrt(pkg.xi_V_norm_sq),
        "fibers_umbilical": pkg.umbilicity_V,
        "horizontal_totally_geodesic": np.sqrt(pkg.Q_H_norm_sq),
    }


def classify_submersion(f: SmoothMap, g: MetricField, gbar: MetricField, p, gate_tol: float = DEFAULT_GATE_TOL):
    """Pointwise classification of a submersion against the target metric."""
    pt = np.asarray(p, dtype=float)
    _, K = jacobian_kernel(f, pt)
    res = {k: float(v[0]) for k, v in classify_batch(f, g, gbar, pt[None, :]).items()}
    factor = res.pop("conformal_factor")
    thresholds = {name: gate_tol for name in FLAG_NAMES}
    flags = {name: res[name] <= thresholds[name] for name in FLAG_NAMES}
    return MapClassification(
        rank=f.target_dim,
        kernel_basis=K,
        flags=flags,
        residuals=res,
        conformal_factor=factor,
        thresholds=thresholds,
    )
