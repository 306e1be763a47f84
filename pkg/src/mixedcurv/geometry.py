"""Levi-Civita connection, curvature and first-order operators on a chart.

Conventions: ``dg[..., k, i, j] = d_k g_ij``; Christoffel symbols are stored
as ``gamma[..., k, i, j] = Gamma^k_ij``; the Riemann tensor as
``riemann[..., l, i, j, k] = R^l_ijk`` with

    R(d_i, d_j) d_k = R^l_ijk d_l,   R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y],

so ``sec(X, Y) = <R(X, Y) Y, X> / (|X|^2 |Y|^2 - <X, Y>^2)`` is +1 on the
round sphere.  Ricci is ``Ric_jk = R^i_ijk``.

Every public pointwise function accepts a single point of shape (n,) or a
batch of shape (B, n); batched inputs give batched outputs.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import ConsistencyError, DegeneratePlane, SingularMetric

SPD_EIG_MIN = 1e-10
DIVERGENCE_XCHECK_TOL = 1e-10


@dataclass(frozen=True)
class Chart:
    """A coordinate box; periodic axes identify ``lo`` with ``hi``."""

    bounds: tuple
    periodic: tuple
    name: str = "chart"

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        periodic = tuple(bool(p) for p in self.periodic)
        if len(bounds) != len(periodic):
            raise ValueError("bounds and periodic flags differ in length")
        if not bounds:
            raise ValueError("a chart needs at least one axis")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "periodic", periodic)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self):
        return np.array([b[1] for b in self.bounds])

    def axis_nodes(self, N: int, axis: int) -> np.ndarray:
        lo, hi = self.bounds[axis]
        if self.periodic[axis]:
            return lo + (hi - lo) * np.arange(N) / N
        return np.linspace(lo, hi, N)

    def sweep_points(self, N) -> np.ndarray:
        """Tensor grid: equispaced without the duplicate endpoint on periodic
        axes, endpoints included otherwise."""
        Ns = [N] * self.dim if np.isscalar(N) else list(N)
        axes = [self.axis_nodes(int(Ns[i]), i) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def random_points(self, k: int, rng: np.random.Generator, margin: float = 0.05) -> np.ndarray:
        u = rng.uniform(size=(k, self.dim))
        span = self.hi - self.lo
        return self.lo + span * (margin + (1.0 - 2.0 * margin) * u)

    def contains(self, points, slack: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lo - slack) & (pts <= self.hi + slack), axis=1)


def as_points(p, n):
    """Normalise ``p`` to shape (B, n); also report whether it was one point."""
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = arr.reshape(1, -1) if single else arr
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError(f"expected points with {n} coordinates, got shape {np.shape(p)}")
    return arr, single


def _out(x, single):
    return x[0] if single else x


def _parse_matrix(components, n):
    rows = [[ex.parse(c, n) if isinstance(c, str) else ex.as_expr(c) for c in row] for row in components]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"metric must be {n}x{n}")
    return rows


class MetricField:
    """Symmetric matrix of expressions ``g_ij`` on a chart.

    First and second coordinate derivatives are built once as exact trees;
    :meth:`jet` evaluates value, first and second derivatives together.
    """

    def __init__(self, chart: Chart, components):
        self.chart = chart
        n = chart.dim
        rows = _parse_matrix(components, n)
        for i in range(n):
            for j in range(i):
                if rows[i][j] is not rows[j][i]:
                    raise ValueError(f"metric is not symmetric: g[{i}][{j}] != g[{j}][{i}]")
        self.components = tuple(tuple(r) for r in rows)
        self._jet_programs = {}

    def __repr__(self):
        return f"MetricField({self.chart.name}, n={self.dim})"

    @property
    def dim(self):
        return self.chart.dim

    @functools.cached_property
    def d1(self):
        n = self.dim
        g = self.components
        return tuple(tuple(tuple(ex.differentiate(g[i][j], k) for j in range(n)) for i in range(n)) for k in range(n))

    @functools.cached_property
    def d2(self):
        n = self.dim
        d1 = self.d1
        return tuple(
            tuple(tuple(tuple(ex.differentiate(d1[k][i][j], l) for j in range(n)) for i in range(n)) for k in range(n))
            for l in range(n)
        )

    def _jet_program(self, order):
        prog = self._jet_programs.get(order)
        if prog is None:
            n = self.dim
            upper = [(i, j) for i in range(n) for j in range(i, n)]
            roots = [self.components[i][j] for i, j in upper]
            if order >= 1:
                roots += [self.d1[k][i][j] for k in range(n) for i, j in upper]
            if order >= 2:
                roots += [self.d2[l][k][i][j] for l in range(n) for k in range(l, n) for i, j in upper]
            prog = (ex.compile_exprs(roots), upper)
            self._jet_programs[order] = prog
        return prog

    def jet(self, points, order: int = 2):
        """Arrays ``g`` (B,n,n), ``dg`` (B,n,n,n), ``ddg`` (B,n,n,n,n) at a batch."""
        pts = np.asarray(points, dtype=float)
        prog, upper = self._jet_program(order)
        vals = prog(pts)
        n, B = self.dim, pts.shape[0]
        u = len(upper)
        ii = np.array([i for i, _ in upper])
        jj = np.array([j for _, j in upper])
        g = np.empty((B, n, n))
        g[:, ii, jj] = vals[:u].T
        g[:, jj, ii] = vals[:u].T
        out = [g]
        pos = u
        if order >= 1:
            dg = np.empty((B, n, n, n))
            for k in range(n):
                dg[:, k, ii, jj] = vals[pos:pos + u].T
                dg[:, k, jj, ii] = vals[pos:pos + u].T
                pos += u
            out.append(dg)
        if order >= 2:
            ddg = np.empty((B, n, n, n, n))
            for l in range(n):
                for k in range(l, n):
                    block = vals[pos:pos + u].T
                    for a, b in ((l, k), (k, l)):
                        ddg[:, a, b, ii, jj] = block
                        ddg[:, a, b, jj, ii] = block
                    pos += u
            out.append(ddg)
        return tuple(out) if len(out) > 1 else out[0]

    def values(self, points):
        """``g_ij`` at one point (n, n) or a batch (B, n, n)."""
        pts, single = as_points(points, self.dim)
        return _out(self.jet(pts, order=0), single)

    # symbolic derived fields ------------------------------------------------
    @functools.cached_property
    def det_expr(self):
        return _det(self.components)

    @functools.cached_property
    def sqrt_det_expr(self):
        return ex.sqrt(self.det_expr)

    @functools.cached_property
    def inverse_exprs(self):
        return _inverse_spd(self.components)

    @functools.cached_property
    def christoffel_exprs(self):
        """``Gamma^k_ij`` as exact trees."""
        n = self.dim
        d = self.d1
        ginv = self.inverse_exprs
        half = ex.const(0.5)
        low = [[[half * (d[i][j][l] + d[j][i][l] - d[l][i][j]) for j in range(n)] for i in range(n)] for l in range(n)]
        gam = []
        for k in range(n):
            rows = []
            for i in range(n):
                row = []
                for j in range(n):
                    if j < i:
                        row.append(rows[j][i])
                        continue
                    acc = ex.ZERO
                    for l in range(n):
                        acc = acc + ginv[k][l] * low[l][i][j]
                    row.append(acc)
                rows.append(row)
            gam.append(tuple(tuple(r) for r in rows))
        return tuple(gam)


def _det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    acc = ex.ZERO
    for j in range(n):
        if m[0][j].kind == "const" and m[0][j].value == 0.0:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor)
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def _inverse_spd(m):
    """Gauss-Jordan inverse without pivoting; valid for SPD matrices."""
    n = len(m)
    a = [list(row) + [ex.ONE if i == j else ex.ZERO for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        piv = a[c][c]
        a[c] = [x / piv for x in a[c]]
        for r in range(n):
            if r == c:
                continue
            f = a[r][c]
            if f.kind == "const" and f.value == 0.0:
                continue
            a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    inv = [row[n:] for row in a]
    # symmetrise by construction so that downstream trees stay symmetric
    return tuple(tuple(inv[min(i, j)][max(i, j)] for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class VectorField:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(ex.as_expr(c) for c in self.components))

    @classmethod
    def parse(cls, strings, dim):
        if len(strings) != dim:
            raise ValueError(f"vector field needs {dim} components")
        return cls(tuple(ex.parse(s, dim) if isinstance(s, str) else s for s in strings))

    @property
    def dim(self):
        return len(self.components)

    def __add__(self, other):
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def evaluate(self, points):
        pts, single = as_points(points, self.dim)
        vals = ex.evaluate_many(self.components, pts).T
        return _out(vals, single)


@dataclass(frozen=True)
class CurvaturePackage:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray


@dataclass(frozen=True)
class ScalarCalculus:
    gradient: np.ndarray
    laplacian: np.ndarray
    hessian: np.ndarray
    differential: np.ndarray


# numeric kernels (batched arrays) ----------------------------------------------


def check_spd(g, points=None):
    eig = np.linalg.eigvalsh(g)
    bad = eig[:, 0] <= SPD_EIG_MIN
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        where = "" if points is None else f" at {tuple(np.round(points[i], 12))}"
        raise SingularMetric(f"metric not positive definite{where} (min eigenvalue {eig[i, 0]:.3e})")


def inverse(g, points=None):
    check_spd(g, points)
    return np.linalg.inv(g)


def christoffel_from_jet(ginv, dg):
    low = 0.5 * (dg.transpose(0, 3, 1, 2) + dg.transpose(0, 3, 2, 1) - dg)
    return np.einsum("bkl,blij->bkij", ginv, low), low


def christoffel_derivative(ginv, dg, ddg, low):
    dlow = 0.5 * (ddg.transpose(0, 1, 4, 2, 3) + ddg.transpose(0, 1, 4, 3, 2) - ddg)
    dginv = -np.einsum("bka,bmac,bcl->bmkl", ginv, dg, ginv)
    return np.einsum("bmkl,blij->bmkij", dginv, low) + np.einsum("bkl,bmlij->bmkij", ginv, dlow)


def riemann_from(gamma, dgamma):
    r = dgamma.transpose(0, 2, 1, 3, 4) - dgamma.transpose(0, 2, 3, 1, 4)
    r = r + np.einsum("blim,bmjk->blijk", gamma, gamma) - np.einsum("bljm,bmik->blijk", gamma, gamma)
    return r


def curvature_batch(g: MetricField, pts):
    gv, dg, ddg = g.jet(pts)
    ginv = inverse(gv, pts)
    gamma, low = christoffel_from_jet(ginv, dg)
    dgamma = christoffel_derivative(ginv, dg, ddg, low)
    riem = riemann_from(gamma, dgamma)
    ric = np.einsum("biijk->bjk", riem)
    s = np.einsum("bjk,bjk->b", ginv, ric)
    return gv, ginv, gamma, riem, ric, s


# public pointwise operations ----------------------------------------------------


def christoffel(g: MetricField, p):
    pts, single = as_points(p, g.dim)
    gv, dg = g.jet(pts, order=1)
    gamma, _ = christoffel_from_jet(inverse(gv, pts), dg)
    return _out(gamma, single)


def curvature(g: MetricField, p) -> CurvaturePackage:
    pts, single = as_points(p, g.dim)
    _, _, gamma, riem, ric, s = curvature_batch(g, pts)
    return CurvaturePackage(_out(gamma, single), _out(riem, single), _out(ric, single), _out(s, single))


def sectional(g: MetricField, p, X, Y):
    """Sectional curvature of the plane spanned by numeric vectors X, Y."""
    pts, single = as_points(p, g.dim)
    X = np.broadcast_to(np.asarray(X, float), pts.shape)
    Y = np.broadcast_to(np.asarray(Y, float), pts.shape)
    gv, _, _, riem, _, _ = curvature_batch(g, pts)
    xx = np.einsum("bi,bij,bj->b", X, gv, X)
    yy = np.einsum("bi,bij,bj->b", Y, gv, Y)
    xy = np.einsum("bi,bij,bj->b", X, gv, Y)
    area = xx * yy - xy * xy
    if np.any(area <= 1e-12):
        raise DegeneratePlane(f"|X^Y|^2 = {area.min():.3e}")
    num = np.einsum("blijk,bi,bj,bk,blm,bm->b", riem, X, Y, Y, gv, X)
    return _out(num / area, single)


@functools.lru_cache(maxsize=512)
def _divergence_exprs(g: MetricField, X: VectorField):
    n = g.dim
    rho = g.sqrt_det_expr
    flux = ex.ZERO
    for i, c in enumerate(X.components):
        flux = flux + ex.differentiate(rho * c, i)
    dX = tuple(tuple(ex.differentiate(c, k) for c in X.components) for k in range(n))
    return flux / rho, dX


def covariant_derivative(gamma, X, dX):
    """``(nabla_k X)^l`` from values X (B,n) and partials dX (B,k,l)."""
    return dX + np.einsum("blkm,bm->bkl", gamma, X)


def divergence_routes(g: MetricField, X: VectorField, p):
    """Divergence by the volume-form formula and by trace of nabla X."""
    pts, single = as_points(p, g.dim)
    n = g.dim
    div_expr, dX_exprs = _divergence_exprs(g, X)
    roots = [div_expr] + list(X.components) + [d for row in dX_exprs for d in row]
    vals = ex.evaluate_many(roots, pts)
    vol = vals[0]
    Xv = vals[1:1 + n].T
    dX = vals[1 + n:].T.reshape(-1, n, n)
    gv, dg = g.jet(pts, order=1)
    gamma, _ = christoffel_from_jet(inverse(gv, pts), dg)
    tr = np.einsum("bkk->b", covariant_derivative(gamma, Xv, dX))
    return _out(vol, single), _out(tr, single)


def divergence(g: MetricField, X: VectorField, p):
    vol, tr = divergence_routes(g, X, p)
    gap = np.abs(np.asarray(vol) - np.asarray(tr))
    if np.any(gap > DIVERGENCE_XCHECK_TOL * (1.0 + np.abs(vol))):
        raise ConsistencyError(f"divergence routes disagree by {gap.max():.3e}")
    return vol


@functools.lru_cache(maxsize=512)
def _scalar_exprs(f: ex.ScalarExpr, n: int):
    df = tuple(ex.differentiate(f, i) for i in range(n))
    ddf = tuple(tuple(ex.differentiate(df[i], j) for j in range(n)) for i in range(n))
    return df, ddf


def scalar_calculus(g: MetricField, f, p) -> ScalarCalculus:
    """Gradient, Laplace-Beltrami and Hessian ``nabla df`` of a scalar."""
    f = ex.parse(f, g.dim) if isinstance(f, str) else ex.as_expr(f)
    pts, single = as_points(p, g.dim)
    n = g.dim
    df, ddf = _scalar_exprs(f, n)
    vals = ex.evaluate_many(list(df) + [d for row in ddf for d in row], pts)
    dfv = vals[:n].T
    ddfv = vals[n:].T.reshape(-1, n, n)
    gv, dg = g.jet(pts, order=1)
    ginv = inverse(gv, pts)
    gamma, _ = christoffel_from_jet(ginv, dg)
    hess = ddfv - np.einsum("bkij,bk->bij", gamma, dfv)
    grad = np.einsum("bij,bj->bi", ginv, dfv)
    lap = np.einsum("bij,bij->b", ginv, hess)
    return ScalarCalculus(_out(grad, single), _out(lap, single), _out(hess, single), _out(dfv, single))


def norm_sq(gv, X):
    return np.einsum("...i,...ij,...j->...", X, gv, X)
