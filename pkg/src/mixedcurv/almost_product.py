"""Almost-product structure (V, H, P = V - H) of one distribution and its
complement, with second fundamental forms, integrability tensors, mean
curvature vectors and mixed scalar curvature.

All structure tensors are read off the covariant derivative of the
vertical projector, ``T^l_ij = (nabla_i V)^l_j``.  For X, Y in V the vector
``T(X, Y) = (nabla_X V) Y`` equals ``H nabla_X Y``; for X, Y in H it equals
``-V nabla_X Y``.  Hence

    Q_V = 1/2 (T(X,Y) + T(Y,X)),   F_V = 1/2 (T(X,Y) - T(Y,X))   on V x V,
    Q_H = -1/2 (T(X,Y) + T(Y,X)),  F_H = -1/2 (T(X,Y) - T(Y,X))  on H x H,

and ``nabla P = 2 T``.  The projector is assembled symbolically from a
Gram-Schmidt frame of the spanning fields, so ``xi_V``, ``xi_H`` and their
derivatives are exact expression trees.

Norm convention: ``|Q|^2`` and ``|F|^2`` sum over all ordered pairs of
frame indices; ``|nabla P|^2 = sum_ij |(nabla_{E_i} P) E_j|^2`` over a full
orthonormal frame.
"""
from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import DegenerateDistribution
from .geometry import (
    MetricField,
    VectorField,
    as_points,
    christoffel_derivative,
    christoffel_from_jet,
    covariant_derivative,
    inverse,
    riemann_from,
)

GRAM_DET_MIN = 1e-12


@dataclass(frozen=True)
class DistributionSpec:
    """Spanning fields of one distribution; ``role`` says whether they span
    the vertical or the horizontal member of the pair."""

    spans: tuple
    role: str = "vertical"

    def __post_init__(self):
        spans = tuple(s if isinstance(s, VectorField) else VectorField(tuple(s)) for s in self.spans)
        if not spans:
            raise ValueError("a distribution needs at least one spanning field")
        dims = {s.dim for s in spans}
        if len(dims) != 1:
            raise ValueError("spanning fields have different dimensions")
        if self.role not in ("vertical", "horizontal"):
            raise ValueError(f"role must be 'vertical' or 'horizontal', not {self.role!r}")
        if len(spans) >= dims.pop():
            raise ValueError("rank must be smaller than the dimension")
        object.__setattr__(self, "spans", spans)

    @classmethod
    def parse(cls, spans, dim, role="vertical"):
        return cls(tuple(VectorField.parse(s, dim) for s in spans), role)

    @property
    def rank(self):
        return len(self.spans)

    @property
    def dim(self):
        return self.spans[0].dim

    def swapped(self):
        """Same spans, opposite role: exchanges V and H."""
        return DistributionSpec(self.spans, "horizontal" if self.role == "vertical" else "vertical")


@dataclass(frozen=True)
class AdaptedFrame:
    vertical: np.ndarray  # (..., n, p) columns E_1..E_p
    horizontal: np.ndarray  # (..., n, q)


@dataclass(frozen=True)
class StructurePackage:
    points: np.ndarray
    metric: np.ndarray
    V: np.ndarray
    H: np.ndarray
    P: np.ndarray
    frame_V: np.ndarray
    frame_H: np.ndarray
    Q_V: np.ndarray  # (..., p, p, n): Q_V(E_a, E_b) as coordinate vectors
    F_V: np.ndarray
    Q_H: np.ndarray  # (..., q, q, n)
    F_H: np.ndarray
    xi_V: np.ndarray
    xi_H: np.ndarray
    s_mix: np.ndarray
    Q_V_norm_sq: np.ndarray
    Q_H_norm_sq: np.ndarray
    F_V_norm_sq: np.ndarray
    F_H_norm_sq: np.ndarray
    xi_V_norm_sq: np.ndarray
    xi_H_norm_sq: np.ndarray
    nabla_P_norm_sq: np.ndarray
    umbilicity_V: np.ndarray
    umbilicity_H: np.ndarray
    div_V_xi_H: np.ndarray
    div_H_xi_V: np.ndarray
    div_xi: np.ndarray  # div(xi_V + xi_H), trace of nabla
    div_xi_V: np.ndarray
    div_xi_H: np.ndarray
    nabla_xi_V_norm: np.ndarray
    nabla_xi_H_norm: np.ndarray
    ricci_vertical: np.ndarray  # Ric(E_1, E_1) when rank V == 1, else nan
    rank_V: int
    rank_H: int

    @property
    def fiber_integrand(self):
        return 2.0 * self.s_mix + 0.25 * self.nabla_P_norm_sq


def _gdot(g, u, w):
    n = len(u)
    acc = ex.ZERO
    for i in range(n):
        if u[i].kind == "const" and u[i].value == 0.0:
            continue
        for j in range(n):
            acc = acc + g[i][j] * u[i] * w[j]
    return acc


def gram_schmidt_exprs(g, fields):
    """Orthonormalise spanning fields in the given order, symbolically."""
    frame = []
    for X in fields:
        v = list(X.components)
        for E in frame:
            c = _gdot(g, X.components, E)
            v = [vi - c * ei for vi, ei in zip(v, E)]
        norm = ex.sqrt(_gdot(g, v, v))
        frame.append(tuple(vi / norm for vi in v))
    return tuple(frame)


class AlmostProduct:
    """Symbolic structure fields for a metric and one distribution."""

    def __init__(self, g: MetricField, D: DistributionSpec):
        if D.dim != g.dim:
            raise ValueError("distribution and metric dimensions differ")
        self.g = g
        self.D = D
        n = g.dim
        self.n = n
        self.rank_V = D.rank if D.role == "vertical" else n - D.rank
        self.rank_H = n - self.rank_V
        self._program = None

    @functools.cached_property
    def frame_exprs(self):
        return gram_schmidt_exprs(self.g.components, self.D.spans)

    @functools.cached_property
    def projector_exprs(self):
        """Vertical projector ``V^i_j`` as trees."""
        n = self.n
        g = self.g.components
        frame = self.frame_exprs
        lowered = [tuple(sum((g[j][k] * E[k] for k in range(n)), ex.ZERO) for j in range(n)) for E in frame]
        proj = [[sum((E[i] * L[j] for E, L in zip(frame, lowered)), ex.ZERO) for j in range(n)] for i in range(n)]
        if self.D.role == "horizontal":
            proj = [[(ex.ONE if i == j else ex.ZERO) - proj[i][j] for j in range(n)] for i in range(n)]
        return tuple(tuple(r) for r in proj)

    @functools.cached_property
    def nabla_V_exprs(self):
        """``T[l][i][j] = (nabla_i V)^l_j``."""
        n = self.n
        V = self.projector_exprs
        gam = self.g.christoffel_exprs
        T = []
        for l in range(n):
            rows = []
            for i in range(n):
                row = []
                for j in range(n):
                    acc = ex.differentiate(V[l][j], i)
                    for m in range(n):
                        acc = acc + gam[l][i][m] * V[m][j] - gam[m][i][j] * V[l][m]
                    row.append(acc)
                rows.append(tuple(row))
            T.append(tuple(rows))
        return tuple(T)

    @functools.cached_property
    def mean_curvature_exprs(self):
        """(xi_V, xi_H) as coordinate-component trees."""
        n = self.n
        V = self.projector_exprs
        ginv = self.g.inverse_exprs
        T = self.nabla_V_exprs
        WV = [[sum((V[i][m] * ginv[m][j] for m in range(n)), ex.ZERO) for j in range(n)] for i in range(n)]
        WH = [[ginv[i][j] - WV[i][j] for j in range(n)] for i in range(n)]
        xiV, xiH = [], []
        for l in range(n):
            a = ex.ZERO
            b = ex.ZERO
            for i in range(n):
                for j in range(n):
                    a = a + T[l][i][j] * WV[i][j]
                    b = b + T[l][i][j] * WH[i][j]
            xiV.append(a)
            xiH.append(-b)
        return VectorField(tuple(xiV)), VectorField(tuple(xiH))

    @property
    def xi_V(self) -> VectorField:
        return self.mean_curvature_exprs[0]

    @property
    def xi_H(self) -> VectorField:
        return self.mean_curvature_exprs[1]

    @property
    def xi_sum(self) -> VectorField:
        return self.xi_V + self.xi_H

    def _roots(self):
        n = self.n
        xiV, xiH = self.mean_curvature_exprs
        roots = []
        layout = {}

        def put(name, items):
            layout[name] = (len(roots), len(items))
            roots.extend(items)

        put("spans", [c for X in self.D.spans for c in X.components])
        put("frame", [c for E in self.frame_exprs for c in E])
        put("V", [self.projector_exprs[i][j] for i in range(n) for j in range(n)])
        put("T", [self.nabla_V_exprs[l][i][j] for l in range(n) for i in range(n) for j in range(n)])
        put("xiV", list(xiV.components))
        put("xiH", list(xiH.components))
        put("dxiV", [ex.differentiate(c, k) for k in range(n) for c in xiV.components])
        put("dxiH", [ex.differentiate(c, k) for k in range(n) for c in xiH.components])
        return roots, layout

    def _eval_fields(self, pts):
        if self._program is None:
            roots, layout = self._roots()
            self._program = (ex.compile_exprs(roots), layout)
        prog, layout = self._program
        vals = prog(pts)
        B, n = pts.shape[0], self.n

        def get(name, shape):
            s, k = layout[name]
            return vals[s:s + k].T.reshape((B,) + shape)

        pD = self.D.rank
        return {
            "spans": get("spans", (pD, n)).transpose(0, 2, 1),
            "frame": get("frame", (pD, n)).transpose(0, 2, 1),
            "V": get("V", (n, n)),
            "T": get("T", (n, n, n)),
            "xiV": get("xiV", (n,)),
            "xiH": get("xiH", (n,)),
            "dxiV": get("dxiV", (n, n)),
            "dxiH": get("dxiH", (n, n)),
        }

    def evaluate(self, points, frames=None) -> StructurePackage:
        """Structure tensors at a batch of points.

        ``frames`` optionally overrides the adapted frame with arrays
        ``(E_V (B,n,p), E_H (B,n,q))``; they must be orthonormal and adapted.
        """
        pts = np.asarray(points, dtype=float)
        n, p, q = self.n, self.rank_V, self.rank_H
        gv, dg, ddg = self.g.jet(pts)
        ginv = inverse(gv, pts)
        # the symbolic frame divides by Gram minors, so check the spans first
        X = ex.evaluate_many([c for s in self.D.spans for c in s.components], pts).T.reshape(-1, self.D.rank, n)
        X = X.transpose(0, 2, 1)
        gram = np.einsum("bia,bij,bjc->bac", X, gv, X)
        gdet = np.linalg.det(gram)
        if np.any(gdet <= GRAM_DET_MIN):
            i = int(np.argmin(gdet))
            raise DegenerateDistribution(f"Gram determinant {gdet[i]:.3e} at {tuple(pts[i])}")
        f = self._eval_fields(pts)
        gamma, low = christoffel_from_jet(ginv, dg)
        riem = riemann_from(gamma, christoffel_derivative(ginv, dg, ddg, low))

        V = f["V"]
        Id = np.eye(n)
        H = Id - V
        if frames is None:
            own = f["frame"]
            other = complement_frame(H if self.D.role == "vertical" else V, gv, n - self.D.rank)
            EV, EH = (own, other) if self.D.role == "vertical" else (other, own)
        else:
            EV, EH = (np.asarray(a, float) for a in frames)

        T = f["T"]
        TVV = np.einsum("blij,bia,bjc->bacl", T, EV, EV)
        THH = np.einsum("blij,bia,bjc->bacl", T, EH, EH)
        QV = 0.5 * (TVV + TVV.transpose(0, 2, 1, 3))
        FV = 0.5 * (TVV - TVV.transpose(0, 2, 1, 3))
        QH = -0.5 * (THH + THH.transpose(0, 2, 1, 3))
        FH = -0.5 * (THH - THH.transpose(0, 2, 1, 3))

        def nsq(v):
            v = v.reshape(v.shape[0], -1, n)
            return np.einsum("bxi,bij,bxj->b", v, gv, v)

        xiV, xiH = f["xiV"], f["xiH"]
        E = np.concatenate([EV, EH], axis=2)
        TEE = np.einsum("blij,bia,bjc->bacl", T, E, E)
        nablaP = 4.0 * nsq(TEE)

        rlow = np.einsum("bml,blijk->bmijk", gv, riem)
        smix = np.einsum("bmijk,bma,bia,bjc,bkc->b", rlow, EV, EV, EH, EH)

        umbV = np.sqrt(nsq(QV - np.eye(p)[None, :, :, None] * xiV[:, None, None, :] / p))
        umbH = np.sqrt(nsq(QH - np.eye(q)[None, :, :, None] * xiH[:, None, None, :] / q))

        MV = covariant_derivative(gamma, xiV, f["dxiV"])
        MH = covariant_derivative(gamma, xiH, f["dxiH"])
        div_V_xiH = np.einsum("bkl,bkl->b", MH, V)
        div_H_xiV = np.einsum("bkl,bkl->b", MV, H)
        div_xi_V = np.einsum("bkk->b", MV)
        div_xi_H = np.einsum("bkk->b", MH)

        def tensor_norm(M):
            return np.sqrt(np.abs(np.einsum("bkl,bkm,bln,bmn->b", M, ginv, gv, M)))

        if p == 1:
            ric = np.einsum("biijk->bjk", riem)
            ricV = np.einsum("bjk,bj,bk->b", ric, EV[:, :, 0], EV[:, :, 0])
        else:
            ricV = np.full(pts.shape[0], np.nan)

        return StructurePackage(
            points=pts,
            metric=gv,
            V=V,
            H=H,
            P=V - H,
            frame_V=EV,
            frame_H=EH,
            Q_V=QV,
            F_V=FV,
            Q_H=QH,
            F_H=FH,
            xi_V=xiV,
            xi_H=xiH,
            s_mix=smix,
            Q_V_norm_sq=nsq(QV),
            Q_H_norm_sq=nsq(QH),
            F_V_norm_sq=nsq(FV),
            F_H_norm_sq=nsq(FH),
            xi_V_norm_sq=nsq(xiV),
            xi_H_norm_sq=nsq(xiH),
            nabla_P_norm_sq=nablaP,
            umbilicity_V=umbV,
            umbilicity_H=umbH,
            div_V_xi_H=div_V_xiH,
            div_H_xi_V=div_H_xiV,
            div_xi=div_xi_V + div_xi_H,
            div_xi_V=div_xi_V,
            div_xi_H=div_xi_H,
            nabla_xi_V_norm=tensor_norm(MV),
            nabla_xi_H_norm=tensor_norm(MH),
            ricci_vertical=ricV,
            rank_V=p,
            rank_H=q,
        )


def complement_frame(C, gv, k):
    """Orthonormal frame of the range of projector ``C``: Gram-Schmidt over
    the columns ``C e_i``, always taking the longest remaining column."""
    cand = np.array(C, dtype=float, copy=True)
    B, n, _ = cand.shape
    frame = np.zeros((B, n, k))
    rows = np.arange(B)
    for r in range(k):
        norms = np.einsum("bix,bij,bjx->bx", cand, gv, cand)
        idx = np.argmax(norms, axis=1)
        v = cand[rows, :, idx] / np.sqrt(norms[rows, idx])[:, None]
        frame[:, :, r] = v
        cand = cand - v[:, :, None] * np.einsum("bi,bij,bjx->bx", v, gv, cand)[:, None, :]
    return frame


@functools.lru_cache(maxsize=128)
def structure(g: MetricField, D: DistributionSpec) -> AlmostProduct:
    return AlmostProduct(g, D)


def _squeeze(pkg: StructurePackage) -> StructurePackage:
    updates = {
        f.name: getattr(pkg, f.name)[0]
        for f in dataclasses.fields(pkg)
        if isinstance(getattr(pkg, f.name), np.ndarray)
    }
    return dataclasses.replace(pkg, **updates)


def structure_tensors(g: MetricField, D: DistributionSpec, p) -> StructurePackage:
    pts, single = as_points(p, g.dim)
    pkg = structure(g, D).evaluate(pts)
    return _squeeze(pkg) if single else pkg


def projectors(g: MetricField, D: DistributionSpec, p):
    pkg = structure_tensors(g, D, p)
    return pkg.V, pkg.H, pkg.P


def adapted_frame(g: MetricField, D: DistributionSpec, p) -> AdaptedFrame:
    pkg = structure_tensors(g, D, p)
    return AdaptedFrame(pkg.frame_V, pkg.frame_H)


def nabla_P_norm_sq(g: MetricField, D: DistributionSpec, p):
    return structure_tensors(g, D, p).nabla_P_norm_sq


def partial_divergence(g: MetricField, D: DistributionSpec, p):
    """``(div_V xi_H, div_H xi_V)``."""
    pkg = structure_tensors(g, D, p)
    return pkg.div_V_xi_H, pkg.div_H_xi_V


STRUCTURE_FIELDS = frozenset(
    f.name for f in dataclasses.fields(StructurePackage) if f.name not in ("points", "rank_V", "rank_H")
) | {"fiber_integrand"}
