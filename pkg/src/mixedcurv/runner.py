"""Batch evaluation of catalog scenarios into a residual/verdict report.

A scenario is swept over its tensor grid plus seeded random interior
points.  Every identity that applies to it is evaluated with gates masked,
every expected fact from its file is checked, and the hypothesis report and
classifier flags are attached.  Failures inside one scenario are recorded
in its block and never stop the batch.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import catalog
from . import expr as ex
from . import identities as idn
from .almost_product import STRUCTURE_FIELDS, structure
from .errors import InvalidConfig
from .geometry import curvature_batch, scalar_calculus, sectional
from .maps import FLAG_NAMES, classify_batch, conformal_factor, jacobian_kernel, projective_psi, pullback_metric
from .quadrature import GridSpec, green_check, integrate

SCHEMA_VERSION = "1.0"
# integral checks need resolved quadrature even when the pointwise sweep is coarse
QUAD_MIN_NODES = 33


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple = ()  # empty means every registered scenario
    grid: int = 33
    tol: float = 1e-8
    gate_tol: float = 1e-8
    points: int = 100
    seed: int = 42
    json_path: str | None = None
    sign_variant: str | None = None  # None: use the resolver's choice
    output_format: str = "human"

    def validate(self):
        if self.grid < 2:
            raise InvalidConfig("grid must have at least 2 nodes per axis")
        if not (self.tol > 0 and self.gate_tol > 0):
            raise InvalidConfig("tolerances must be positive")
        if self.points < 0:
            raise InvalidConfig("points must be non-negative")
        if self.sign_variant not in (None, "minus", "plus"):
            raise InvalidConfig("sign_variant must be 'minus' or 'plus'")
        if self.output_format not in ("human", "json"):
            raise InvalidConfig("output_format must be 'human' or 'json'")
        known = set(catalog.names())
        for name in self.scenarios:
            if name not in known:
                raise catalog.UnknownScenario(f"unknown scenario {name!r}")
        return self


def _clean(x):
    """JSON-safe copy: numpy to python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _const(v):
    if isinstance(v, str):
        e = ex.parse(v, 0)
        return float(e.value)
    return float(v)


def _at(fact):
    at = fact.options.get("at")
    if at is None:
        return None
    arr = np.array([_const(c) for c in at], dtype=float) if not isinstance(at[0], list) else np.array(
        [[_const(c) for c in row] for row in at], dtype=float
    )
    return np.atleast_2d(arr)


def _expected(fact, pts, dim):
    if fact.field is not None:
        fld = fact.field
        if isinstance(fld, str):
            return ex.evaluate_many([ex.parse(fld, dim)], pts)[0]
        flat = np.array(fld, dtype=object).ravel()
        vals = ex.evaluate_many([ex.parse(s, dim) for s in flat], pts).T
        return vals.reshape((pts.shape[0],) + np.shape(np.array(fld, dtype=object)))
    return np.asarray(fact.value, dtype=float)


def _compare(observed, expected, tol, mode="eq"):
    obs = np.asarray(observed, dtype=float)
    exp = np.broadcast_to(np.asarray(expected, dtype=float), obs.shape) if obs.size else np.asarray(expected)
    if mode == "eq":
        err = float(np.abs(obs - exp).max()) if obs.size else float("nan")
        return err, err <= tol
    if mode == "ge":
        err = float(np.maximum(exp - obs, 0.0).max())
        return err, err <= tol
    if mode == "le":
        err = float(np.maximum(obs - exp, 0.0).max())
        return err, err <= tol
    if mode == "gt":
        margin = float((obs - exp).min())
        return margin, margin > 0
    raise InvalidConfig(f"unknown comparison {mode!r}")


def _summary(obs):
    a = np.asarray(obs, dtype=float)
    if a.size <= 9:
        return a.tolist()
    return {"min": float(a.min()), "max": float(a.max()), "n": int(a.size)}


class ScenarioRun:
    """Evaluation state of one scenario under one configuration."""

    def __init__(self, sc: catalog.Scenario, cfg: RunConfig, conv: idn.Conventions):
        self.sc = sc
        self.cfg = cfg
        self.conv = conv
        chart = sc.chart
        rng = np.random.default_rng(cfg.seed)
        grid = chart.sweep_points(cfg.grid)
        rand = chart.random_points(cfg.points, rng) if cfg.points else np.zeros((0, chart.dim))
        self.points = np.vstack([grid, rand])
        self.quad = GridSpec.uniform(chart.dim, max(cfg.grid, QUAD_MIN_NODES))
        self._pkg = None
        self._residuals = None
        self._hyp = None
        self._classes = None
        self._fiber = None

    # lazily computed pieces ------------------------------------------------------

    @property
    def pkg(self):
        if self._pkg is None:
            self._pkg = structure(self.sc.metric, self.sc.distribution).evaluate(self.points)
        return self._pkg

    @property
    def residuals(self):
        if self._residuals is None:
            sc, out = self.sc, {}
            if sc.distribution is not None:
                out.update(idn.residuals_from_package(self.pkg, self.conv, self.cfg.gate_tol))
                if sc.fiber_axes:
                    out["fiber_integral"] = self.fiber_residual
            if sc.metric_bar is not None:
                for which in ("ricci", "laplacian"):
                    r = idn.projective_residual(sc.metric, sc.metric_bar, self.points, which, self.conv)
                    out[r.identity] = r
            if sc.sigma is not None:
                for which in ("scalar", "laplacian"):
                    r = idn.conformal_residual(sc.metric, sc.sigma, self.points, which)
                    out[r.identity] = r
            self._residuals = out
        return self._residuals

    @property
    def fiber(self):
        if self._fiber is None:
            self._fiber = idn.fiber_integrals(
                self.sc.metric, self.sc.distribution, self.sc.fiber_axes, self.quad.N[0], gate_tol=self.cfg.gate_tol
            )
        return self._fiber

    @property
    def fiber_residual(self):
        fi = self.fiber
        zero = np.zeros_like(fi.integral)
        return idn.IdentityResidual("fiber_integral", fi.base_points, fi.integral, zero, fi.integral, None, "minimal_fibers", fi.gate_ok)

    @property
    def hypothesis(self):
        if self._hyp is None:
            l1 = idn.l1_norms(self.sc.metric, self.sc.distribution, self.quad)
            self._hyp = idn.hypothesis_report(self.pkg, l1, self.cfg.gate_tol)
        return self._hyp

    @property
    def classes(self):
        if self._classes is None:
            sc = self.sc
            self._classes = classify_batch(sc.map, sc.metric, sc.target_metric, self.points, sc.distribution)
        return self._classes

    def _metric(self, which):
        sc = self.sc
        if which in (None, "g"):
            return sc.metric
        if which == "bar":
            return sc.metric_bar
        if which == "conformal":
            return idn.conformal_metric(sc.metric, sc.sigma)
        raise InvalidConfig(f"unknown metric selector {which!r}")

    # facts -------------------------------------------------------------------------

    def check(self, fact):
        q = fact.quantity
        mode = fact.options.get("compare", "eq")
        at = _at(fact)
        pts = self.points if at is None else at
        sc, n = self.sc, self.sc.chart.dim

        if q.startswith("raises:"):
            return self._check_raises(q.split(":", 1)[1], fact.value, pts)
        if q.startswith("verdict:"):
            got = self.hypothesis.verdicts[q.split(":", 1)[1]]
            return got, 0.0 if got == fact.value else 1.0, got == fact.value
        if q.startswith("gate:"):
            ident = q.split(":", 1)[1]
            pkg = structure(sc.metric, sc.distribution).evaluate(pts)
            got = bool(np.all(idn.residuals_from_package(pkg, self.conv, self.cfg.gate_tol)[ident].gate_ok))
            return got, 0.0 if got == fact.value else 1.0, got == fact.value
        if q.startswith("classify:"):
            flag = q.split(":", 1)[1]
            got = bool(self.classes[flag].max() <= self.cfg.gate_tol)
            return got, float(self.classes[flag].max()), got == fact.value
        if q.startswith("identity:"):
            r = self.residuals[q.split(":", 1)[1]]
            if not np.any(r.passing()):
                return None, float("nan"), False
            err = r.max_abs()
            return err, err, err <= fact.tol

        if q.startswith("classify_residual:"):
            obs = self.classes[q.split(":", 1)[1]]
        elif q == "classify_factor":
            obs = self.classes["conformal_factor"]
        elif q in STRUCTURE_FIELDS:
            pkg = self.pkg if at is None else structure(sc.metric, sc.distribution).evaluate(pts)
            obs = getattr(pkg, q)
        elif q == "kernel":
            obs = np.stack([jacobian_kernel(sc.map, p)[1] for p in pts])
        elif q == "sectional":
            metric = self._metric(fact.options.get("metric"))
            obs = sectional(metric, pts, fact.options["X"], fact.options["Y"])
        elif q == "sectional_random":
            metric = self._metric(fact.options.get("metric"))
            k = int(fact.options.get("count", 100))
            rng = np.random.default_rng(self.cfg.seed)
            p = sc.chart.random_points(k, rng)
            obs = sectional(metric, p, rng.normal(size=(k, n)), rng.normal(size=(k, n)))
        elif q == "scalar_curvature":
            obs = curvature_batch(self._metric(fact.options.get("metric")), pts)[-1]
        elif q == "conformal_scalar_curvature":
            obs = idn.conformal_scalar_curvature(sc.metric, sc.sigma, pts)
        elif q == "laplacian_sigma":
            obs = scalar_calculus(sc.metric, sc.sigma, pts).laplacian
        elif q == "conformal_factor":
            obs = conformal_factor(sc.metric, idn.conformal_metric(sc.metric, sc.sigma), pts)[0]
        elif q == "conformal_factor_residual":
            obs = conformal_factor(sc.metric, sc.metric_bar, pts)[1]
        elif q == "psi":
            obs = ex.evaluate_many([projective_psi(sc.metric, sc.metric_bar)], pts)[0]
        elif q == "det_metric":
            obs = np.linalg.det(sc.metric.values(pts))
        elif q == "pullback_metric":
            pb = pullback_metric(sc.embedding, sc.embedding_metric)
            obs = np.abs(pb.values(pts) - sc.metric.values(pts)).max(axis=(1, 2))
        elif q == "volume":
            obs = integrate(sc.metric, 1.0, self.quad)
        elif q.startswith("l1:"):
            which = q.split(":", 1)[1]
            if "N" in fact.options:
                # kinked integrands converge slowly, so such facts pin their own grid
                obs = idn.l1_norms(self.sc.metric, self.sc.distribution, int(fact.options["N"]))[which]
            else:
                obs = self.hypothesis.stats[f"l1_{which}"]
        elif q.startswith("green:"):
            X = getattr(structure(sc.metric, sc.distribution), q.split(":", 1)[1])
            obs = green_check(sc.metric, X, self.quad)
        elif q == "fiber_green":
            obs = self.fiber.green
        else:
            raise InvalidConfig(f"unknown quantity {q!r}")
        exp = _expected(fact, pts, n)
        err, ok = _compare(obs, exp, fact.tol, mode)
        return _summary(obs), err, ok

    def _check_raises(self, ident, expected, pts):
        sc, tol = self.sc, self.cfg.gate_tol
        g, D = sc.metric, sc.distribution
        calls = {
            "umbilical": lambda: idn.umbilical_residual(g, D, pts, tol, conventions=self.conv),
            "codim1": lambda: idn.codim1_residual(g, D, pts, tol),
            "integrable": lambda: idn.mixed_P_residual(g, D, pts, "integrable", tol, conventions=self.conv),
            "minimal": lambda: idn.mixed_P_residual(g, D, pts, "minimal", tol, conventions=self.conv),
            "horizontal_conformal": lambda: idn.horizontal_conformal_residual(g, D, pts, tol, conventions=self.conv),
            "fiber_integral": lambda: idn.fiber_residual(g, D, sc.fiber_axes, self.quad.N[0], gate_tol=tol),
        }
        try:
            calls[ident]()
        except Exception as err:  # the fact is about which error is raised
            names = [c.__name__ for c in type(err).__mro__]
            got = type(err).__name__
            return got, 0.0 if expected in names else 1.0, expected in names
        return None, 1.0, False

    # report --------------------------------------------------------------------------

    def identity_block(self):
        out = {}
        for ident in sorted(self.residuals):
            r = self.residuals[ident]
            passing = r.passing()
            frac = float(np.mean(passing)) if np.size(passing) else 0.0
            m = r.max_abs()
            out[ident] = {
                "max_abs": m,
                "mean_abs": r.mean_abs(),
                "worst_point": r.worst_point(),
                "variant": r.variant,
                "gate": r.gate,
                "gate_pass_fraction": frac,
                "n_points": int(np.size(passing)),
                "passed": bool(frac == 0.0 or m <= self.cfg.tol),
            }
        return out

    def run(self):
        t0 = time.perf_counter()
        block = {"description": self.sc.description, "n_points": int(self.points.shape[0]), "errors": []}
        ok = True
        try:
            block["identities"] = self.identity_block()
            ok &= all(v["passed"] for v in block["identities"].values())
        except Exception as err:
            block["errors"].append(f"identities: {type(err).__name__}: {err}")
            ok = False
        if self.sc.distribution is not None:
            try:
                block["consistency_web"] = idn.consistency_web(self.residuals)
                block["hypothesis"] = self.hypothesis.as_dict()
            except Exception as err:
                block["errors"].append(f"hypothesis: {type(err).__name__}: {err}")
                ok = False
        if self.sc.map is not None and self.sc.target_metric is not None:
            try:
                block["classification"] = {
                    "flags": {f: bool(self.classes[f].max() <= self.cfg.gate_tol) for f in FLAG_NAMES},
                    "max_residual": {f: float(self.classes[f].max()) for f in FLAG_NAMES},
                    "conformal_factor_range": [float(self.classes["conformal_factor"].min()), float(self.classes["conformal_factor"].max())],
                }
            except Exception as err:
                block["errors"].append(f"classification: {type(err).__name__}: {err}")
                ok = False
        facts = []
        for fact in self.sc.expected:
            entry = {"quantity": fact.quantity, "provenance": fact.provenance, "tol": fact.tol}
            if fact.options.get("at") is not None:
                entry["at"] = fact.options["at"]
            try:
                observed, err, passed = self.check(fact)
                entry.update(observed=observed, error=err, passed=bool(passed))
            except Exception as exc:
                entry.update(observed=None, error=None, passed=False, exception=f"{type(exc).__name__}: {exc}")
            ok &= entry["passed"]
            facts.append(entry)
        block["facts"] = facts
        block["passed"] = bool(ok)
        block["runtime_s"] = time.perf_counter() - t0
        return block


def run(cfg: RunConfig) -> dict:
    """Evaluate the configured scenarios; the report's ``passed`` field is
    the exit-status contract."""
    cfg.validate()
    t0 = time.perf_counter()
    conv = idn.resolved_conventions()
    if cfg.sign_variant is not None:
        conv = conv.with_sign(cfg.sign_variant)
    names = sorted(cfg.scenarios) if cfg.scenarios else catalog.names()
    blocks = {}
    for name in names:
        try:
            blocks[name] = ScenarioRun(catalog.build(name), cfg, conv).run()
        except Exception as err:
            blocks[name] = {"errors": [f"{type(err).__name__}: {err}"], "passed": False}
    conventions = conv.as_dict()
    conventions["forced"] = cfg.sign_variant is not None
    conventions["matches_resolver"] = conv.xi_H_sign == idn.resolved_conventions().xi_H_sign
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("json_path",)},
        "conventions": conventions,
        "scenarios": blocks,
        "passed": all(b["passed"] for b in blocks.values()),
        "runtime_s": time.perf_counter() - t0,
    }
    return _clean(report)
