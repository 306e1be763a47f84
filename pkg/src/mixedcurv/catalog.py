"""Scenario registry.  Each scenario is a JSON file in ``scenarios/``:

    {
      "name": "...", "description": "...",
      "chart": {"dim": 2, "bounds": [[lo, hi], ...], "periodic": [true, ...]},
      "metric": [["g00", "g01"], ["g01", "g11"]],
      "metric_bar": [[...]],                      optional second metric on the chart
      "sigma": "...",                             optional conformal exponent
      "distribution": {"role": "vertical", "span": [["X0", "X1"], ...]},
      "map": {"components": [...], "target_chart": {...}, "target_metric": [[...]]},
      "embedding": {"components": [...], "target_metric": [[...]]},
      "fiber_axes": [1],                          coordinate axes of closed vertical fibers
      "expected": [{"quantity": "...", "value" | "field": ..., "tol": 1e-10,
                    "provenance": "DERIVED: ...", ...}]
    }

Bounds may be numbers or constant expressions such as ``"pi - 0.3"``.  When
a map is given without a distribution, the distribution is ``Ker f_*`` and
its orthogonal complement.  ``build`` checks every periodic axis: metric,
spans and sigma must agree at the two ends to 1e-9.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from dataclasses import field as dc_field
from importlib import resources

import numpy as np

from . import expr as ex
from .almost_product import DistributionSpec
from .errors import InvalidConfig, UnknownScenario
from .geometry import Chart, MetricField
from .maps import SmoothMap, kernel_distribution

PERIODICITY_TOL = 1e-9
PROVENANCE_TAGS = ("PAPER", "TRIVIAL", "DERIVED")


@dataclass(frozen=True)
class ExpectedFact:
    quantity: str
    provenance: str
    tol: float
    value: object = None
    field: object = None
    options: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.value is None and self.field is None:
            raise InvalidConfig(f"fact {self.quantity!r} needs a value or a field")
        if not any(self.provenance.startswith(t) for t in PROVENANCE_TAGS):
            raise InvalidConfig(f"fact {self.quantity!r} has provenance {self.provenance!r}")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    description: str
    chart: Chart
    metric: MetricField
    metric_bar: MetricField | None = None
    sigma: ex.ScalarExpr | None = None
    distribution: DistributionSpec | None = None
    map: SmoothMap | None = None
    target_metric: MetricField | None = None
    embedding: SmoothMap | None = None
    embedding_metric: MetricField | None = None
    fiber_axes: tuple | None = None
    expected: tuple = ()
    source: dict = dc_field(default_factory=dict, repr=False)


def _bound(v):
    if isinstance(v, str):
        e = ex.parse(v, 0)
        if not e.is_const:
            raise InvalidConfig(f"bound {v!r} is not constant")
        return float(e.value)
    return float(v)


def _chart(spec, name):
    try:
        bounds = [(_bound(lo), _bound(hi)) for lo, hi in spec["bounds"]]
        periodic = list(spec.get("periodic", [False] * len(bounds)))
        dim = int(spec.get("dim", len(bounds)))
    except (KeyError, TypeError, ValueError) as err:
        raise InvalidConfig(f"{name}: bad chart: {err}") from err
    if dim != len(bounds):
        raise InvalidConfig(f"{name}: chart dim {dim} but {len(bounds)} bounds")
    return Chart(tuple(bounds), tuple(periodic), name)


def _check_periodicity(sc: Scenario, samples=7):
    exprs = [c for row in sc.metric.components for c in row]
    if sc.metric_bar is not None:
        exprs += [c for row in sc.metric_bar.components for c in row]
    if sc.distribution is not None:
        exprs += [c for X in sc.distribution.spans for c in X.components]
    if sc.sigma is not None:
        exprs.append(sc.sigma)
    chart = sc.chart
    rng = np.random.default_rng(0)
    base = chart.random_points(samples, rng)
    for axis, periodic in enumerate(chart.periodic):
        if not periodic:
            continue
        lo_pts, hi_pts = base.copy(), base.copy()
        lo_pts[:, axis] = chart.bounds[axis][0]
        hi_pts[:, axis] = chart.bounds[axis][1]
        gap = np.abs(ex.evaluate_many(exprs, lo_pts) - ex.evaluate_many(exprs, hi_pts)).max()
        if gap > PERIODICITY_TOL:
            raise InvalidConfig(f"{sc.name}: data not periodic along axis {axis} (gap {gap:.3e})")


def from_dict(d: dict) -> Scenario:
    """Build a scenario from its parsed JSON definition."""
    name = d.get("name")
    if not name:
        raise InvalidConfig("scenario without a name")
    chart = _chart(d["chart"], name)
    n = chart.dim
    metric = MetricField(chart, d["metric"])
    metric_bar = MetricField(chart, d["metric_bar"]) if "metric_bar" in d else None
    sigma = ex.parse(d["sigma"], n) if "sigma" in d else None

    fmap = target_metric = None
    if "map" in d:
        m = d["map"]
        tchart = _chart(m["target_chart"], f"{name}:target") if "target_chart" in m else None
        fmap = SmoothMap(chart, m["components"], tchart)
        if "target_metric" in m:
            if tchart is None:
                raise InvalidConfig(f"{name}: target_metric needs a target_chart")
            target_metric = MetricField(tchart, m["target_metric"])

    emb = emb_metric = None
    if "embedding" in d:
        e = d["embedding"]
        k = len(e["components"])
        tchart = Chart(tuple((-1e3, 1e3) for _ in range(k)), (False,) * k, f"{name}:ambient")
        emb = SmoothMap(chart, e["components"], tchart)
        emb_metric = MetricField(tchart, e["target_metric"])

    dist = None
    if "distribution" in d:
        dd = d["distribution"]
        dist = DistributionSpec.parse(dd["span"], n, dd.get("role", "vertical"))
    elif fmap is not None:
        dist = kernel_distribution(fmap, metric)

    fiber_axes = tuple(int(a) for a in d["fiber_axes"]) if "fiber_axes" in d else None
    facts = []
    for raw in d.get("expected", []):
        raw = dict(raw)
        try:
            q = raw.pop("quantity")
            prov = raw.pop("provenance")
            tol = float(raw.pop("tol", 1e-10))
        except KeyError as err:
            raise InvalidConfig(f"{name}: fact missing {err}") from err
        value = raw.pop("value", None)
        fld = raw.pop("field", None)
        facts.append(ExpectedFact(q, prov, tol, value, fld, raw))

    sc = Scenario(
        name=name,
        description=d.get("description", ""),
        chart=chart,
        metric=metric,
        metric_bar=metric_bar,
        sigma=sigma,
        distribution=dist,
        map=fmap,
        target_metric=target_metric,
        embedding=emb,
        embedding_metric=emb_metric,
        fiber_axes=fiber_axes,
        expected=tuple(facts),
        source=d,
    )
    _check_periodicity(sc)
    return sc


def _files():
    root = resources.files("mixedcurv") / "scenarios"
    return {p.name[:-5]: p for p in root.iterdir() if p.name.endswith(".json")}


@functools.lru_cache(maxsize=1)
def _registry():
    reg = {}
    for stem, path in sorted(_files().items()):
        d = json.loads(path.read_text())
        reg[d.get("name", stem)] = d
    return reg


@functools.lru_cache(maxsize=None)
def build(name: str) -> Scenario:
    reg = _registry()
    if name not in reg:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(sorted(reg))}")
    return from_dict(reg[name])


def list_scenarios():
    """``[(name, description), ...]`` sorted by name."""
    return [(k, v.get("description", "")) for k, v in sorted(_registry().items())]


def names():
    return [k for k, _ in list_scenarios()]


def load_file(path) -> Scenario:
    with open(path) as fh:
        return from_dict(json.load(fh))
