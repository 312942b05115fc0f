"""Scenario files: JSON description of a cover, its potentials and probe curves.

A scenario names the ambient dimension, a working region, the exceptional set
``A``, one entry per chart (outer box ``U``, inner box ``U'``, potential and
routing), the probe curves and the numeric settings.  Files are validated
against :data:`SCHEMA` (unknown keys are rejected) and then checked for
consistency between the parts.  :func:`dump_scenario` writes a canonical form,
so ``dump(load(dump(s))) == dump(s)`` byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .box import Box
from .errors import ConfigError, ParseError, ValidationError
from .jets import FieldExpr, euclidean, expr_from_dict
from .levi import CurveSpec, Ray, Spiral, curve_from_dict
from .psh import DomainSpec, exceptional_from_dict

__all__ = [
    "SCHEMA_VERSION", "SCHEMA", "ChartSpec", "Tolerances", "Sampling", "Settings",
    "Scenario", "load_scenario", "loads_scenario", "dump_scenario", "scenario_from_dict",
    "bundled_scenario", "BUNDLED",
]

SCHEMA_VERSION = 1
ROUTES = ("auto", "bounded", "unbounded")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_box = {"type": "array", "items": _interval, "minItems": 2}
_cpt = {"type": "array", "items": _interval, "minItems": 1}   # one [re, im] per coordinate
_expr = {"type": "object", "required": ["node"]}


def _obj(props, required=None):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(props) if required is None else required}


_curve = {
    "oneOf": [
        _obj({"kind": {"const": "segment"}, "label": {"type": "string"},
              "target": {"enum": ["A", "infinity"]}, "start": _cpt, "end": _cpt},
             ["kind", "start", "end"]),
        _obj({"kind": {"const": "spiral"}, "label": {"type": "string"},
              "target": {"enum": ["A", "infinity"]}, "center": _cpt, "radius": _pos,
              "theta0": _num, "omega": _num, "axis": {"type": "integer", "minimum": 0}},
             ["kind", "center", "radius"]),
        _obj({"kind": {"const": "ray"}, "label": {"type": "string"},
              "target": {"enum": ["A", "infinity"]}, "start": _cpt, "direction": _cpt},
             ["kind", "start", "direction"]),
    ]
}

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "name": {"type": "string", "minLength": 1},
    "n": {"type": "integer", "minimum": 1},
    "region": _box,
    "exceptional": {"type": "object", "required": ["kind"]},
    "exhaustion": {"oneOf": [{"type": "null"}, _expr]},
    "charts": {"type": "array", "minItems": 1, "items": _obj({
        "label": {"type": "string"},
        "box": _box,
        "inner": _box,
        "potential": _expr,
        "routing": {"enum": list(ROUTES)},
        "bounds": {"oneOf": [{"type": "null"}, _interval]},
        "K": {"oneOf": [{"type": "null"}, _pos]},
    }, ["box", "inner", "potential"])},
    "probes": {"type": "array", "items": _curve},
    "tolerances": _obj({
        "psh_rel": _pos, "estimate_rel": _pos, "domination_rel": _pos,
        "rho_min": _pos, "delta": _pos, "divergence_tol": _pos,
        "max_skipped_fraction": {"type": "number", "minimum": 0, "maximum": 1},
    }, []),
    "sampling": _obj({
        "seed": {"type": "integer", "minimum": 0},
        "chart_samples": {"type": "integer", "minimum": 1},
        "shell_samples": {"type": "integer", "minimum": 1},
        "scan_samples": {"type": "integer", "minimum": 1},
        "near_A_fraction": {"type": "number", "minimum": 0, "maximum": 1},
    }, []),
    "settings": _obj({
        "bound_margin": {"type": "number", "minimum": 0},
        "shell_safety": {"type": "number", "minimum": 1},
        "reparam_radius": _pos,
        "reparam_floor": {"type": "number", "minimum": 0},
        "reduction_T": {"type": "number", "exclusiveMinimum": 4},
        "reduction_grid_step": _pos,
        "decades": {"type": "integer", "minimum": 6, "maximum": 150},
    }, []),
}, ["schema_version", "name", "n", "region", "charts"])


# --------------------------------------------------------------------------
# typed view


@dataclass(frozen=True)
class Tolerances:
    psh_rel: float = 1e-8
    estimate_rel: float = 1e-9
    domination_rel: float = 1e-8
    rho_min: float = 1e-8
    delta: float = 1e-6
    divergence_tol: float = 1e-6
    max_skipped_fraction: float = 0.01


@dataclass(frozen=True)
class Sampling:
    seed: int = 0
    chart_samples: int = 10_000
    shell_samples: int = 1_000
    scan_samples: int = 2_000
    near_A_fraction: float = 0.1


@dataclass(frozen=True)
class Settings:
    bound_margin: float = 0.05
    shell_safety: float = 1.5
    reparam_radius: float = 0.1
    reparam_floor: float = 1.0
    reduction_T: float = 1000.0
    reduction_grid_step: float = 0.01
    decades: int = 120


@dataclass(frozen=True, eq=False)
class ChartSpec:
    label: str
    box: Box
    inner: Box
    potential: FieldExpr
    routing: str = "auto"
    bounds: tuple[float, float] | None = None
    K: float | None = None

    def to_dict(self):
        return {"label": self.label, "box": self.box.to_list(), "inner": self.inner.to_list(),
                "potential": self.potential.to_dict(), "routing": self.routing,
                "bounds": None if self.bounds is None else [float(b) for b in self.bounds],
                "K": None if self.K is None else float(self.K)}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    n: int
    region: Box
    exceptional: object
    charts: tuple[ChartSpec, ...]
    probes: tuple[CurveSpec, ...] = ()
    exhaustion: FieldExpr | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    sampling: Sampling = field(default_factory=Sampling)
    settings: Settings = field(default_factory=Settings)

    @property
    def psi(self) -> FieldExpr:
        """Exhaustion, ``|z|^2`` unless the scenario overrides it."""
        return euclidean(self.n) if self.exhaustion is None else self.exhaustion

    def chart_domain(self, i: int) -> DomainSpec:
        c = self.charts[i]
        return DomainSpec(c.box, self.exceptional, c.label)

    def inner_domain(self, i: int) -> DomainSpec:
        c = self.charts[i]
        return DomainSpec(c.inner, self.exceptional, c.label + "'")

    def hull(self) -> Box:
        box = self.charts[0].box
        for c in self.charts[1:]:
            box = box.hull(c.box)
        return box

    def with_overrides(self, seed=None, samples=None, tol=None) -> "Scenario":
        s = self
        if seed is not None:
            s = replace(s, sampling=replace(s.sampling, seed=int(seed)))
        if samples is not None:
            s = replace(s, sampling=replace(s.sampling, chart_samples=int(samples)))
        if tol is not None:
            s = replace(s, tolerances=replace(s.tolerances, psh_rel=float(tol),
                                              estimate_rel=float(tol),
                                              domination_rel=float(tol)))
        return s

    def to_dict(self) -> dict:
        t, sa, se = self.tolerances, self.sampling, self.settings
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "n": self.n,
            "region": self.region.to_list(),
            "exceptional": self.exceptional.to_dict(),
            "exhaustion": None if self.exhaustion is None else self.exhaustion.to_dict(),
            "charts": [c.to_dict() for c in self.charts],
            "probes": [p.to_dict() for p in self.probes],
            "tolerances": {k: float(getattr(t, k)) for k in Tolerances.__dataclass_fields__},
            "sampling": {"seed": int(sa.seed), "chart_samples": int(sa.chart_samples),
                         "shell_samples": int(sa.shell_samples),
                         "scan_samples": int(sa.scan_samples),
                         "near_A_fraction": float(sa.near_A_fraction)},
            "settings": {k: (int(v) if k == "decades" else float(v))
                         for k, v in ((k, getattr(se, k)) for k in Settings.__dataclass_fields__)},
        }


# --------------------------------------------------------------------------
# loading


def _schema_check(d):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    # unexpected keys first: a misspelled key also shows up as a missing one
    errors = sorted(validator.iter_errors(d),
                    key=lambda e: (e.validator != "additionalProperties",
                                   len(e.absolute_path), str(e.message)))
    if errors:
        e = errors[0]
        # oneOf failures hide the useful message one level down
        if e.context:
            e = min(e.context, key=lambda c: len(c.message))
        raise ValidationError(tuple(e.absolute_path), e.message)


def _box_at(rows, path, n):
    try:
        box = Box.from_list(rows)
    except (TypeError, ValueError) as exc:
        raise ValidationError(path, str(exc)) from None
    if box.n != n:
        raise ValidationError(path, f"box has {box.n} complex dimensions, scenario has n={n}")
    if np.any(box.hi <= box.lo):
        raise ValidationError(path, "every interval needs lo < hi")
    return box


def scenario_from_dict(d) -> Scenario:
    _schema_check(d)
    n = int(d["n"])
    region = _box_at(d["region"], ("region",), n)
    try:
        exceptional = exceptional_from_dict(d.get("exceptional", {"kind": "empty"}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(("exceptional",), f"bad exceptional set: {exc}") from None
    if hasattr(exceptional, "points") and exceptional.points.shape[1] != n:
        raise ValidationError(("exceptional", "points"), "point dimension differs from n")

    ex = d.get("exhaustion")
    exhaustion = None if ex is None else expr_from_dict(ex, ("exhaustion",))

    charts = []
    labels = set()
    for i, c in enumerate(d["charts"]):
        path = ("charts", i)
        box = _box_at(c["box"], path + ("box",), n)
        inner = _box_at(c["inner"], path + ("inner",), n)
        if np.any(inner.margins_inside(box) <= 0):
            raise ValidationError(path + ("inner",), "inner box must lie strictly inside the chart box")
        label = c.get("label", f"U{i + 1}")
        if label in labels:
            raise ValidationError(path + ("label",), f"duplicate chart label {label!r}")
        labels.add(label)
        bounds = c.get("bounds")
        if bounds is not None and not bounds[0] < bounds[1]:
            raise ValidationError(path + ("bounds",), "bounds need m < M")
        charts.append(ChartSpec(label, box, inner,
                                expr_from_dict(c["potential"], path + ("potential",)),
                                c.get("routing", "auto"),
                                None if bounds is None else (float(bounds[0]), float(bounds[1])),
                                None if c.get("K") is None else float(c["K"])))

    probes = []
    plabels = set()
    for j, p in enumerate(d.get("probes", [])):
        path = ("probes", j)
        curve = curve_from_dict(p)
        pts = curve.at(np.array([0.0]))
        if pts.shape[1] != n:
            raise ValidationError(path, f"curve lives in dimension {pts.shape[1]}, scenario has n={n}")
        if isinstance(curve, Spiral) and curve.axis >= n:
            raise ValidationError(path + ("axis",), f"axis {curve.axis} out of range for n={n}")
        if isinstance(curve, Ray) and not np.any(curve.direction):
            raise ValidationError(path + ("direction",), "ray direction must be nonzero")
        if curve.label in plabels:
            raise ValidationError(path + ("label",), f"duplicate probe label {curve.label!r}")
        plabels.add(curve.label)
        probes.append(curve)

    s = Scenario(d["name"], n, region, exceptional, tuple(charts), tuple(probes), exhaustion,
                 Tolerances(**{k: float(v) for k, v in d.get("tolerances", {}).items()}),
                 Sampling(**d.get("sampling", {})),
                 Settings(**d.get("settings", {})))
    _check_cover(s)
    return s


def _check_cover(s: Scenario, per_axis: int = 6):
    grid = s.region.grid(per_axis)
    covered = np.zeros(len(grid), dtype=bool)
    for c in s.charts:
        covered |= c.box.contains(grid, closed=False)
    if not covered.all():
        bad = grid[~covered][0]
        raise ValidationError(("charts",), f"charts do not cover the region near {bad.tolist()}")


def loads_scenario(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise ParseError("a scenario must be a JSON object")
    return scenario_from_dict(d)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from None
    return loads_scenario(text)


def dump_scenario(s: Scenario, path=None) -> str:
    text = json.dumps(s.to_dict(), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


BUNDLED = {"GLUE-1D": "glue_1d.json", "GLUE-2D": "glue_2d.json"}


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``GLUE-1D`` or ``GLUE-2D``)."""
    key = name.upper().replace("_", "-")
    if key not in BUNDLED:
        raise ConfigError(f"no bundled scenario {name!r}; choose from {sorted(BUNDLED)}")
    return Path(__file__).with_name("scenarios") / BUNDLED[key]
