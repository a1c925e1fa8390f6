"""
Scenario configuration: JSON in, validated objects out.

Validation runs before any computation.  Structure and types go through a
JSON schema (unknown keys rejected everywhere); profile parameters and
positivity are then checked by building the actual objects, and every
failure is reported as :class:`ConfigError` naming the offending key.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .gas import GasModel
from .profiles import FAMILIES, Grid1D, ProfileSpec, sample
from .solver import RunConfig

SYSTEMS = ("euler", "mhd", "duct", "spherical")

THERMO_KINDS = {
    "euler": ("eta", "tau", "rho", "p"),
    "mhd": ("tau", "rho"),
    "duct": ("rho", "v", "z"),
    "spherical": ("rho", "v", "z"),
}


class ConfigError(ValueError):
    """Invalid scenario configuration."""


def _range():
    return {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}


_PROFILE = {
    "type": "object",
    "properties": {
        "family": {"enum": list(FAMILIES)},
        "params": {"type": "object"},
    },
    "required": ["family"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "system": {"enum": list(SYSTEMS)},
        "model": {
            "type": "object",
            "properties": {
                "gamma": {"type": "number", "exclusiveMinimum": 1},
                "K": {"type": "number", "exclusiveMinimum": 0},
                "c_tau": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["gamma"],
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 16},
                "xmin": {"type": "number"},
                "xmax": {"type": "number"},
                "periodic": {"type": "boolean"},
            },
            "required": ["n", "xmin", "xmax"],
            "additionalProperties": False,
        },
        "profiles": {
            "type": "object",
            "properties": {
                "u": _PROFILE,
                "m": _PROFILE,
                "thermo": {
                    "type": "object",
                    "properties": {"kind": {"type": "string"}, "profile": _PROFILE},
                    "required": ["kind", "profile"],
                    "additionalProperties": False,
                },
            },
            "required": ["u", "thermo"],
            "additionalProperties": False,
        },
        "medium": {
            "type": "object",
            "properties": {"A": _PROFILE, "B": _PROFILE},
            "required": ["A", "B"],
            "additionalProperties": False,
        },
        "geometry": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["duct", "spherical"]},
                "a": _PROFILE,
                "r0": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "run": {
            "type": "object",
            "properties": {
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "vacuum_guard": {"type": "number", "exclusiveMinimum": 0},
                "grad_cap": {"type": "number", "exclusiveMinimum": 1},
                "output_times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
            "required": ["t_end"],
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "eta_floor": {"type": "number", "exclusiveMinimum": 0},
                "h0": {"type": "number"},
                "tau_ref": {"type": "number", "exclusiveMinimum": 0},
                "monitor_box": {"type": "boolean"},
                "trace_points": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "box": {
                    "type": "object",
                    "properties": {k: _range() for k in (
                        "tau", "x", "r", "rho", "u", "a", "ad", "add", "m", "mx", "mxx")},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
    },
    "required": ["system", "model", "grid", "profiles", "run"],
    "additionalProperties": False,
}

_BOX_KEYS = {
    "mhd": ("tau", "x"),
    "duct": ("a", "ad", "add", "m", "mx", "mxx", "u", "rho"),
    "spherical": ("r", "rho", "u"),
}


@dataclass
class ScenarioConfig:
    """A validated scenario with its objects built."""

    raw: dict
    system: str
    model: GasModel
    grid: Grid1D
    u: ProfileSpec
    thermo_kind: str
    thermo: ProfileSpec
    m: ProfileSpec
    run: RunConfig
    medium: object = None
    geometry: object = None
    analysis: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.raw.get("name", self.system)

    def with_grid(self, n):
        """Copy at a different resolution (used by convergence studies)."""
        raw = json.loads(json.dumps(self.raw))
        raw["grid"]["n"] = int(n)
        return parse(raw)


def _path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _profile(d, key):
    try:
        return ProfileSpec.from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def load(path):
    """Read and validate a scenario JSON file."""
    try:
        with open(Path(path)) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse(raw)


def parse(raw):
    """Validate a scenario dictionary and build its objects."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            where = _path(e)
            raise ConfigError(f"unknown key(s) {extra} in {where}")
        raise ConfigError(f"{_path(e)}: {e.message}")

    system = raw["system"]
    md = raw["model"]
    try:
        model = GasModel(md["gamma"], md.get("K", 1.0), md.get("c_tau", 1.0))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None

    g = raw["grid"]
    try:
        grid = Grid1D.uniform(g["n"], g["xmin"], g["xmax"], g.get("periodic", True))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    pr = raw["profiles"]
    u = _profile(pr["u"], "profiles.u")
    m = _profile(pr["m"], "profiles.m") if "m" in pr else ProfileSpec.constant(1.0)
    kind = pr["thermo"]["kind"]
    if kind not in THERMO_KINDS[system]:
        raise ConfigError(f"profiles.thermo.kind: {kind!r} is not valid for system {system!r}; "
                          f"expected one of {THERMO_KINDS[system]}")
    thermo = _profile(pr["thermo"]["profile"], "profiles.thermo.profile")

    for spec, key, pos in ((u, "profiles.u", False), (m, "profiles.m", True),
                           (thermo, "profiles.thermo.profile", True)):
        try:
            sample(spec, grid, positive=pos, name=key)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    try:
        r = raw["run"]
        run = RunConfig(t_end=r["t_end"], cfl=r.get("cfl", 0.4),
                        vacuum_guard=r.get("vacuum_guard", 1e-6),
                        grad_cap=r.get("grad_cap", 1e3),
                        output_times=tuple(r.get("output_times", ())))
    except ValueError as exc:
        raise ConfigError(f"run: {exc}") from None

    medium = geometry = None
    if system == "mhd":
        medium = _medium(raw, model, grid)
    elif "medium" in raw:
        raise ConfigError(f"medium: only valid for system 'mhd', not {system!r}")
    if system in ("duct", "spherical"):
        geometry = _geometry(raw, system, grid)
    elif "geometry" in raw:
        raise ConfigError(f"geometry: only valid for duct or spherical systems, not {system!r}")
    if system == "mhd" and "m" in pr:
        raise ConfigError("profiles.m: the MHD system takes its entropy through medium.A")

    analysis = dict(raw.get("analysis", {}))
    if "box" in analysis:
        box = analysis["box"]
        need = _BOX_KEYS.get(system)
        if need is None:
            raise ConfigError("analysis.box: the euler certificate derives its box from the data")
        missing = [k for k in need if k not in box]
        extra = [k for k in box if k not in need]
        if missing or extra:
            raise ConfigError(f"analysis.box: system {system!r} needs exactly {list(need)}; "
                              f"missing {missing}, unexpected {extra}")
        for k, (lo, hi) in box.items():
            if lo > hi:
                raise ConfigError(f"analysis.box.{k}: lower bound exceeds upper bound")

    return ScenarioConfig(raw=raw, system=system, model=model, grid=grid, u=u,
                          thermo_kind=kind, thermo=thermo, m=m, run=run,
                          medium=medium, geometry=geometry, analysis=analysis)


def _medium(raw, model, grid):
    from .mhd import MhdMedium
    if "medium" not in raw:
        raise ConfigError("medium: required for system 'mhd'")
    A = _profile(raw["medium"]["A"], "medium.A")
    B = _profile(raw["medium"]["B"], "medium.B")
    try:
        med = MhdMedium(A, B, model.gamma)
        med.coefficients(grid.x)
        sample(A, grid, positive=True, name="medium.A")
        sample(B, grid, name="medium.B")
    except ValueError as exc:
        raise ConfigError(f"medium: {exc}") from None
    return med


def _geometry(raw, system, grid):
    from .duct.flow import DuctGeometry
    geo = raw.get("geometry")
    if geo is None:
        raise ConfigError(f"geometry: required for system {system!r}")
    kind = geo["kind"]
    if (system == "spherical") != (kind == "spherical"):
        raise ConfigError(f"geometry.kind: {kind!r} does not match system {system!r}")
    try:
        if kind == "spherical":
            if "a" in geo:
                raise ConfigError("geometry.a: spherical geometry generates a = r^2 itself")
            if "r0" not in geo:
                raise ConfigError("geometry.r0: required for spherical geometry")
            out = DuctGeometry.spherical(geo["r0"])
        else:
            if "r0" in geo:
                raise ConfigError("geometry.r0: only valid for spherical geometry")
            if "a" not in geo:
                raise ConfigError("geometry.a: required for duct geometry")
            out = DuctGeometry(_profile(geo["a"], "geometry.a"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"geometry: {exc}") from None
    if grid.periodic and out.a_spec.family != "constant":
        raise ConfigError("grid.periodic: a varying area needs a bounded grid")
    return out
