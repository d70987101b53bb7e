"""TOML run configuration.

Units are fixed: mm, hours, g/mm^3.  A minimal file::

    [grid]
    extent = [40.0, 40.0, 40.0]
    spacing = 0.5

    [[geometry.union]]
    type = "cuboid"
    center = [20.25, 20.25, 20.25]
    half_sizes = [5.0, 5.0, 1.0]

    [materials]
    preset = "sbf"

    [initial]
    c_mg = 0.0
    c_cl = 5.175e-6
    ph = 7.4

    [time]
    dt = 0.025
    t_end = 22.0

Every error names the offending field as a dotted path.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from .errors import ConfigError, InvalidArgumentError
from .grid import Cuboid, Cylinder, Difference, Sphere, Union, make_grid
from .observables import oh_from_ph
from .transport import MaterialParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRESETS = {"sbf": MaterialParams.sbf, "nacl": MaterialParams.nacl, "default": MaterialParams}
CALIBRATABLE = ("D_mg", "beta", "gamma")


@dataclass(frozen=True)
class FreeParam:
    name: str
    lo: float
    hi: float
    log: bool = False


@dataclass(frozen=True)
class CalibrationSettings:
    free_params: Tuple[FreeParam, ...] = ()
    k2_grid: Tuple[float, ...] = ()
    budget: int = 40


@dataclass(frozen=True)
class SimConfig:
    extent: Tuple[float, float, float]
    spacing: float
    geometry: object
    materials: MaterialParams
    c_mg0: float = 0.0
    c_cl0: float = 5.175e-6
    c_oh0: float = 1e-7
    ph0: Optional[float] = None
    dt: float = 0.025
    t_end: float = 22.0
    snapshot_every: int = 0
    record_every: int = 1
    reinit_every: int = 10
    tol: float = 1e-9
    max_iter: int = 5000
    seed: int = 0
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)

    def __post_init__(self):
        checks = [
            ("time.dt", self.dt > 0, "dt must be positive"),
            ("time.t_end", self.t_end >= self.dt, "t_end must be >= dt"),
            ("output.snapshot_every", self.snapshot_every >= 0,
             "snapshot_every must be >= 1 (or 0 to disable snapshots)"),
            ("output.record_every", self.record_every >= 1, "record_every must be >= 1"),
            ("solver.reinit_every", self.reinit_every >= 1, "reinit_every must be >= 1"),
            ("solver.tol", self.tol > 0, "tol must be positive"),
            ("solver.max_iter", self.max_iter >= 1, "max_iter must be >= 1"),
            ("grid.spacing", self.spacing > 0, "spacing must be positive"),
            ("initial.c_mg", self.c_mg0 >= 0, "concentration must be >= 0"),
            ("initial.c_cl", self.c_cl0 >= 0, "concentration must be >= 0"),
            ("initial.c_oh", self.c_oh0 > 0, "concentration must be > 0"),
        ]
        for path, ok, msg in checks:
            if not ok:
                raise ConfigError(path, msg)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def grid(self):
        return make_grid(self.extent, self.spacing)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def _get(d, key, path, kind=float, default=dataclasses.MISSING):
    if key not in d:
        if default is dataclasses.MISSING:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    v = d[key]
    try:
        if kind is float:
            if isinstance(v, bool):
                raise TypeError
            return float(v)
        if kind is int:
            if isinstance(v, bool) or int(v) != v:
                raise TypeError
            return int(v)
        if kind is str:
            if not isinstance(v, str):
                raise TypeError
            return v
        if kind == "vec3":
            vals = [float(x) for x in v]
            if len(vals) != 3:
                raise TypeError
            return tuple(vals)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"{path}.{key}" if path else key, f"expected {kind if isinstance(kind, str) else kind.__name__}, got {v!r}")


def _primitive(d, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "primitive must be a table")
    kind = _get(d, "type", path, str)
    try:
        if kind == "sphere":
            return Sphere(_get(d, "center", path, "vec3"), _get(d, "radius", path))
        if kind == "cuboid":
            return Cuboid(_get(d, "center", path, "vec3"), _get(d, "half_sizes", path, "vec3"))
        if kind == "cylinder":
            return Cylinder(_get(d, "point", path, "vec3"), _get(d, "direction", path, "vec3"),
                            _get(d, "radius", path), _get(d, "half_length", path))
    except InvalidArgumentError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"unknown primitive {kind!r}")


def geometry_from_dict(d, path="geometry"):
    """``union`` (required) and optional ``subtract`` lists of primitives."""
    if not isinstance(d, dict):
        raise ConfigError(path, "must be a table")
    parts = d.get("union")
    if not parts:
        raise ConfigError(f"{path}.union", "at least one primitive is required")
    solid = Union(*(_primitive(p, f"{path}.union[{i}]") for i, p in enumerate(parts)))
    cuts = d.get("subtract", [])
    if cuts:
        solid = Difference(solid, Union(*(_primitive(p, f"{path}.subtract[{i}]")
                                          for i, p in enumerate(cuts))))
    return solid


def materials_from_dict(d, path="materials") -> MaterialParams:
    d = dict(d)
    preset = d.pop("preset", "default")
    if preset not in PRESETS:
        raise ConfigError(f"{path}.preset", f"unknown preset {preset!r}; use one of {sorted(PRESETS)}")
    names = {f.name for f in dataclasses.fields(MaterialParams)}
    overrides = {}
    for k in d:
        if k not in names:
            raise ConfigError(f"{path}.{k}", "unknown material parameter")
        overrides[k] = _get(d, k, path)
    try:
        return PRESETS[preset](**overrides)
    except InvalidArgumentError as exc:
        name = str(exc).split()[0]
        raise ConfigError(f"{path}.{name}" if name in names else path, str(exc)) from None


def calibration_from_dict(d, path="calibration") -> CalibrationSettings:
    free = []
    for i, p in enumerate(d.get("free", [])):
        ppath = f"{path}.free[{i}]"
        name = _get(p, "name", ppath, str)
        if name not in CALIBRATABLE:
            raise ConfigError(f"{ppath}.name", f"must be one of {CALIBRATABLE}")
        lo, hi = _get(p, "lo", ppath), _get(p, "hi", ppath)
        if not lo < hi:
            raise ConfigError(ppath, "need lo < hi")
        log = bool(p.get("log", name in ("D_mg", "beta")))
        if log and lo <= 0:
            raise ConfigError(f"{ppath}.lo", "log-scaled bounds must be positive")
        free.append(FreeParam(name, lo, hi, log))
    k2 = d.get("k2_grid", [])
    try:
        k2 = tuple(float(v) for v in k2)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.k2_grid", "expected a list of numbers") from None
    budget = _get(d, "budget", path, int, 40)
    if budget < 2 * (len(free) + 1):
        raise ConfigError(f"{path}.budget", "budget must be >= 2*(dim + 1)")
    return CalibrationSettings(tuple(free), k2, budget)


def config_from_dict(d: dict) -> SimConfig:
    grid = d.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("grid", "missing required table")
    extent = _get(grid, "extent", "grid", "vec3")
    spacing = _get(grid, "spacing", "grid")
    if spacing <= 0:
        raise ConfigError("grid.spacing", "spacing must be positive")
    try:
        make_grid(extent, spacing)
    except InvalidArgumentError as exc:
        raise ConfigError("grid", str(exc)) from None
    if "geometry" not in d:
        raise ConfigError("geometry", "missing required table")
    geometry = geometry_from_dict(d["geometry"])
    materials = materials_from_dict(d.get("materials", {}))

    init = d.get("initial", {})
    ph0 = None
    if "ph" in init and "c_oh" in init:
        raise ConfigError("initial", "give either ph or c_oh, not both")
    if "ph" in init:
        ph0 = _get(init, "ph", "initial")
        c_oh0 = oh_from_ph(ph0)
    else:
        c_oh0 = _get(init, "c_oh", "initial", float, 1e-7)

    time = d.get("time", {})
    solver = d.get("solver", {})
    out = d.get("output", {})
    kwargs = dict(
        extent=extent, spacing=spacing, geometry=geometry, materials=materials,
        c_mg0=_get(init, "c_mg", "initial", float, materials.mg_0),
        c_cl0=_get(init, "c_cl", "initial", float, 5.175e-6),
        c_oh0=c_oh0, ph0=ph0,
        dt=_get(time, "dt", "time", float, 0.025),
        t_end=_get(time, "t_end", "time", float, 22.0),
        snapshot_every=_get(out, "snapshot_every", "output", int, 0),
        record_every=_get(out, "record_every", "output", int, 1),
        reinit_every=_get(solver, "reinit_every", "solver", int, 10),
        tol=_get(solver, "tol", "solver", float, 1e-9),
        max_iter=_get(solver, "max_iter", "solver", int, 5000),
        seed=_get(d, "seed", "", int, 0),
        calibration=calibration_from_dict(d.get("calibration", {})),
    )
    return SimConfig(**kwargs)


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML parse error: {exc}") from None
    return config_from_dict(data)
