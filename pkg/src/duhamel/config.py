"""Run configuration schema: strict JSON with machine-readable errors.

Unknown keys are rejected at every level, so stale or misspelled options
never silently change a run.  ``load_config`` raises ``ConfigError`` whose
``errors`` list ({"path", "message"} records) is what the CLI serializes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expressions import ExpressionError, compile_expression
from .fields import ScalarField, VectorField
from .forcing import Forcing
from .grid import FreeSpaceTruncated, Grid, Periodic
from .series import SeriesOptions

__all__ = ["ConfigError", "RunConfig", "load_config"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = [
            e if isinstance(e, dict) else {"path": "", "message": str(e)} for e in errors
        ]
        super().__init__("; ".join(f"{e['path']}: {e['message']}" for e in self.errors))

    def payload(self) -> str:
        return json.dumps({"errors": self.errors}, indent=2)


class _Checker:
    def __init__(self):
        self.errors: list[dict] = []

    def fail(self, path: str, message: str):
        self.errors.append({"path": path, "message": message})

    def section(self, obj, path: str, allowed: set[str], required: set[str]):
        if not isinstance(obj, dict):
            self.fail(path, "must be an object")
            return False
        for key in obj:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else key, "unknown key")
        ok = True
        for key in required:
            if key not in obj:
                self.fail(f"{path}.{key}" if path else key, "missing required key")
                ok = False
        return ok

    def number(self, obj, path: str, positive=False, nonneg=False):
        if not isinstance(obj, (int, float)) or isinstance(obj, bool):
            self.fail(path, "must be a number")
            return None
        v = float(obj)
        if positive and not v > 0:
            self.fail(path, "must be positive")
            return None
        if nonneg and v < 0:
            self.fail(path, "must be nonnegative")
            return None
        return v

    def expression(self, obj, path: str):
        if not isinstance(obj, str):
            self.fail(path, "must be an expression string")
            return None
        try:
            return compile_expression(obj)
        except ExpressionError as exc:
            self.fail(path, str(exc))
            return None


@dataclass
class RunConfig:
    """Validated run description ready to execute."""

    kind: str
    grid: Grid
    series: SeriesOptions
    seed: int
    threads: int | None
    output_dir: str
    payload: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def initial_field(self) -> ScalarField:
        expr = self.payload["initial"]
        mesh = self.grid.meshgrid()
        names = ("x", "y", "z")[: self.grid.ndim]
        env = dict(zip(names, mesh))
        env["t"] = 0.0
        vals = np.asarray(expr(**env), dtype=float) * np.ones(self.grid.shape)
        return ScalarField(self.grid, vals)

    def velocity_field(self) -> VectorField:
        mesh = self.grid.meshgrid()
        names = ("x", "y", "z")[: self.grid.ndim]
        comps = []
        for expr in self.payload["velocity"]:
            env = dict(zip(names, mesh))
            env["t"] = 0.0
            comps.append(np.asarray(expr(**env), dtype=float) * np.ones(self.grid.shape))
        return VectorField(self.grid, tuple(comps))

    def forcing(self, key: str) -> Forcing | None:
        spec = self.payload.get(key)
        if spec is None:
            return None
        if isinstance(spec, (int, float)):
            return Forcing.constant(spec)
        return Forcing.from_expression(spec, self.grid, self.payload["horizon"])


_TOP_KEYS = {"schema", "kind", "grid", "series", "seed", "threads", "output_dir",
             "controlled_heat", "nse", "parabolic", "bench"}
_GRID_KEYS = {"points", "spacing", "extent", "origin", "boundary"}
_SERIES_KEYS = {"depth_max", "rel_tolerance", "time_steps", "output_times", "nu"}
_CH_KEYS = {"initial", "forcing", "horizon"}
_NSE_KEYS = {"velocity", "anchor", "anchor_value", "pressure_minus_force",
             "speed_bound", "horizon"}
_PARA_KEYS = {"A", "a", "c", "f", "initial", "horizon", "ellipticity_min"}
_BENCH_KEYS = {"axis", "values"}


def _parse_grid(obj, chk: _Checker) -> Grid | None:
    if not chk.section(obj, "grid", _GRID_KEYS, {"points", "origin"}):
        return None
    points = obj.get("points")
    if not isinstance(points, list) or not points or not all(
        isinstance(p, int) and not isinstance(p, bool) for p in points
    ):
        chk.fail("grid.points", "must be a list of integers")
        return None
    ndim = len(points)
    if ("spacing" in obj) == ("extent" in obj):
        chk.fail("grid", "give exactly one of spacing or extent")
        return None
    if "spacing" in obj:
        spacing = obj["spacing"]
    else:
        extent = obj["extent"]
        if not isinstance(extent, list) or len(extent) != ndim:
            chk.fail("grid.extent", f"must be a list of {ndim} numbers")
            return None
        spacing = [e / p for e, p in zip(extent, points)]
    if not isinstance(spacing, list) or len(spacing) != ndim:
        chk.fail("grid.spacing", f"must be a list of {ndim} numbers")
        return None
    origin = obj.get("origin")
    if not isinstance(origin, list) or len(origin) != ndim:
        chk.fail("grid.origin", f"must be a list of {ndim} numbers")
        return None
    boundary_spec = obj.get("boundary", "periodic")
    if boundary_spec == "periodic":
        boundary = Periodic()
    elif isinstance(boundary_spec, dict) and set(boundary_spec) == {"free_space"}:
        inner = boundary_spec["free_space"]
        if not chk.section(inner, "grid.boundary.free_space", {"padding_factor"}, set()):
            return None
        boundary = FreeSpaceTruncated(float(inner.get("padding_factor", 2.0)))
    else:
        chk.fail("grid.boundary", "must be 'periodic' or {'free_space': {...}}")
        return None
    try:
        return Grid(tuple(points), tuple(float(s) for s in spacing),
                    tuple(float(o) for o in origin), boundary)
    except (TypeError, ValueError) as exc:
        chk.fail("grid", str(exc))
        return None


def _parse_series(obj, chk: _Checker) -> SeriesOptions | None:
    if obj is None:
        return SeriesOptions()
    if not chk.section(obj, "series", _SERIES_KEYS, set()):
        return None
    kwargs = {}
    if "depth_max" in obj:
        if not isinstance(obj["depth_max"], int) or isinstance(obj["depth_max"], bool):
            chk.fail("series.depth_max", "must be an integer")
            return None
        kwargs["depth_max"] = obj["depth_max"]
    if "rel_tolerance" in obj:
        v = chk.number(obj["rel_tolerance"], "series.rel_tolerance", positive=True)
        if v is None:
            return None
        kwargs["rel_tolerance"] = v
    if "time_steps" in obj:
        if not isinstance(obj["time_steps"], int) or isinstance(obj["time_steps"], bool):
            chk.fail("series.time_steps", "must be an integer")
            return None
        kwargs["time_steps"] = obj["time_steps"]
    if "output_times" in obj:
        if not isinstance(obj["output_times"], list) or not obj["output_times"]:
            chk.fail("series.output_times", "must be a non-empty list of times")
            return None
        kwargs["output_times"] = tuple(float(t) for t in obj["output_times"])
    if "nu" in obj:
        v = chk.number(obj["nu"], "series.nu", positive=True)
        if v is None:
            return None
        kwargs["nu"] = v
    try:
        return SeriesOptions(**kwargs)
    except ValueError as exc:
        chk.fail("series", str(exc))
        return None


def load_config(path) -> RunConfig:
    path = Path(path)
    chk = _Checker()
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([{"path": str(path), "message": f"cannot read config: {exc}"}])

    if not chk.section(raw, "", _TOP_KEYS, {"schema", "kind", "grid"}):
        raise ConfigError(chk.errors)
    if raw.get("schema") != SCHEMA_VERSION:
        chk.fail("schema", f"unsupported schema version {raw.get('schema')!r} (expected {SCHEMA_VERSION})")
    kind = raw.get("kind")
    if kind not in ("nse", "parabolic", "controlled-heat"):
        chk.fail("kind", "must be one of 'nse', 'parabolic', 'controlled-heat'")
        raise ConfigError(chk.errors)

    grid = _parse_grid(raw.get("grid"), chk)
    series = _parse_series(raw.get("series"), chk)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        chk.fail("seed", "must be an integer")
    threads = raw.get("threads")
    if threads is not None and (not isinstance(threads, int) or isinstance(threads, bool) or threads < 1):
        chk.fail("threads", "must be a positive integer")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        chk.fail("output_dir", "must be a string")

    payload: dict = {}
    section_key = {"nse": "nse", "parabolic": "parabolic", "controlled-heat": "controlled_heat"}[kind]
    body = raw.get(section_key)
    if body is None:
        chk.fail(section_key, f"kind '{kind}' requires a '{section_key}' section")
        raise ConfigError(chk.errors)

    if kind == "controlled-heat":
        if chk.section(body, section_key, _CH_KEYS, {"initial", "horizon"}):
            payload["horizon"] = chk.number(body["horizon"], f"{section_key}.horizon", positive=True)
            payload["initial"] = chk.expression(body["initial"], f"{section_key}.initial")
            if "forcing" in body:
                f = body["forcing"]
                if isinstance(f, (int, float)) and not isinstance(f, bool):
                    payload["forcing"] = float(f)
                elif isinstance(f, str):
                    if chk.expression(f, f"{section_key}.forcing") is not None:
                        payload["forcing"] = f
                else:
                    chk.fail(f"{section_key}.forcing", "must be a number or expression string")
    elif kind == "nse":
        if chk.section(body, section_key, _NSE_KEYS,
                       {"velocity", "anchor", "anchor_value", "speed_bound", "horizon"}):
            payload["horizon"] = chk.number(body["horizon"], f"{section_key}.horizon", positive=True)
            payload["speed_bound"] = chk.number(body["speed_bound"], f"{section_key}.speed_bound", positive=True)
            payload["anchor_value"] = chk.number(body["anchor_value"], f"{section_key}.anchor_value")
            anchor = body["anchor"]
            if grid is not None and (not isinstance(anchor, list) or len(anchor) != grid.ndim):
                chk.fail(f"{section_key}.anchor", f"must be a list of {grid.ndim} coordinates")
            else:
                payload["anchor"] = tuple(float(v) for v in anchor)
            vel = body["velocity"]
            if grid is not None and (not isinstance(vel, list) or len(vel) != grid.ndim):
                chk.fail(f"{section_key}.velocity", f"must be a list of {grid.ndim} expressions")
            else:
                payload["velocity"] = [
                    chk.expression(v, f"{section_key}.velocity[{i}]") for i, v in enumerate(vel)
                ]
            if "pressure_minus_force" in body:
                f = body["pressure_minus_force"]
                if isinstance(f, (int, float)) and not isinstance(f, bool):
                    payload["pressure_minus_force"] = float(f)
                elif isinstance(f, str):
                    if chk.expression(f, f"{section_key}.pressure_minus_force") is not None:
                        payload["pressure_minus_force"] = f
                else:
                    chk.fail(f"{section_key}.pressure_minus_force", "must be a number or expression")
    else:  # parabolic
        if chk.section(body, section_key, _PARA_KEYS, {"A", "a", "c", "f", "initial", "horizon"}):
            payload["horizon"] = chk.number(body["horizon"], f"{section_key}.horizon", positive=True)
            payload["initial"] = chk.expression(body["initial"], f"{section_key}.initial")
            for name in ("A", "a", "c", "f"):
                v = body[name]
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    payload[name] = float(v)
                elif isinstance(v, str):
                    if chk.expression(v, f"{section_key}.{name}") is not None:
                        payload[name] = v
                else:
                    chk.fail(f"{section_key}.{name}", "must be a number or expression string")
            if "ellipticity_min" in body:
                payload["ellipticity_min"] = chk.number(
                    body["ellipticity_min"], f"{section_key}.ellipticity_min", positive=True
                )
            if grid is not None and (grid.ndim != 1 or grid.is_periodic):
                chk.fail("grid", "parabolic runs need a 1D free-space grid")

    if "bench" in raw:
        bench = raw["bench"]
        if chk.section(bench, "bench", _BENCH_KEYS, {"axis", "values"}):
            if bench["axis"] not in ("depth", "grid", "time_steps"):
                chk.fail("bench.axis", "must be 'depth', 'grid' or 'time_steps'")
            if not isinstance(bench["values"], list) or not bench["values"]:
                chk.fail("bench.values", "must be a non-empty list")
            else:
                payload["bench"] = {"axis": bench["axis"], "values": list(bench["values"])}

    if chk.errors:
        raise ConfigError(chk.errors)
    return RunConfig(
        kind=kind,
        grid=grid,
        series=series,
        seed=seed,
        threads=threads,
        output_dir=output_dir,
        payload=payload,
        raw=raw,
    )
