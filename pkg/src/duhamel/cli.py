"""Command-line front end: solve, verify, bench, inspect.

Exit codes: 0 ok, 2 config error, 3 numerical failure (bound violation or
non-convergence), 4 oracle mismatch.  Solve runs write CSF1 trajectories,
bound reports as JSON lines, and a manifest recording the config hash,
package and library versions, seed, thread knob and timings; with a fixed
config and seed the field artifacts are byte identical across runs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import struct
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cole_hopf import CurlError, NSEProblem, PositivityError, solve_nse
from .config import ConfigError, RunConfig, load_config
from .fields import ScalarField
from .forcing import Forcing
from .io import read_field, write_trajectory
from .parabolic import ParabolicProblem, solve_parabolic
from .series import SeriesOptions, ceiling_check, solve_controlled_heat, termwise_factorial_check
from .suites import DEFAULT_SEED, run_suite

THREADS_ENV = "DUHAMEL_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ORACLE = 4


def _config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _thread_count(cfg: RunConfig) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        return max(1, int(env))
    return cfg.threads or 1


def _write_report(report, path: Path):
    path.write_text(report.to_jsonl())


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc.payload(), file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.output or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": _config_hash(cfg.raw),
        "config_path": str(args.config),
        "config": cfg.raw,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "threads": _thread_count(cfg),
        "versions": {
            "duhamel": __version__,
            "numpy": np.__version__,
        },
        "artifacts": [],
        "timings": {},
    }
    try:
        import scipy

        manifest["versions"]["scipy"] = scipy.__version__
    except ImportError:
        pass

    status = EXIT_OK
    t0 = time.time()
    try:
        if cfg.kind == "controlled-heat":
            status = _solve_controlled_heat(cfg, out_dir, manifest)
        elif cfg.kind == "nse":
            status = _solve_nse(cfg, out_dir, manifest)
        else:
            status = _solve_parabolic(cfg, out_dir, manifest)
    except (CurlError, PositivityError) as exc:
        payload = {"errors": [{"path": cfg.kind, "message": str(exc)}]}
        if isinstance(exc, CurlError):
            payload["errors"][0]["curl_residual"] = exc.residual
            print(json.dumps(payload, indent=2), file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(payload, indent=2), file=sys.stderr)
        status = EXIT_NUMERICAL
    except ValueError as exc:
        print(json.dumps({"errors": [{"path": cfg.kind, "message": str(exc)}]}, indent=2),
              file=sys.stderr)
        return EXIT_CONFIG

    manifest["timings"]["total_s"] = time.time() - t0
    manifest["exit_status"] = status
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


def _solve_controlled_heat(cfg: RunConfig, out_dir: Path, manifest: dict) -> int:
    g0 = cfg.initial_field()
    forcing = cfg.forcing("forcing") or Forcing.zero()
    sol = solve_controlled_heat(g0, forcing, cfg.payload["horizon"], cfg.series)
    write_trajectory(sol.trajectory, out_dir, "G")
    manifest["artifacts"].append("G")
    manifest["truncation_depth"] = sol.truncation_depth
    manifest["estimated_truncation_error"] = sol.estimated_truncation_error
    manifest["not_converged"] = sol.not_converged
    ceiling = ceiling_check(sol, g0, forcing.abs_bound)
    termwise = termwise_factorial_check(sol, g0, forcing.abs_bound)
    _write_report(ceiling, out_dir / "ceiling.jsonl")
    _write_report(termwise, out_dir / "termwise.jsonl")
    manifest["artifacts"] += ["ceiling.jsonl", "termwise.jsonl"]
    if sol.not_converged or not (ceiling.passed and termwise.passed):
        return EXIT_NUMERICAL
    return EXIT_OK


def _solve_nse(cfg: RunConfig, out_dir: Path, manifest: dict) -> int:
    u0 = cfg.velocity_field()
    prob = NSEProblem(
        u0=u0,
        x0=cfg.payload["anchor"],
        a=cfg.payload["anchor_value"],
        pressure_minus_force=cfg.forcing("pressure_minus_force"),
        speed_bound=cfg.payload["speed_bound"],
        horizon=cfg.payload["horizon"],
    )
    sol = solve_nse(prob, cfg.series)
    write_trajectory(sol.series.trajectory, out_dir, "G")
    write_trajectory(sol.velocity, out_dir, "u")
    manifest["artifacts"] += ["G", "u"]
    _write_report(sol.floor_report, out_dir / "floor.jsonl")
    _write_report(sol.ceiling_report, out_dir / "ceiling.jsonl")
    manifest["artifacts"] += ["floor.jsonl", "ceiling.jsonl"]
    if sol.residual is not None:
        write_trajectory(sol.residual, out_dir, "residual")
        manifest["artifacts"].append("residual")
        manifest["max_residual"] = max(s.max_abs for _, s in sol.residual)
    manifest["truncation_depth"] = sol.series.truncation_depth
    manifest["not_converged"] = sol.series.not_converged
    ok = sol.floor_report.passed and sol.ceiling_report.passed and not sol.series.not_converged
    return EXIT_OK if ok else EXIT_NUMERICAL


def _solve_parabolic(cfg: RunConfig, out_dir: Path, manifest: dict) -> int:
    grid = cfg.grid
    mesh = grid.meshgrid()
    init = cfg.payload["initial"]
    u0 = ScalarField(grid, np.asarray(init(x=mesh[0], t=0.0), dtype=float) * np.ones(grid.shape))
    # payload holds floats or raw expression strings; Coefficient.make takes both
    prob = ParabolicProblem(
        A=cfg.payload["A"],
        a=cfg.payload["a"],
        c=cfg.payload["c"],
        f=cfg.payload["f"],
        u0=u0,
        horizon=cfg.payload["horizon"],
        ellipticity_min=cfg.payload.get("ellipticity_min", 1e-8),
    )
    sol = solve_parabolic(prob, cfg.series)
    write_trajectory(sol.v, out_dir, "v")
    write_trajectory(sol.u, out_dir, "u")
    manifest["artifacts"] += ["v", "u"]
    manifest["truncation_depth"] = sol.series.truncation_depth
    manifest["not_converged"] = sol.series.not_converged
    manifest["edge_clamped"] = bool(sol.u.metadata.get("edge_clamped", False))
    return EXIT_OK if not sol.series.not_converged else EXIT_NUMERICAL


def cmd_verify(args) -> int:
    try:
        result = run_suite(args.suite, seed=args.seed,
                           inject_m_underestimate=args.inject_m_underestimate)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    for line in result.lines():
        print(line)
    if result.passed:
        return EXIT_OK
    return EXIT_NUMERICAL if args.suite == "bounds" else EXIT_ORACLE


def cmd_bench(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc.payload(), file=sys.stderr)
        return EXIT_CONFIG
    bench = cfg.payload.get("bench")
    if not bench:
        print(json.dumps({"errors": [{"path": "bench", "message": "config has no bench sweep"}]}),
              file=sys.stderr)
        return EXIT_CONFIG
    if cfg.kind != "controlled-heat":
        print(json.dumps({"errors": [{"path": "bench", "message": "bench sweeps run controlled-heat configs"}]}),
              file=sys.stderr)
        return EXIT_CONFIG

    rows = [("sweep_axis", "value", "wall_time_s", "term_count", "error_vs_oracle")]
    horizon = cfg.payload["horizon"]
    for value in bench["values"]:
        grid = cfg.grid
        opts = cfg.series
        if bench["axis"] == "depth":
            opts = SeriesOptions(depth_max=int(value), rel_tolerance=opts.rel_tolerance,
                                 time_steps=opts.time_steps, output_times=opts.output_times,
                                 nu=opts.nu)
        elif bench["axis"] == "time_steps":
            opts = SeriesOptions(depth_max=opts.depth_max, rel_tolerance=opts.rel_tolerance,
                                 time_steps=int(value), output_times=opts.output_times,
                                 nu=opts.nu)
        else:  # grid sweep: scale the point count, keep the extent
            factor = int(value) / grid.points[0]
            grid = type(grid)(
                tuple(int(value) for _ in grid.points),
                tuple(h / factor for h in grid.spacing),
                grid.origin,
                grid.boundary,
            )
        cfg_run = RunConfig(cfg.kind, grid, opts, cfg.seed, cfg.threads, cfg.output_dir,
                            cfg.payload, cfg.raw)
        g0 = cfg_run.initial_field()
        forcing = cfg_run.forcing("forcing") or Forcing.zero()
        t0 = time.time()
        sol = solve_controlled_heat(g0, forcing, horizon, opts)
        wall = time.time() - t0
        error = _bench_error(sol, g0, forcing, horizon)
        rows.append((bench["axis"], value, wall, sol.truncation_depth + 1, error))

    text = "\n".join(",".join(_csv_cell(v) for v in row) for row in rows) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _bench_error(sol, g0, forcing: Forcing, horizon: float) -> float:
    """Error vs the analytic exponential for constant forcing, else vs CN."""
    t_final = sol.trajectory.times[-1]
    final = sol.trajectory.snapshots[-1].values
    if forcing.sup_bound == forcing.inf_bound:
        import math

        c = forcing.sup_bound
        from .heat_kernel import convolve

        exact = math.exp(c * t_final) * convolve(g0, t_final, nu=sol.options.nu).values
        return float(np.max(np.abs(final - exact)))
    from .verify import fd_controlled_heat

    cn = fd_controlled_heat(g0, forcing, t_final, t_final / max(2 * sol.options.time_steps, 64),
                            output_times=(t_final,))
    return float(np.max(np.abs(final - cn.snapshots[0].values)))


def cmd_inspect(args) -> int:
    path = Path(args.file)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != b"CSF1":
                print(f"{path}: not a CSF1 file", file=sys.stderr)
                return EXIT_CONFIG
            (ndim,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            spacing = struct.unpack(f"<{ndim}d", fh.read(8 * ndim))
            origin = struct.unpack(f"<{ndim}d", fh.read(8 * ndim))
            (flag,) = struct.unpack("<B", fh.read(1))
    except (OSError, struct.error) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    field = read_field(path)
    print(f"file:     {path}")
    print(f"ndim:     {ndim}")
    print(f"points:   {list(dims)}")
    print(f"spacing:  {list(spacing)}")
    print(f"origin:   {list(origin)}")
    print(f"boundary: {'periodic' if flag == 0 else 'free-space (truncated)'}")
    vals = field.values
    print(f"values:   min {vals.min():.17g}  max {vals.max():.17g}  mean {vals.mean():.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duhamel",
        description="Convolution-series PDE solver: controlled heat, potential-flow NSE, 1D parabolic.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run a problem config and write artifacts")
    p_solve.add_argument("config", help="path to a JSON run config")
    p_solve.add_argument("-o", "--output", help="output directory (overrides config)")
    p_solve.set_defaults(fn=cmd_solve)

    p_verify = sub.add_parser("verify", help="run a property/acceptance suite")
    p_verify.add_argument("suite", help="bounds | oracles | burgers | parabolic | manufactured | all")
    p_verify.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_verify.add_argument("--inject-m-underestimate", action="store_true",
                          help="self-test: run the ceiling check with an undersized bound")
    p_verify.set_defaults(fn=cmd_verify)

    p_bench = sub.add_parser("bench", help="sweep depth/grid/time_steps and emit a CSV timing table")
    p_bench.add_argument("config", help="controlled-heat config with a 'bench' section")
    p_bench.add_argument("-o", "--output", help="CSV output path (default stdout)")
    p_bench.set_defaults(fn=cmd_bench)

    p_inspect = sub.add_parser("inspect", help="print a CSF1 file header")
    p_inspect.add_argument("file")
    p_inspect.set_defaults(fn=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
