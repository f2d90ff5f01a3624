"""Command-line front end.

    solo simulate scenario.toml --out-dir data/
    solo register data/trajectory.csv --refine --out-dir run/
    solo compare data/trajectory.csv --ground-truth data/ground_truth.json
    solo bench sweeps.toml --out-dir bench/ --jobs 4

Exit status is 0 on success, 2 for bad input and 3 when a solver fails.
``SOLO_SEED`` in the environment overrides every seed read from a config.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .bench import BenchSettings, benchmark_sweep, summarize, write_rows, write_summary
from .core import SoloError
from .pipeline import RunReport, SoloOptions, run_ransac, run_solo
from .projection import ProjectionConfig
from .ransac import RansacConfig
from .registration import OutlierConfig, motion_error
from .rpca import PcpConfig
from .simgen import generate

log = logging.getLogger("solo")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3


def _env_seed() -> Optional[int]:
    value = os.environ.get("SOLO_SEED")
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise io.InputError("SOLO_SEED", f"not an integer: {value!r}") from None


def _section(path, doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise io.InputError(path, f"[{name}] must be a table")
    return dict(sec)


def cmd_simulate(args) -> int:
    doc = io.load_config(args.config)
    cfg = io.scenario_from_config(args.config, doc)
    seed = args.seed if args.seed is not None else _env_seed()
    if seed is not None:
        cfg = cfg.with_(seed=seed)
    gt = generate(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trajectory(out / "trajectory.csv", gt.observed_X)
    io.write_ground_truth(out / "ground_truth.json", gt)
    print(f"wrote {out / 'trajectory.csv'} ({3 * cfg.frames} x {cfg.features}) "
          f"and {out / 'ground_truth.json'}")
    return EXIT_OK


def _solver_configs(args):
    doc = io.load_config(args.config) if args.config else {}
    path = args.config or "flags"
    reg = _section(path, doc, "register")
    known = {"init_frames", "refine", "refine_rounds", "refine_thresh", "reinit", "method"}
    for key in reg:
        if key not in known:
            raise io.InputError(path, f"unknown key {key!r} in [register]")
    pcp_cfg = io.build(path, PcpConfig, _section(path, doc, "pcp"))
    out_cfg = io.build(path, OutlierConfig, _section(path, doc, "outliers"))
    proj_cfg = io.build(path, ProjectionConfig, _section(path, doc, "projection"))
    ransac_cfg = io.build(path, RansacConfig, _section(path, doc, "ransac"))

    def pick(flag, key, default):
        v = getattr(args, flag, None)
        return v if v is not None else reg.get(key, default)

    opts = SoloOptions(
        init_frames=int(pick("init_frames", "init_frames", 15)),
        refine=bool(args.refine or reg.get("refine", False)),
        refine_rounds=int(reg.get("refine_rounds", 10)),
        refine_thresh=reg.get("refine_thresh"),
        reinit=bool(reg.get("reinit", True)) and not args.no_reinit,
        pcp=pcp_cfg,
        outliers=out_cfg,
        projection=proj_cfg,
    )
    seed = args.seed if args.seed is not None else _env_seed()
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if args.ransac_thresh is not None:
        overrides["inlier_thresh"] = args.ransac_thresh
    if overrides:
        ransac_cfg = io.build(path, RansacConfig, {**ransac_cfg.__dict__, **overrides}, "")
    method = pick("method", "method", "solo")
    if method not in ("solo", "ransac"):
        raise io.InputError(path, f"unknown method {method!r}")
    return opts, ransac_cfg, method


def _attach_errors(report_doc: dict, report: RunReport, truth) -> None:
    motions = truth["motions"]
    if len(motions) != len(report.frames):
        raise io.InputError("ground truth", f"has {len(motions)} frames, trajectory has {len(report.frames)}")
    errs = []
    for rec, doc, gt in zip(report.frames, report_doc["frames"], motions):
        if rec.motion is not None:
            e = motion_error(rec.motion, gt)
            doc["motion_error"] = e
            errs.append(e)
    if errs:
        report_doc["motion_error"] = {"mean": float(np.mean(errs)), "max": float(np.max(errs))}


def _run(method, X, opts, ransac_cfg) -> RunReport:
    if method == "ransac":
        return run_ransac(X, ransac_cfg)
    return run_solo(X, opts)


def cmd_register(args) -> int:
    opts, ransac_cfg, method = _solver_configs(args)
    X = io.read_trajectory(args.trajectory)
    if opts.init_frames < 2:
        raise io.InputError("--init-frames", "the initialisation window needs at least 2 frames")
    truth = io.read_ground_truth(args.ground_truth) if args.ground_truth else None
    report = _run(method, X, opts, ransac_cfg)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict(timing=not args.no_timing)
    if truth is not None and report.frames:
        _attach_errors(doc, report, truth)
    io.write_json(out / "report.json", doc)
    if report.frames:
        io.write_motions(out / "motions.csv", report.motions)
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
        return EXIT_SOLVER
    if report.init is not None:
        print(f"init: {report.init.pcp_iterations} PCP iterations, "
              f"rejected outliers {report.init.rejected_outliers}")
    failures = report.failures
    for rec in failures:
        print(f"error: {rec.error}", file=sys.stderr)
    print(f"registered {len(report.frames) - len(failures)}/{len(report.frames)} frames "
          f"({method}); wrote {out / 'report.json'} and {out / 'motions.csv'}")
    if "motion_error" in doc:
        print(f"motion error: mean {doc['motion_error']['mean']:.3e}, max {doc['motion_error']['max']:.3e}")
    return EXIT_SOLVER if failures else EXIT_OK


def cmd_compare(args) -> int:
    opts, ransac_cfg, _ = _solver_configs(args)
    X = io.read_trajectory(args.trajectory)
    truth = io.read_ground_truth(args.ground_truth) if args.ground_truth else None
    reports = {"solo": run_solo(X, opts), "ransac": run_ransac(X, ransac_cfg)}
    summary = {}
    status = EXIT_OK
    for name, rep in reports.items():
        d = rep.to_dict(timing=not args.no_timing)
        if truth is not None and rep.frames:
            _attach_errors(d, rep, truth)
        ok = [r for r in rep.frames if r.error is None]
        entry = {
            "frames_registered": len(ok),
            "frames_failed": len(rep.failures),
            "error": rep.error,
        }
        if not args.no_timing:
            entry["mean_frame_ms"] = float(np.mean([r.wall_time_ms for r in ok[1:]])) if len(ok) > 1 else None
        if "motion_error" in d:
            entry["motion_error"] = d["motion_error"]
        summary[name] = entry
        if rep.error or rep.failures:
            status = EXIT_SOLVER
    pairs = [(a, b) for a, b in zip(reports["solo"].motions, reports["ransac"].motions)
             if a is not None and b is not None]
    summary["max_motion_difference"] = max((motion_error(a, b) for a, b in pairs), default=None)
    if args.out:
        io.write_json(args.out, summary)
    for name in ("solo", "ransac"):
        e = summary[name]
        line = f"{name:>6}: {e['frames_registered']} frames"
        if "mean_frame_ms" in e and e["mean_frame_ms"] is not None:
            line += f", {e['mean_frame_ms']:.3f} ms/frame"
        if "motion_error" in e:
            line += f", mean error {e['motion_error']['mean']:.3e}"
        print(line)
    if summary["max_motion_difference"] is not None:
        print(f"max |solo - ransac| motion difference: {summary['max_motion_difference']:.3e}")
    return status


def _bench_plan(path, doc: dict):
    base = io.scenario_from_config(path, {"scenario": _section(path, doc, "base")})
    seed = _env_seed()
    if seed is not None:
        base = base.with_(seed=seed)
    s = _section(path, doc, "settings")
    nested = {
        "pcp": (PcpConfig, s.pop("pcp", {})),
        "outliers": (OutlierConfig, s.pop("outliers", {})),
        "projection": (ProjectionConfig, s.pop("projection", {})),
    }
    kwargs = {k: io.build(path, cls, sec) for k, (cls, sec) in nested.items()}
    if "methods" in s:
        s["methods"] = tuple(s["methods"])
    settings = io.build(path, BenchSettings, {**s, **kwargs})
    sweeps = doc.get("sweep", [])
    if isinstance(sweeps, dict):
        sweeps = [sweeps]
    if not sweeps:
        raise io.InputError(path, "no [[sweep]] tables")
    plan = []
    names = set()
    for k, sw in enumerate(sweeps, start=1):
        unknown = set(sw) - {"axis", "values", "trials", "name"}
        if unknown:
            raise io.InputError(path, f"sweep {k}: unknown keys {sorted(unknown)}")
        axis = sw.get("axis")
        values = sw.get("values", [])
        if not isinstance(values, list) or not values:
            raise io.InputError(path, f"sweep {k}: 'values' must be a nonempty list")
        trials = sw.get("trials", 1)
        if not isinstance(trials, int) or trials < 1:
            raise io.InputError(path, f"sweep {k}: 'trials' must be a positive integer")
        from .bench import AXES
        if axis not in AXES:
            raise io.InputError(path, f"sweep {k}: unknown axis {axis!r}, expected one of {sorted(AXES)}")
        name = sw.get("name", axis)
        if name in names:
            raise io.InputError(path, f"sweep {k}: duplicate name {name!r}")
        names.add(name)
        plan.append((name, axis, values, trials))
    return base, settings, plan


def cmd_bench(args) -> int:
    doc = io.load_config(args.config)
    base, settings, plan = _bench_plan(args.config, doc)
    jobs = args.jobs if args.jobs is not None else int(doc.get("jobs", 1))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for name, axis, values, trials in plan:
        rows = benchmark_sweep(axis, values, base, trials, settings, jobs=jobs)
        write_rows(out / f"{name}.csv", rows)
        summary = summarize(rows)
        write_summary(out / f"{name}_summary.csv", summary)
        failures += sum(1 for r in rows if r.error)
        print(f"{name}: {len(rows)} rows -> {out / (name + '.csv')}")
        for s in summary:
            print(f"  {axis}={s['axis_value']!r:<8} {s['method']:<9} "
                  f"err={s['motion_error']:.3e} time={s['wall_time_ms']:.3f} ms")
    if failures:
        print(f"{failures} cell(s) recorded failures (see the 'error' column)", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solo", description="Robust online rigid-body motion registration.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic trajectory file and its ground truth")
    s.add_argument("config", help="scenario TOML/JSON")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    def solver_flags(q):
        q.add_argument("trajectory", help="trajectory CSV")
        q.add_argument("--config", help="solver TOML/JSON with [register], [pcp], [outliers], "
                                        "[projection], [ransac] tables")
        q.add_argument("--init-frames", type=int, help="initialisation window length (default 15)")
        q.add_argument("--refine", action="store_true", help="consensus refinement after each update")
        q.add_argument("--no-reinit", action="store_true", help="never re-initialise on missing/new tracks")
        q.add_argument("--ransac-thresh", type=float, help="RANSAC inlier threshold in meters")
        q.add_argument("--seed", type=int, help="RANSAC seed")
        q.add_argument("--ground-truth", help="ground-truth JSON; adds motion errors to the output")
        q.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from JSON output")

    r = sub.add_parser("register", help="register every frame of a trajectory file")
    solver_flags(r)
    r.add_argument("--method", choices=("solo", "ransac"))
    r.add_argument("--out-dir", default=".")
    r.set_defaults(func=cmd_register)

    c = sub.add_parser("compare", help="run SOLO and RANSAC on one trajectory file")
    solver_flags(c)
    c.add_argument("--out", help="write the comparison summary as JSON")
    c.set_defaults(func=cmd_compare, method=None)

    b = sub.add_parser("bench", help="run benchmark sweeps")
    b.add_argument("config", help="sweep TOML/JSON")
    b.add_argument("--out-dir", default=".")
    b.add_argument("--jobs", type=int)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (io.InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SoloError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
