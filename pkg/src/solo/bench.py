"""Accuracy/runtime sweeps comparing PCP-based registration against RANSAC.

Every (axis value, trial) cell draws its own scenario from a seed derived from
the base seed, the axis value and the trial index, so cells can run in any
order or in parallel without changing the metrics. Wall times are of course
not reproducible.
"""

from __future__ import annotations

import csv
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .core import SoloError, SupportSet, extract_frame
from .projection import ProjectionConfig
from .ransac import RansacConfig, ransac_register
from .registration import OutlierConfig, motion_error, refine_motion, solo_init, solo_update
from .rpca import PcpConfig
from .simgen import ScenarioConfig, generate

log = logging.getLogger(__name__)

AXES = {
    "corrupt_frac": "corrupt_frac",
    "features": "features",
    "frames": "frames",
    "noise_sigma": "noise_sigma",
}
METHODS = ("pcp-init", "pcp", "pcp-r", "ransac")
# failures recorded per cell rather than raised
CELL_ERRORS = (SoloError, ValueError, np.linalg.LinAlgError)
COLUMNS = ("axis_value", "trial", "method", "motion_error", "wall_time_ms",
           "iterations", "inlier_count", "error")


@dataclass(frozen=True)
class BenchSettings:
    init_frames: Optional[int] = None  # None: the whole sequence is the init window
    pcp: PcpConfig = field(default_factory=PcpConfig)
    outliers: OutlierConfig = field(default_factory=OutlierConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    refine_rounds: int = 10
    ransac_thresh: Optional[float] = None  # None: 3 sigma, or 0.02 when noise free
    ransac_confidence: float = 0.99
    ransac_max_iters: int = 10000
    methods: Sequence[str] = METHODS


@dataclass
class BenchRow:
    axis_value: float
    trial: int
    method: str
    motion_error: float = math.nan
    wall_time_ms: float = math.nan
    iterations: float = math.nan
    inlier_count: float = math.nan
    error: str = ""

    def as_list(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


def trial_seed(base_seed: int, axis_value, trial: int) -> int:
    key = zlib.crc32(repr(axis_value).encode())
    return int(np.random.SeedSequence([int(base_seed), key, int(trial)]).generate_state(1)[0])


def _summarise(axis_value, trial, method, errors, times, iters, counts, failures) -> BenchRow:
    row = BenchRow(axis_value, trial, method)
    if errors:
        row.motion_error = float(np.mean(errors))
    if times:
        row.wall_time_ms = float(np.mean(times))
    if iters:
        row.iterations = float(np.mean(iters))
    if counts:
        row.inlier_count = float(np.mean(counts))
    if failures:
        row.error = f"{len(failures)} frame(s) failed: {failures[0]}"
    return row


def run_trial(axis: str, value, trial: int, base: ScenarioConfig,
              settings: BenchSettings = BenchSettings()) -> List[BenchRow]:
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {sorted(AXES)}")
    if axis in ("features", "frames"):
        value = int(value)
    cfg = base.with_(**{AXES[axis]: value, "seed": trial_seed(base.seed, value, trial)})
    gt = generate(cfg)
    X = gt.observed_X
    F = X.frames
    K = F if settings.init_frames is None else min(settings.init_frames, F)
    frames = [extract_frame(X, i).data for i in range(1, F + 1)]
    truth = gt.motions
    rows = []

    state = None
    if {"pcp-init", "pcp", "pcp-r"} & set(settings.methods):
        t0 = time.perf_counter()
        try:
            state = solo_init(X.frame_rows(range(1, K + 1)), settings.pcp, settings.outliers)
        except CELL_ERRORS as exc:
            init_error = str(exc)
        t_init = (time.perf_counter() - t0) * 1e3
        if state is None:
            for method in ("pcp-init", "pcp", "pcp-r"):
                if method in settings.methods:
                    rows.append(BenchRow(value, trial, method, wall_time_ms=t_init, error=init_error))
        elif "pcp-init" in settings.methods:
            rows.append(BenchRow(value, trial, "pcp-init", wall_time_ms=t_init,
                                 iterations=state.decomposition.iterations,
                                 inlier_count=len(state.inliers)))

    if state is not None and ({"pcp", "pcp-r"} & set(settings.methods)):
        stats = {m: ([], [], [], [], []) for m in ("pcp", "pcp-r")}
        W1 = frames[0][:, state.inliers.indices]
        for i in range(2, F + 1):
            Wi = frames[i - 1]
            t0 = time.perf_counter()
            try:
                upd = solo_update(state, Wi, settings.projection)
            except CELL_ERRORS as exc:
                for m in stats:
                    stats[m][4].append(f"frame {i}: {exc}")
                continue
            t_upd = (time.perf_counter() - t0) * 1e3
            common = state.reference_uncorrupted.intersect(upd.uncorrupted)
            s = stats["pcp"]
            s[0].append(motion_error(upd.motion, truth[i - 1]))
            s[1].append(t_upd)
            s[2].append(upd.projection.iterations)
            s[3].append(len(common))
            if "pcp-r" in settings.methods:
                t0 = time.perf_counter()
                try:
                    ref = refine_motion(W1, Wi[:, state.inliers.indices], upd.motion,
                                        max_rounds=settings.refine_rounds,
                                        support=SupportSet(state.positions(common)))
                except CELL_ERRORS as exc:
                    stats["pcp-r"][4].append(f"frame {i}: {exc}")
                    continue
                s = stats["pcp-r"]
                s[0].append(motion_error(ref.motion, truth[i - 1]))
                s[1].append(t_upd + (time.perf_counter() - t0) * 1e3)
                s[2].append(ref.rounds)
                s[3].append(len(ref.consensus))
        for m in ("pcp", "pcp-r"):
            if m in settings.methods:
                rows.append(_summarise(value, trial, m, *stats[m]))

    if "ransac" in settings.methods:
        thresh = settings.ransac_thresh
        if thresh is None:
            thresh = 3.0 * cfg.noise_sigma if cfg.noise_sigma > 0 else 0.02
        errors, times, iters, counts, failures = [], [], [], [], []
        for i in range(2, F + 1):
            rcfg = RansacConfig(inlier_thresh=thresh, confidence=settings.ransac_confidence,
                                max_iters=settings.ransac_max_iters,
                                seed=trial_seed(cfg.seed, "ransac", i))
            t0 = time.perf_counter()
            try:
                res = ransac_register(frames[0], frames[i - 1], rcfg)
            except CELL_ERRORS as exc:
                failures.append(f"frame {i}: {exc}")
                continue
            times.append((time.perf_counter() - t0) * 1e3)
            errors.append(motion_error(res.motion, truth[i - 1]))
            iters.append(res.iterations)
            counts.append(len(res.consensus))
        rows.append(_summarise(value, trial, "ransac", errors, times, iters, counts, failures))
    return rows


def _run_cell(args):
    return run_trial(*args)


def benchmark_sweep(axis: str, values: Sequence, base: ScenarioConfig = ScenarioConfig(),
                    trials: int = 1, settings: BenchSettings = BenchSettings(),
                    jobs: int = 1) -> List[BenchRow]:
    """Run every (value, trial) cell; failures are recorded in the ``error``
    column instead of aborting the sweep."""
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {sorted(AXES)}")
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    if trials < 1:
        raise ValueError("trials must be positive")
    tasks = [(axis, v, t, base, settings) for v in values for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]
    rows = [r for cell in results for r in cell]
    log.info("sweep %s: %d cells, %d rows", axis, len(tasks), len(rows))
    return rows


def summarize(rows: Iterable[BenchRow]) -> List[dict]:
    """Mean of each metric per (axis value, method), in first-seen order."""
    groups = {}
    for r in rows:
        groups.setdefault((r.axis_value, r.method), []).append(r)
    out = []
    for (value, method), rs in groups.items():
        def mean(attr):
            vals = [getattr(r, attr) for r in rs if not math.isnan(getattr(r, attr))]
            return float(np.mean(vals)) if vals else math.nan
        out.append({
            "axis_value": value,
            "method": method,
            "trials": len(rs),
            "failures": sum(1 for r in rs if r.error),
            "motion_error": mean("motion_error"),
            "wall_time_ms": mean("wall_time_ms"),
            "iterations": mean("iterations"),
            "inlier_count": mean("inlier_count"),
        })
    return out


def write_rows(path, rows: Iterable[BenchRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r.as_list()])


def write_summary(path, summary: List[dict]) -> None:
    if not summary:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]))
        w.writeheader()
        for row in summary:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v
