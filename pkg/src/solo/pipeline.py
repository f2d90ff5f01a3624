"""Sequence-level orchestration behind ``solo register`` and ``solo compare``."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import RigidMotion, SoloError, SupportSet, TrajectoryMatrix, extract_frame
from .projection import ProjectionConfig
from .ransac import RansacConfig, ransac_register
from .registration import (
    OutlierConfig,
    SoloState,
    basis_residual,
    refine_motion,
    solo_init,
    solo_update,
)
from .rpca import PcpConfig

log = logging.getLogger(__name__)


@dataclass
class FrameRecord:
    frame_index: int
    motion: Optional[RigidMotion]
    inlier_count: int = 0
    projection_iterations: int = 0
    wall_time_ms: float = 0.0
    refine_rounds: Optional[int] = None
    reinitialized: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "frame_index": self.frame_index,
            "motion": None if self.motion is None else {
                "R": self.motion.rotation.tolist(), "T": self.motion.translation.tolist()},
            "inlier_count": self.inlier_count,
            "projection_iterations": self.projection_iterations,
            "wall_time_ms": self.wall_time_ms,
            "reinitialized": self.reinitialized,
        }
        if self.refine_rounds is not None:
            d["refine_rounds"] = self.refine_rounds
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class InitRecord:
    window: List[int]
    pcp_iterations: int
    pcp_converged: bool
    pcp_residual: float
    rejected_outliers: List[int]  # 1-based
    basis_rank_residual: float
    inliers: int
    reference_uncorrupted: int
    wall_time_ms: float

    @classmethod
    def from_state(cls, state: SoloState, wall_time_ms: float) -> "InitRecord":
        dec = state.decomposition
        L_hat = dec.L[:, state.inliers.indices]
        return cls(
            window=list(state.window),
            pcp_iterations=dec.iterations,
            pcp_converged=bool(dec.converged),
            pcp_residual=float(dec.residual),
            rejected_outliers=(state.rejected + 1).tolist(),
            basis_rank_residual=basis_residual(L_hat, state.basis),
            inliers=len(state.inliers),
            reference_uncorrupted=len(state.reference_uncorrupted),
            wall_time_ms=wall_time_ms,
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunReport:
    method: str
    frames: List[FrameRecord] = field(default_factory=list)
    init: Optional[InitRecord] = None
    reinits: List[InitRecord] = field(default_factory=list)
    error: Optional[str] = None  # fatal failure that stopped the run

    @property
    def motions(self) -> List[Optional[RigidMotion]]:
        return [r.motion for r in self.frames]

    @property
    def failures(self) -> List[FrameRecord]:
        return [r for r in self.frames if r.error is not None]

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "method": self.method,
            "init": None if self.init is None else self.init.to_dict(),
            "reinits": [r.to_dict() for r in self.reinits],
            "frames": [r.to_dict() for r in self.frames],
            "error": self.error,
        }
        if not timing:
            _strip_timing(d)
        return d


def _strip_timing(obj):
    if isinstance(obj, dict):
        obj.pop("wall_time_ms", None)
        for v in obj.values():
            _strip_timing(v)
    elif isinstance(obj, list):
        for v in obj:
            _strip_timing(v)


@dataclass(frozen=True)
class SoloOptions:
    init_frames: int = 15
    refine: bool = False
    refine_rounds: int = 10
    refine_thresh: Optional[float] = None
    reinit: bool = True
    pcp: PcpConfig = field(default_factory=PcpConfig)
    outliers: OutlierConfig = field(default_factory=OutlierConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)


def _init_window(X: TrajectoryMatrix, frames: List[int], opts: SoloOptions):
    t0 = time.perf_counter()
    state = solo_init(X.frame_rows(frames), opts.pcp, opts.outliers, window=tuple(frames))
    return state, (time.perf_counter() - t0) * 1e3


def run_solo(X: TrajectoryMatrix, opts: SoloOptions = SoloOptions()) -> RunReport:
    """Initialise on the first ``init_frames`` frames, then register every
    frame against frame 1.

    When a frame is missing some inlying features, or shows features never seen
    by the current state, the state is rebuilt by PCP completion over frame 1
    plus the most recent ``init_frames - 1`` frames.
    """
    F = X.frames
    K = min(opts.init_frames, F)
    if K < 2:
        raise ValueError("the initialisation window needs at least 2 frames")
    report = RunReport("solo")
    try:
        state, dt = _init_window(X, list(range(1, K + 1)), opts)
    except (SoloError, ValueError) as exc:
        report.error = f"frames 1..{K}: {exc}"
        return report
    report.init = InitRecord.from_state(state, dt)
    cells = X.cell_mask()
    tracked = cells[:K].any(axis=0)
    W1 = extract_frame(X, 1).data
    report.frames.append(FrameRecord(1, RigidMotion.identity(), len(state.reference_uncorrupted)))

    for i in range(2, F + 1):
        Wi = extract_frame(X, i).data
        t0 = time.perf_counter()
        reinit = False
        observed = cells[i - 1]
        new_tracks = observed & ~tracked
        missing = ~observed[state.inliers.indices]
        if opts.reinit and (new_tracks.any() or missing.any()) and i > K:
            window = [1] + list(range(max(2, i - K + 2), i + 1))
            try:
                state, dt = _init_window(X, window, opts)
                report.reinits.append(InitRecord.from_state(state, dt))
                tracked = tracked | cells[window[1] - 1: i].any(axis=0)
                reinit = True
                log.info("frame %d: re-initialised on frames %s", i, window)
            except (SoloError, ValueError) as exc:
                log.warning("frame %d: re-initialisation failed (%s), keeping previous state", i, exc)
        try:
            upd = solo_update(state, Wi, opts.projection)
            motion = upd.motion
            common = state.reference_uncorrupted.intersect(upd.uncorrupted)
            count = len(common)
            rounds = None
            if opts.refine:
                idx = state.inliers.indices
                ref = refine_motion(W1[:, idx], Wi[:, idx], motion, opts.refine_thresh,
                                    opts.refine_rounds, SupportSet(state.positions(common)))
                motion, count, rounds = ref.motion, len(ref.consensus), ref.rounds
            rec = FrameRecord(i, motion, count, upd.projection.iterations,
                              (time.perf_counter() - t0) * 1e3, rounds, reinit)
        except (SoloError, ValueError) as exc:
            rec = FrameRecord(i, None, 0, 0, (time.perf_counter() - t0) * 1e3,
                              reinitialized=reinit, error=f"frame {i}: {exc}")
            log.error("%s", rec.error)
        report.frames.append(rec)
    return report


def run_ransac(X: TrajectoryMatrix, cfg: RansacConfig = RansacConfig()) -> RunReport:
    """Register every frame against frame 1 with RANSAC. Frame ``i`` uses seed
    ``cfg.seed + i`` so frames are independent of processing order."""
    report = RunReport("ransac")
    W1 = extract_frame(X, 1).data
    report.frames.append(FrameRecord(1, RigidMotion.identity(), int((~np.isnan(W1).any(axis=0)).sum())))
    for i in range(2, X.frames + 1):
        Wi = extract_frame(X, i).data
        t0 = time.perf_counter()
        try:
            res = ransac_register(W1, Wi, RansacConfig(
                cfg.min_set, cfg.inlier_thresh, cfg.confidence, cfg.max_iters,
                cfg.seed + i, cfg.oracle_inlier_ratio))
            rec = FrameRecord(i, res.motion, len(res.consensus), res.iterations,
                              (time.perf_counter() - t0) * 1e3)
        except (SoloError, ValueError) as exc:
            rec = FrameRecord(i, None, 0, 0, (time.perf_counter() - t0) * 1e3,
                              error=f"frame {i}: {exc}")
            log.error("%s", rec.error)
        report.frames.append(rec)
    return report
