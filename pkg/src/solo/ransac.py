"""Frame-by-frame RANSAC rigid registration, used as the comparison baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import ArrayOrFrame, DegenerateConfigurationError, RigidMotion, SoloError, SupportSet, as_array
from .registration import procrustes


class RansacError(SoloError):
    pass


@dataclass(frozen=True)
class RansacConfig:
    min_set: int = 4
    inlier_thresh: float = 0.02
    confidence: float = 0.99
    max_iters: int = 10000
    seed: int = 0
    # fixes the hypothesis budget from a known inlier ratio instead of adapting
    oracle_inlier_ratio: Optional[float] = None

    def __post_init__(self):
        if self.min_set < 3:
            raise ValueError("min_set must be at least 3")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.inlier_thresh <= 0:
            raise ValueError("inlier_thresh must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.oracle_inlier_ratio is not None and not 0 < self.oracle_inlier_ratio <= 1:
            raise ValueError("oracle_inlier_ratio must lie in (0, 1]")


class RansacResult(NamedTuple):
    motion: RigidMotion
    consensus: SupportSet
    iterations: int


def required_iterations(inlier_ratio: float, min_set: int, confidence: float, cap: int) -> int:
    """log(1 - confidence) / log(1 - w^s), clipped to ``[1, cap]``."""
    p_good = inlier_ratio ** min_set
    if p_good >= 1.0:
        return 1
    if p_good <= 0.0:
        return cap
    n = math.log(1.0 - confidence) / math.log(1.0 - p_good)
    return int(min(cap, max(1, math.ceil(n))))


def ransac_register(W1: ArrayOrFrame, Wi: ArrayOrFrame, cfg: RansacConfig = RansacConfig()) -> RansacResult:
    """Hypothesise-and-verify rigid registration of ``Wi`` against ``W1``.

    Features with NaN in either frame are ignored. Degenerate samples are
    redrawn and do not count as hypotheses; at most ``max_iters`` of them are
    tolerated in total.
    """
    A, B = as_array(W1), as_array(Wi)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != 3:
        raise ValueError(f"frames must both be 3 x m, got {A.shape} and {B.shape}")
    valid = np.flatnonzero(~(np.isnan(A).any(axis=0) | np.isnan(B).any(axis=0)))
    n = valid.size
    if n < cfg.min_set:
        raise ValueError(f"need at least {cfg.min_set} observed features, got {n}")
    Av, Bv = A[:, valid], B[:, valid]

    rng = np.random.default_rng(cfg.seed)
    if cfg.oracle_inlier_ratio is not None:
        budget = required_iterations(cfg.oracle_inlier_ratio, cfg.min_set, cfg.confidence, cfg.max_iters)
    else:
        budget = cfg.max_iters
    best = np.zeros(0, dtype=np.intp)
    iterations = 0
    degenerate = 0
    while iterations < budget:
        sample = rng.choice(n, size=cfg.min_set, replace=False)
        try:
            g = procrustes(Av[:, sample], Bv[:, sample])
        except DegenerateConfigurationError:
            degenerate += 1
            if degenerate >= cfg.max_iters:
                break
            continue
        iterations += 1
        r = np.linalg.norm(Bv - g.apply(Av), axis=0)
        consensus = np.flatnonzero(r <= cfg.inlier_thresh)
        if consensus.size > best.size:
            best = consensus
            if cfg.oracle_inlier_ratio is None:
                budget = required_iterations(best.size / n, cfg.min_set, cfg.confidence, cfg.max_iters)

    if best.size < cfg.min_set:
        raise RansacError(f"no consensus of at least {cfg.min_set} features (best {best.size})")
    try:
        motion = procrustes(Av[:, best], Bv[:, best])
    except DegenerateConfigurationError as exc:
        raise RansacError(str(exc)) from exc
    return RansacResult(motion, SupportSet(valid[best]), iterations)
