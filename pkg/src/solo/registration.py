"""Rigid motion recovery and the two-stage SOLO pipeline.

Initialisation runs PCP on a window of frames, drops feature tracks whose
sparse error column is dense, and keeps the top-4 right singular vectors of
the cleaned low-rank part as the shape basis. Each later frame is projected
onto that basis with a sparse residual; the motion is then fitted by
Procrustes on the original coordinates of features that are clean both in the
reference frame and in the new frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import (
    ArrayOrFrame,
    DegenerateConfigurationError,
    InitializationError,
    InsufficientInliersError,
    RigidMotion,
    ShapeBasis,
    SupportSet,
    TrajectoryMatrix,
    as_array,
    center,
)
from .projection import ProjectionConfig, ProjectionResult, default_eps, sparse_project, uncorrupted_set
from .rpca import DecompositionResult, PcpConfig, pcp, pcp_completion


@dataclass(frozen=True)
class OutlierConfig:
    """Column-l0 outlier test on the PCP sparse term.

    ``tau=None`` means ``int(0.3 * rows)``; ``hard_eps=None`` means
    :func:`default_hard_eps`.
    """

    tau: Optional[int] = None
    hard_eps: Optional[float] = None
    tau_frac: float = 0.3

    def __post_init__(self):
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.hard_eps is not None and self.hard_eps < 0:
            raise ValueError("hard_eps must be non-negative")

    def resolve_tau(self, rows: int) -> int:
        return self.tau if self.tau is not None else int(self.tau_frac * rows)


@dataclass(frozen=True, eq=False)
class SoloState:
    """Everything the per-frame update needs. Indices are in the original
    feature numbering."""

    basis: ShapeBasis
    inliers: SupportSet
    reference: np.ndarray  # 3 x |I|, frame 1 restricted to the inliers
    reference_uncorrupted: SupportSet  # I_1, subset of inliers
    decomposition: Optional[DecompositionResult] = None
    hard_eps: float = 0.0
    window: tuple = ()  # 1-based frames the state was built from

    def __post_init__(self):
        if self.basis.features != len(self.inliers) or self.reference.shape[1] != len(self.inliers):
            raise ValueError("basis, inliers and reference disagree on the feature count")
        if np.setdiff1d(self.reference_uncorrupted.indices, self.inliers.indices).size:
            raise ValueError("reference_uncorrupted must be a subset of inliers")

    @property
    def rejected(self) -> np.ndarray:
        m = self.decomposition.L.shape[1] if self.decomposition is not None else None
        if m is None:
            return np.zeros(0, dtype=np.intp)
        return np.setdiff1d(np.arange(m), self.inliers.indices)

    def positions(self, support: SupportSet) -> np.ndarray:
        """Column positions of ``support`` inside the inlier-restricted arrays."""
        return np.searchsorted(self.inliers.indices, support.indices)


class UpdateResult(NamedTuple):
    motion: RigidMotion
    uncorrupted: SupportSet  # I_i in original feature numbering
    projection: ProjectionResult


class Refinement(NamedTuple):
    motion: RigidMotion
    consensus: SupportSet
    rounds: int
    converged: bool


def procrustes(W1: ArrayOrFrame, Wi: ArrayOrFrame) -> RigidMotion:
    """Least-squares rigid motion taking the points ``W1`` onto ``Wi``.

    The SVD of ``center(Wi) center(W1)^T`` gives ``R = U diag(1, 1, d) V^T``
    with ``d = det(U V^T)``, so the result is a proper rotation even when the
    best orthogonal fit is a reflection.
    """
    A, B = as_array(W1), as_array(Wi)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != 3:
        raise ValueError(f"point sets must both be 3 x m, got {A.shape} and {B.shape}")
    if A.shape[1] < 3:
        raise DegenerateConfigurationError("degenerate configuration: fewer than 3 points")
    A_c, mu1 = center(A)
    B_c, mui = center(B)
    H = B_c @ A_c.T
    U, s, Vt = np.linalg.svd(H)
    if s[0] == 0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateConfigurationError("degenerate configuration: points are collinear")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    R = U @ D @ Vt
    return RigidMotion(R, mui - R @ mu1)


def motion_error(est: RigidMotion, gt: RigidMotion) -> float:
    """||R - R0||_F + ||T - T0||_2."""
    return float(np.linalg.norm(est.rotation - gt.rotation)
                 + np.linalg.norm(est.translation - gt.translation))


def reject_outliers(E: np.ndarray, cfg: OutlierConfig = OutlierConfig()) -> SupportSet:
    """Keep feature j iff column j of ``E`` has at most ``tau`` entries above
    ``hard_eps``."""
    E = np.asarray(E)
    hard_eps = cfg.hard_eps if cfg.hard_eps is not None else 0.0
    counts = np.count_nonzero(np.abs(E) > hard_eps, axis=0)
    return SupportSet.from_mask(counts <= cfg.resolve_tau(E.shape[0]))


def shape_basis(L_hat: np.ndarray) -> ShapeBasis:
    """Top-4 right singular vectors of the cleaned low-rank matrix."""
    L_hat = np.asarray(L_hat, dtype=float)
    if L_hat.ndim != 2 or min(L_hat.shape) < 4:
        raise ValueError(f"shape basis needs at least 4 rows and 4 features, got {L_hat.shape}")
    _, _, Vt = np.linalg.svd(L_hat, full_matrices=False)
    return ShapeBasis(Vt[:4])


def basis_residual(L_hat: np.ndarray, basis: ShapeBasis) -> float:
    """Relative energy of ``L_hat`` outside the span of ``basis``."""
    n = np.linalg.norm(L_hat)
    if n == 0:
        return 0.0
    Vt = basis.basis
    return float(np.linalg.norm(L_hat - (L_hat @ Vt.T) @ Vt) / n)


def default_hard_eps(D: np.ndarray, L: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Threshold below which entries of the PCP sparse term count as zero.

    ``1e-6 * ||X||_inf``, raised to four robust standard deviations of the
    residual between the data and the rank-4 truncation of ``L`` when the data
    carry dense noise.
    """
    D = np.asarray(D)
    obs = np.ones(D.shape, dtype=bool) if mask is None else mask
    base = 1e-6 * np.abs(D[obs]).max()
    U, s, Vt = np.linalg.svd(L, full_matrices=False)
    L4 = (U[:, :4] * s[:4]) @ Vt[:4]
    sigma = 1.4826 * np.median(np.abs(D - L4)[obs])
    return float(max(base, 4.0 * sigma))


def solo_init(X: TrajectoryMatrix, pcp_cfg: PcpConfig = PcpConfig(),
              outlier_cfg: OutlierConfig = OutlierConfig(),
              window: Optional[tuple] = None) -> SoloState:
    """Robust initialisation from the stacked window ``X`` whose first frame is
    the reference frame.

    Masked input goes through PCP completion. Feature tracks with no
    observation in the window are left out of the inlier set.
    """
    if not isinstance(X, TrajectoryMatrix):
        X = TrajectoryMatrix.from_array(X)
    if X.frames < 2 or X.features < 5:
        raise ValueError("initialisation needs at least 2 frames and 5 features")
    m = X.features
    seen = np.ones(m, dtype=bool) if X.mask is None else X.mask.any(axis=0)
    cols = np.flatnonzero(seen)
    if cols.size < 5:
        raise InitializationError("initialization failed: fewer than 5 observed feature tracks")

    if X.mask is None:
        dec = pcp(X.data, pcp_cfg)
        sub_mask = None
    else:
        sub_mask = X.mask[:, cols]
        data = np.where(X.mask, X.data, 0.0)[:, cols]
        dec = pcp_completion(data, pcp_cfg, mask=sub_mask)
        # scatter back into full width so E/L columns line up with features
        L = np.zeros(X.shape)
        E = np.zeros(X.shape)
        L[:, cols] = dec.L
        E[:, cols] = dec.E
        dec = DecompositionResult(L, E, dec.iterations, dec.residual, dec.converged,
                                  dec.history, dec.lam)

    data_obs = np.where(X.mask, X.data, 0.0) if X.mask is not None else X.data
    hard_eps = outlier_cfg.hard_eps
    if hard_eps is None:
        hard_eps = default_hard_eps(data_obs[:, cols], dec.L[:, cols], sub_mask)
    cfg = OutlierConfig(outlier_cfg.tau, hard_eps, outlier_cfg.tau_frac)
    keep = reject_outliers(dec.E, cfg).indices
    keep = np.intersect1d(keep, cols)
    if keep.size < 5:
        raise InitializationError(
            f"initialization failed: only {keep.size} inlying features survived")
    inliers = SupportSet(keep)

    basis = shape_basis(dec.L[:, keep])
    reference = X.with_nans()[0:3, keep]
    clean1 = np.all(np.abs(dec.E[0:3, keep]) <= hard_eps, axis=0)
    clean1 &= ~np.isnan(reference).any(axis=0)
    ref_unc = SupportSet(keep[clean1])
    if window is None:
        window = tuple(range(1, X.frames + 1))
    return SoloState(basis, inliers, reference, ref_unc, dec, hard_eps, tuple(window))


def solo_update(state: SoloState, Wi: ArrayOrFrame,
                cfg: ProjectionConfig = ProjectionConfig()) -> UpdateResult:
    """Register one full-width frame (3 x m) against the reference frame."""
    W = as_array(Wi)
    if W.ndim != 2 or W.shape[0] != 3:
        raise ValueError(f"frame must be 3 x m, got {W.shape}")
    state.inliers.check_bounds(W.shape[1])
    Wr = W[:, state.inliers.indices]
    observed = ~np.isnan(Wr).any(axis=0)
    proj = sparse_project(Wr, state.basis, tol=cfg.tol, max_iter=cfg.max_iter,
                          mu0=cfg.mu0, rho=cfg.rho, observed=observed)
    eps = cfg.eps
    if eps is None:
        eps = default_eps(proj.E[:, observed], Wr[:, observed])
    clean = uncorrupted_set(proj.E, eps).indices
    clean = clean[observed[clean]]
    Ii = SupportSet(state.inliers.indices[clean])
    common = state.positions(state.reference_uncorrupted.intersect(Ii))
    if common.size < 3:
        raise InsufficientInliersError(
            f"insufficient inliers for registration ({common.size} common features)")
    motion = procrustes(state.reference[:, common], Wr[:, common])
    return UpdateResult(motion, Ii, proj)


def refine_motion(W1: ArrayOrFrame, Wi: ArrayOrFrame, motion0: RigidMotion,
                  residual_thresh: Optional[float] = None, max_rounds: int = 10,
                  support: Optional[SupportSet] = None) -> Refinement:
    """Consensus refinement of an initial motion estimate.

    Each round collects the features whose residual under the current motion
    is within ``residual_thresh`` and refits on them, stopping once the
    consensus set repeats. The default threshold is three times the median
    residual of ``motion0``, taken over ``support`` (the set ``motion0`` was
    fitted on) when given and over all features otherwise. Features with NaN
    in either frame never vote.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    A, B = as_array(W1), as_array(Wi)
    if A.shape != B.shape:
        raise ValueError("frames must have the same shape")
    valid = ~(np.isnan(A).any(axis=0) | np.isnan(B).any(axis=0))

    def residuals(g: RigidMotion) -> np.ndarray:
        r = np.full(A.shape[1], np.inf)
        r[valid] = np.linalg.norm(B[:, valid] - g.apply(A[:, valid]), axis=0)
        return r

    r = residuals(motion0)
    if residual_thresh is None:
        pool = valid.copy()
        if support is not None:
            support.check_bounds(A.shape[1])
            pool[:] = False
            pool[support.indices] = True
            pool &= valid
        if not pool.any():
            raise InsufficientInliersError("no valid features to seed the refinement")
        scale = np.abs(B[:, valid]).max()
        residual_thresh = max(3.0 * float(np.median(r[pool])), 1e-9 * scale)

    motion = motion0
    previous = None
    rounds = 0
    converged = False
    while True:
        consensus = np.flatnonzero(r <= residual_thresh)
        if previous is not None and np.array_equal(consensus, previous):
            converged = True
            break
        if rounds >= max_rounds:
            break
        if consensus.size < 3:
            raise InsufficientInliersError(
                f"refinement consensus shrank to {consensus.size} features")
        motion = procrustes(A[:, consensus], B[:, consensus])
        rounds += 1
        previous = consensus
        r = residuals(motion)
    return Refinement(motion, SupportSet(previous), rounds, converged)
