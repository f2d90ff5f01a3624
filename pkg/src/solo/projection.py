"""Sparse projection of one frame onto the rank-4 shape subspace.

Solves ``min ||E||_1  s.t.  W = A Vt + E`` by inexact ALM. ``Vt`` has
orthonormal rows, so the A-step is the closed-form ``(W - E + Y/mu) V`` and
no singular values are ever computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ArrayOrFrame, ShapeBasis, SupportSet, as_array
from .rpca import shrink


@dataclass(frozen=True)
class ProjectionConfig:
    """``eps=None`` picks the uncorrupted-entry threshold from the data, see
    :func:`default_eps`."""

    tol: float = 1e-7
    max_iter: int = 200
    mu0: Optional[float] = None
    rho: float = 1.6
    eps: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be non-negative")


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    A: np.ndarray  # 3 x 4
    E: np.ndarray  # 3 x m
    Y: np.ndarray  # 3 x m
    iterations: int
    converged: bool
    residual: float = 0.0


def sparse_project(W: ArrayOrFrame, V: ShapeBasis, tol: float = 1e-7, max_iter: int = 200,
                   mu0: Optional[float] = None, rho: float = 1.6,
                   observed: Optional[np.ndarray] = None) -> ProjectionResult:
    """Fit ``W ~ A Vt`` with a sparse residual ``E``.

    ``observed`` optionally flags the columns of ``W`` that carry data. Missing
    columns are excluded from the constraint; their ``E`` entries are zero and
    the A-step becomes a 4x4 least-squares solve over the observed columns.
    NaN columns in ``W`` are treated as missing automatically.
    """
    W = np.array(as_array(W), dtype=float)
    Vt = V.basis if isinstance(V, ShapeBasis) else ShapeBasis(V).basis
    if W.ndim != 2 or W.shape[0] != 3:
        raise ValueError(f"frame must be 3 x m, got {W.shape}")
    if W.shape[1] != Vt.shape[1]:
        raise ValueError(f"frame has {W.shape[1]} features, basis has {Vt.shape[1]}")

    nan_cols = np.isnan(W).any(axis=0)
    if observed is None:
        observed = ~nan_cols
    else:
        observed = np.asarray(observed, dtype=bool) & ~nan_cols
    if np.any(np.isinf(W)) or np.any(np.isnan(W[:, observed])):
        raise ValueError("frame contains NaN or inf")
    W[:, ~observed] = 0.0
    masked = not observed.all()
    if masked:
        Vo = Vt[:, observed]
        if Vo.shape[1] < 4:
            raise ValueError("fewer than 4 observed features")
        # A = R Vo^T (Vo Vo^T)^-1 for the observed block
        solve_op = np.linalg.solve(Vo @ Vo.T, Vo).T  # m_obs x 4
    V_cols = Vt.T

    m = W.shape[1]
    w_norm = np.linalg.norm(W)
    if w_norm == 0:
        z = np.zeros((3, m))
        return ProjectionResult(np.zeros((3, 4)), z, z.copy(), 0, True, 0.0)

    snorm = np.linalg.norm(W, 2)
    Y = W / max(snorm, np.abs(W).max())
    mu = mu0 if mu0 is not None else 1.25 / snorm
    E = np.zeros_like(W)
    converged = False
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        if masked:
            A = (W - E + Y / mu)[:, observed] @ solve_op
        else:
            A = (W - E + Y / mu) @ V_cols
        AV = A @ Vt
        E = shrink(W - AV + Y / mu, 1.0 / mu)
        Z = W - AV - E
        if masked:
            E[:, ~observed] = 0.0
            Z[:, ~observed] = 0.0
        Y = Y + mu * Z
        mu *= rho
        res = np.linalg.norm(Z) / w_norm
        if res <= tol:
            converged = True
            break
    return ProjectionResult(A, E, Y, it, converged, float(res))


def default_eps(E: np.ndarray, W: np.ndarray) -> float:
    """Threshold separating corrupted from clean entries of ``E``.

    ``1e-6 * ||W||_inf`` on noise-free data. With dense noise most entries of
    ``E`` are nonzero, so the threshold is raised to three robust standard
    deviations of ``E`` (MAD based); for noise-free data that term is zero.
    """
    W = np.asarray(W)
    base = 1e-6 * np.nanmax(np.abs(W)) if W.size else 0.0
    mad = 1.4826 * np.median(np.abs(E))
    return float(max(base, 3.0 * mad))


def uncorrupted_set(E: np.ndarray, eps: float) -> SupportSet:
    """Features whose three entries in ``E`` all have magnitude <= ``eps``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    E = np.asarray(E)
    return SupportSet.from_mask(np.all(np.abs(E) <= eps, axis=0))
