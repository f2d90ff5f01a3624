"""Principal component pursuit by the inexact augmented Lagrangian method.

Solves

    min ||L||_* + lam * ||E||_1   s.t.  X = L + E

and the masked variant where the constraint only holds on observed entries
(low-rank completion with sparse corruption). Dense noise is not modelled
separately; it ends up in the residual ``X - L - E`` bounded by ``tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import TrajectoryMatrix


@dataclass(frozen=True)
class PcpConfig:
    """Solver settings.

    ``lam`` and ``mu0`` default to data-dependent values when left as None:
    ``lam = 1/sqrt(max(n, m))`` and ``mu0 = 1.25 / ||X||_2``.
    """

    lam: Optional[float] = None
    tol: float = 1e-7
    max_iter: int = 500
    mu0: Optional[float] = None
    rho: float = 1.5
    mu_max_factor: float = 1e7

    def __post_init__(self):
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.mu0 is not None and self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        if self.mu_max_factor < 1:
            raise ValueError("mu_max_factor must be at least 1")


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    L: np.ndarray
    E: np.ndarray
    iterations: int
    residual: float
    converged: bool
    history: np.ndarray  # relative residual after every iteration
    lam: float = 0.0


def shrink(x, tau):
    """Soft thresholding ``sign(x) * max(|x| - tau, 0)``, elementwise."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be non-negative")
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def svt(M, tau: float, return_rank: bool = False):
    """Singular value thresholding: proximal map of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    s = s - tau
    r = int(np.count_nonzero(s > 0))
    out = (U[:, :r] * s[:r]) @ Vt[:r]
    return (out, r) if return_rank else out


def choose_lambda(n: int, m: int) -> float:
    if n < 1 or m < 1:
        raise ValueError("matrix dimensions must be positive")
    return 1.0 / math.sqrt(max(n, m))


def _unpack(X) -> tuple:
    if isinstance(X, TrajectoryMatrix):
        return np.asarray(X.data, dtype=float), X.mask
    return np.asarray(X, dtype=float), None


def _ialm(D: np.ndarray, mask: Optional[np.ndarray], cfg: PcpConfig) -> DecompositionResult:
    n, m = D.shape
    lam = cfg.lam if cfg.lam is not None else choose_lambda(n, m)
    if mask is not None:
        D = np.where(mask, D, 0.0)
    d_norm = np.linalg.norm(D)
    if d_norm == 0:
        z = np.zeros_like(D)
        return DecompositionResult(z, z.copy(), 0, 0.0, True, np.zeros(0), lam)

    snorm = np.linalg.norm(D, 2)
    Y = D / max(snorm, np.abs(D).max() / lam)
    mu = cfg.mu0 if cfg.mu0 is not None else 1.25 / snorm
    mu_max = mu * cfg.mu_max_factor
    E = np.zeros_like(D)
    L = np.zeros_like(D)
    history = []
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        L = svt(D - E + Y / mu, 1.0 / mu)
        T = D - L + Y / mu
        E = shrink(T, lam / mu)
        if mask is not None:
            # off the observed set E is free; it absorbs whatever L predicts there
            E = np.where(mask, E, T)
        Z = D - L - E
        Y = Y + mu * Z
        mu = min(mu * cfg.rho, mu_max)
        res = np.linalg.norm(Z) / d_norm
        history.append(res)
        if res <= cfg.tol:
            converged = True
            break

    if mask is not None:
        E = np.where(mask, E, 0.0)
        residual = float(np.linalg.norm(np.where(mask, D - L - E, 0.0)) / d_norm)
    else:
        residual = float(np.linalg.norm(D - L - E) / d_norm)
    return DecompositionResult(L, E, it, residual, converged, np.asarray(history), lam)


def pcp(X: Union[TrajectoryMatrix, np.ndarray], cfg: PcpConfig = PcpConfig()) -> DecompositionResult:
    """Split complete data ``X`` into low-rank ``L`` plus sparse ``E``.

    Non-convergence within ``cfg.max_iter`` is reported through
    ``converged=False`` rather than raised.
    """
    D, mask = _unpack(X)
    if mask is not None:
        raise ValueError("pcp needs complete data; use pcp_completion for masked input")
    if not np.all(np.isfinite(D)):
        raise ValueError("input contains NaN or inf")
    return _ialm(D, None, cfg)


def pcp_completion(X: Union[TrajectoryMatrix, np.ndarray], cfg: PcpConfig = PcpConfig(),
                   mask: Optional[np.ndarray] = None) -> DecompositionResult:
    """PCP constrained to the observed entries only.

    The returned ``L`` fills every missing entry; ``E`` is zero off the
    observed set and the residual is measured on the observed set.
    """
    D, tmask = _unpack(X)
    if mask is None:
        mask = tmask
    if mask is None:
        mask = ~np.isnan(D)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != D.shape:
        raise ValueError("mask shape does not match data")
    if not mask.any(axis=0).all():
        raise ValueError("completion is ill-posed: a column has no observed entry")
    if not mask.any(axis=1).all():
        raise ValueError("completion is ill-posed: a row has no observed entry")
    if not np.all(np.isfinite(D[mask])):
        raise ValueError("observed entries contain NaN or inf")
    if mask.all():
        return _ialm(D, None, cfg)
    return _ialm(D, mask, cfg)
