"""Domain types shared by the solvers.

Feature and frame indices are 0-based inside the package; anything written
for humans (CLI output, reports) converts to 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

ORTHO_TOL = 1e-10


class SoloError(RuntimeError):
    """Base class for solver failures (as opposed to bad input)."""


class DegenerateConfigurationError(SoloError):
    pass


class InitializationError(SoloError):
    pass


class InsufficientInliersError(SoloError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Sorted, duplicate-free set of feature indices."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).ravel()
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("support set indices must be strictly increasing")
        if idx.size and idx[0] < 0:
            raise ValueError("support set indices must be non-negative")
        object.__setattr__(self, "indices", _frozen(idx))

    @classmethod
    def from_iterable(cls, items: Iterable[int]) -> "SupportSet":
        return cls(np.unique(np.fromiter(items, dtype=np.intp)))

    @classmethod
    def from_mask(cls, mask) -> "SupportSet":
        return cls(np.flatnonzero(np.asarray(mask, dtype=bool)))

    @classmethod
    def all(cls, m: int) -> "SupportSet":
        return cls(np.arange(m))

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self):
        return iter(int(i) for i in self.indices)

    def __contains__(self, j) -> bool:
        k = np.searchsorted(self.indices, j)
        return bool(k < self.indices.size and self.indices[k] == j)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportSet):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __repr__(self) -> str:
        return f"SupportSet({self.indices.tolist()})"

    def intersect(self, other: "SupportSet") -> "SupportSet":
        return SupportSet(np.intersect1d(self.indices, other.indices))

    def check_bounds(self, m: int) -> None:
        if self.indices.size and self.indices[-1] >= m:
            raise IndexError(
                f"feature index {int(self.indices[-1])} out of range for {m} features"
            )

    def one_based(self) -> list:
        return (self.indices + 1).tolist()


@dataclass(frozen=True, eq=False)
class FrameObservation:
    """3 x m coordinates of every feature in one frame.

    Missing features carry NaN in all three rows.
    """

    data: np.ndarray
    frame_index: int = 1

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != 3:
            raise ValueError(f"frame data must be 3 x m, got shape {data.shape}")
        if self.frame_index < 1:
            raise ValueError("frame_index is 1-based")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def features(self) -> int:
        return self.data.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """Boolean per-feature flag, False where any coordinate is NaN."""
        return ~np.isnan(self.data).any(axis=0)


@dataclass(frozen=True, eq=False)
class TrajectoryMatrix:
    """Stacked 3F x m observations with an optional observed-entry mask.

    ``mask`` is normalised so that a feature is either fully observed or fully
    missing within a frame.
    """

    data: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
            raise ValueError(f"trajectory matrix must be a nonempty 2-D array, got {data.shape}")
        if data.shape[0] % 3:
            raise ValueError(f"row count {data.shape[0]} is not a multiple of 3")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != data.shape:
                raise ValueError("mask shape does not match data")
            cells = mask.reshape(-1, 3, data.shape[1]).all(axis=1)
            mask = np.repeat(cells, 3, axis=0)
            if mask.all():
                mask = None
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "mask", None if mask is None else _frozen(mask))

    @classmethod
    def from_array(cls, data) -> "TrajectoryMatrix":
        """Build from an array that marks missing entries with NaN."""
        data = np.asarray(data, dtype=float)
        nan = np.isnan(data)
        return cls(data, ~nan if nan.any() else None)

    @property
    def frames(self) -> int:
        return self.data.shape[0] // 3

    @property
    def features(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def cell_mask(self) -> np.ndarray:
        """F x m boolean matrix of observed (frame, feature) cells."""
        if self.mask is None:
            return np.ones((self.frames, self.features), dtype=bool)
        return self.mask[::3]

    def with_nans(self) -> np.ndarray:
        """Data with NaN written into every unobserved entry."""
        if self.mask is None:
            return np.array(self.data)
        return np.where(self.mask, self.data, np.nan)

    def frame_rows(self, frames: Sequence[int]) -> "TrajectoryMatrix":
        """Sub-matrix made of the given 1-based frames, in order."""
        rows = np.concatenate([np.arange(3 * (i - 1), 3 * i) for i in frames])
        mask = None if self.mask is None else self.mask[rows]
        return TrajectoryMatrix(self.data[rows], mask)


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """x_i = R x_1 + T."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        T = np.asarray(self.translation, dtype=float).ravel()
        if R.shape != (3, 3) or T.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(T)):
            raise ValueError("rigid motion has non-finite entries")
        if np.linalg.norm(R.T @ R - np.eye(3)) > ORTHO_TOL:
            raise ValueError("rotation is not orthogonal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation has det != +1")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(T))

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map 3 x m points."""
        return self.rotation @ points + self.translation[:, None]

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """self after other."""
        return RigidMotion(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def as_row(self) -> np.ndarray:
        """R row-major followed by T (12 values)."""
        return np.concatenate([self.rotation.ravel(), self.translation])

    @classmethod
    def from_row(cls, row) -> "RigidMotion":
        row = np.asarray(row, dtype=float)
        return cls(row[:9].reshape(3, 3), row[9:12])


@dataclass(frozen=True, eq=False)
class ShapeBasis:
    """Row-orthonormal 4 x m representative of the shape subspace."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2 or B.shape[0] != 4:
            raise ValueError(f"shape basis must be 4 x m, got {B.shape}")
        if np.linalg.norm(B @ B.T - np.eye(4)) > ORTHO_TOL:
            raise ValueError("shape basis rows are not orthonormal")
        object.__setattr__(self, "basis", _frozen(B))

    @property
    def features(self) -> int:
        return self.basis.shape[1]


ArrayOrFrame = Union[np.ndarray, FrameObservation]


def as_array(W: ArrayOrFrame) -> np.ndarray:
    if isinstance(W, FrameObservation):
        return W.data
    if isinstance(W, TrajectoryMatrix):
        return W.data
    return np.asarray(W, dtype=float)


def stack_frames(frames: Sequence[ArrayOrFrame]) -> TrajectoryMatrix:
    """Stack per-frame 3 x m observations into the 3F x m trajectory matrix.

    NaN entries in a frame become unobserved entries of the mask.
    """
    if len(frames) == 0:
        raise ValueError("cannot stack an empty list of frames")
    blocks = [as_array(f) for f in frames]
    m = blocks[0].shape[1] if blocks[0].ndim == 2 else None
    for i, b in enumerate(blocks, start=1):
        if b.ndim != 2 or b.shape[0] != 3:
            raise ValueError(f"frame {i} has shape {b.shape}, expected (3, m)")
        if b.shape[1] != m:
            raise ValueError(f"frame {i} has {b.shape[1]} features, frame 1 has {m}")
    return TrajectoryMatrix.from_array(np.vstack(blocks))


def extract_frame(X: TrajectoryMatrix, i: int) -> FrameObservation:
    """Frame ``i`` (1-based) of ``X``; unobserved entries come back as NaN."""
    if not 1 <= i <= X.frames:
        raise IndexError(f"frame index {i} out of range 1..{X.frames}")
    rows = slice(3 * (i - 1), 3 * i)
    block = X.data[rows]
    if X.mask is not None:
        block = np.where(X.mask[rows], block, np.nan)
    return FrameObservation(block, frame_index=i)


def center(W: ArrayOrFrame):
    """Subtract the column mean; returns ``(centered, mean)``."""
    W = as_array(W)
    if W.ndim != 2 or W.shape[1] == 0:
        raise ValueError("center needs at least one column")
    mu = W.mean(axis=1)
    return W - mu[:, None], mu


def restrict_columns(M, I: SupportSet) -> np.ndarray:
    M = as_array(M)
    I.check_bounds(M.shape[1])
    return M[:, I.indices]
