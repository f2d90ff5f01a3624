"""On-disk formats.

Trajectory CSV
    Header row ``f1,...,fm``; row ``3(i-1)+a`` holds axis ``a`` of frame ``i``
    for every feature; ``nan`` marks a missing cell.
Motions CSV
    Header ``r11,...,r33,t1,t2,t3``; one row per frame in frame order, R
    row-major then T. Frame 1 is the identity.
Ground-truth JSON
    Scenario config, per-frame motions and 1-based outlier / missing /
    corrupted indices.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .core import RigidMotion, TrajectoryMatrix
from .simgen import GroundTruth, ScenarioConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MOTION_HEADER = [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["t1", "t2", "t3"]


class InputError(ValueError):
    """Malformed input file; carries a location when one is known."""

    def __init__(self, path, message: str, line: Optional[int] = None):
        where = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_trajectory(path, X: TrajectoryMatrix) -> None:
    data = X.with_nans()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(1, X.features + 1)])
        for row in data:
            w.writerow([fmt_float(v) for v in row])


def read_trajectory(path) -> TrajectoryMatrix:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(path, "empty file", 1) from None
        m = len(header)
        if m == 0:
            raise InputError(path, "header row has no feature ids", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != m:
                raise InputError(path, f"expected {m} values, found {len(row)}", lineno)
            try:
                rows.append([float(c) if c.strip() else math.nan for c in row])
            except ValueError as exc:
                raise InputError(path, f"non-numeric value ({exc})", lineno) from None
    if not rows:
        raise InputError(path, "no data rows")
    if len(rows) % 3:
        raise InputError(path, f"{len(rows)} data rows is not a multiple of 3")
    data = np.asarray(rows, dtype=float)
    if np.isinf(data).any():
        raise InputError(path, "infinite values are not allowed")
    cells = np.isnan(data).reshape(-1, 3, m)
    partial = cells.any(axis=1) & ~cells.all(axis=1)
    if partial.any():
        # a point with some coordinates missing is treated as wholly missing
        data = data.copy()
        data[np.repeat(partial, 3, axis=0)] = np.nan
    return TrajectoryMatrix.from_array(data)


def motion_to_dict(g: RigidMotion) -> dict:
    return {"R": g.rotation.tolist(), "T": g.translation.tolist()}


def motion_from_dict(d: dict) -> RigidMotion:
    return RigidMotion(np.asarray(d["R"], dtype=float), np.asarray(d["T"], dtype=float))


def write_ground_truth(path, gt: GroundTruth) -> None:
    cells = gt.observed_X.cell_mask()
    missing = np.argwhere(~cells) + 1
    corrupted = np.argwhere(gt.corrupt_support) + 1
    doc = {
        "config": gt.config.to_dict(),
        "frames": gt.observed_X.frames,
        "features": gt.observed_X.features,
        "motions": [motion_to_dict(g) for g in gt.motions],
        "outlier_indices": gt.outlier_indices.one_based(),
        "missing_cells": missing.tolist(),
        "corrupted_entries": corrupted.tolist(),
    }
    write_json(path, doc)


def read_ground_truth(path) -> dict:
    doc = read_json(path)
    try:
        doc["motions"] = [motion_from_dict(d) for d in doc["motions"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(path, f"bad motions entry: {exc}") from None
    return doc


def write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(path, exc.msg, exc.lineno) from None


def write_motions(path, motions: Sequence[Optional[RigidMotion]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MOTION_HEADER)
        for g in motions:
            vals = np.full(12, np.nan) if g is None else g.as_row()
            w.writerow([fmt_float(v) for v in vals])


def read_motions(path) -> List[Optional[RigidMotion]]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MOTION_HEADER:
            raise InputError(path, "unexpected motions header", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 12:
                raise InputError(path, f"expected 12 values, found {len(row)}", lineno)
            vals = np.asarray([float(c) for c in row])
            out.append(None if np.isnan(vals).any() else RigidMotion.from_row(vals))
    return out


def _key_line(text: str, key: str) -> Optional[int]:
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(key) and stripped[len(key):].lstrip().startswith(("=", ":")):
            return n
        if stripped.startswith(f'"{key}"'):
            return n
    return None


def load_config(path) -> dict:
    """Read a TOML (or ``.json``) config file into a dict."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(path, exc.strerror or str(exc)) from None
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(path, exc.msg, exc.lineno) from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(path, str(exc)) from None


def build(path, cls, section: dict, text: Optional[str] = None):
    """Instantiate dataclass ``cls`` from ``section``, pointing at the
    offending line on a schema violation."""
    fields = getattr(cls, "__dataclass_fields__")
    if text is None:
        try:
            text = Path(path).read_text()
        except (OSError, TypeError):
            text = ""
    for key in section:
        if key not in fields:
            raise InputError(path, f"unknown key {key!r} for {cls.__name__}", _key_line(text, key))
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        line = None
        for key in section:
            if key in str(exc):
                line = _key_line(text, key)
                break
        raise InputError(path, f"invalid {cls.__name__}: {exc}", line) from None


def scenario_from_config(path, doc: dict) -> ScenarioConfig:
    section = doc.get("scenario", doc)
    if not isinstance(section, dict):
        raise InputError(path, "[scenario] must be a table")
    return build(path, ScenarioConfig, section)
