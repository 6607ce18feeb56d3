"""CSV ingestion, normalisation and seeded splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DomainError
from ..glm_sc import GlmDataset
from ..mech_core import RandomSource, sample_noise
from ..ops_linreg import RegressionDataset
from ..pate_ptr import VoteHistogram

__all__ = [
    "IngestError",
    "Splits",
    "read_numeric_csv",
    "split_indices",
    "project_rows",
    "ingest_csv",
    "synthetic_regression",
    "synthetic_classification",
    "read_histograms",
]


class IngestError(DomainError):
    """A CSV cell or header could not be interpreted; the message carries row and column."""


@dataclass(frozen=True)
class Splits:
    train: object
    validation: object
    test: object
    indices: tuple


def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    """Headered all-numeric CSV.  Row numbers in errors count the header as row 1."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: file is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestError(f"{path}: row {lineno}, column {col!r}: {cell!r} is not numeric") from None
                if not math.isfinite(v):
                    raise IngestError(f"{path}: row {lineno}, column {col!r}: {cell!r} is not finite")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def split_indices(n: int, seed: int):
    """Seeded 60/10/30 split; sizes ``floor(0.6 n)``, ``floor(0.1 n)`` and the rest."""
    perm = RandomSource(seed).permutation(n)
    a, b = (6 * n) // 10, n // 10
    return perm[:a], perm[a : a + b], perm[a + b :]


def project_rows(X: np.ndarray) -> np.ndarray:
    """Scale rows with norm above one back onto the unit sphere; idempotent."""
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.maximum(norms, 1.0)


def ingest_csv(
    path,
    target_column: str,
    seed: int = 0,
    task: str = "regression",
    zscore: bool = True,
    normalize_target: bool = True,
) -> Splits:
    """Load a CSV into train/validation/test datasets.

    Features are z-scored with train-split statistics (unless ``zscore`` is
    false) and every row is projected into the unit ball.  For regression
    the target is mapped affinely so the train split spans ``[-1, 1]``; for
    classification it must take exactly two values, mapped to -1 and +1.
    """
    header, data = read_numeric_csv(path)
    if target_column not in header:
        raise IngestError(f"{path}: target column {target_column!r} not in header {header}")
    t = header.index(target_column)
    y = data[:, t]
    X = np.delete(data, t, axis=1)
    if X.shape[1] == 0:
        raise IngestError(f"{path}: no feature columns besides the target")
    tr, va, te = split_indices(X.shape[0], seed)
    if len(tr) == 0:
        raise IngestError(f"{path}: too few rows for a train split")
    if zscore:
        mu = X[tr].mean(axis=0)
        sd = X[tr].std(axis=0)
        X = (X - mu) / np.where(sd > 0, sd, 1.0)
    X = project_rows(X)

    if task == "regression":
        if normalize_target:
            lo, hi = y[tr].min(), y[tr].max()
            mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
            y = (y - mid) / (half if half > 0 else 1.0)

        def make(idx):
            if len(idx) == 0:
                return None
            return RegressionDataset(X[idx], y[idx], 1.0, max(float(np.abs(y[idx]).max()), 1e-12))

    elif task == "classification":
        levels = np.unique(y)
        if len(levels) != 2:
            raise IngestError(f"{path}: column {target_column!r} has {len(levels)} distinct values, expected 2")
        y = np.where(y == levels[1], 1.0, -1.0)

        def make(idx):
            return GlmDataset(X[idx], y[idx]) if len(idx) else None

    else:
        raise DomainError(f"unknown task {task!r}")
    return Splits(make(tr), make(va), make(te), (tr, va, te))


def _unit_rows(rng: RandomSource, n: int, d: int) -> np.ndarray:
    X = sample_noise("gaussian", 1.0, rng, size=(n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def synthetic_regression(n: int, d: int, rng: RandomSource, noise: float = 0.1) -> RegressionDataset:
    """Unit-norm Gaussian directions, a fixed linear signal plus noise, targets clipped to [-1, 1]."""
    X = _unit_rows(rng.substream(0), n, d)
    w = np.linspace(1.5, -1.5, d) if d > 1 else np.ones(1)
    y = np.clip(X @ w + sample_noise("gaussian", noise, rng.substream(1), size=n), -1.0, 1.0)
    return RegressionDataset(X, y, 1.0, 1.0)


def synthetic_classification(n: int, d: int, rng: RandomSource, flip: float = 0.05) -> GlmDataset:
    """Labels from a fixed separating direction with a fraction ``flip`` of them flipped."""
    X = _unit_rows(rng.substream(0), n, d)
    w = np.linspace(1.0, -1.0, d) if d > 1 else np.ones(1)
    y = np.where(X @ w >= 0, 1.0, -1.0)
    y = np.where(rng.substream(1).uniform(n) < flip, -y, y)
    return GlmDataset(X, y)


def read_histograms(path) -> list:
    """One query per row, one count column per class."""
    header, data = read_numeric_csv(path)
    out = []
    for i, row in enumerate(data, start=2):
        try:
            out.append(VoteHistogram(tuple(row)))
        except DomainError as exc:
            raise IngestError(f"{path}: row {i}: {exc}") from None
    return out
