"""Delay-coordinate reconstruction of series into supervised windows.

A window with dimension D and lag T collects [x(t-(D-1)T), ..., x(t-T), x(t)]
per feature, stored oldest to newest so recurrent layers consume time
forwards.  Targets are the next `horizons` values of feature column 0.
Contiguous mode takes D consecutive points (equivalent to lag 1) for parity
with pipelines that quote a nominal lag but window contiguously.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .numerics import Rng


@dataclass(frozen=True)
class EmbeddingConfig:
    dimension: int = 6
    lag: int = 2
    horizons: int = 4
    contiguous: bool = False

    def __post_init__(self):
        if self.dimension < 1 or self.lag < 1 or self.horizons < 1:
            raise ValueError(
                f"dimension, lag and horizons must all be >= 1, got "
                f"D={self.dimension}, T={self.lag}, MSA={self.horizons}")

    @property
    def effective_lag(self) -> int:
        return 1 if self.contiguous else self.lag

    @property
    def span(self) -> int:
        """Days covered by one input window minus one."""
        return (self.dimension - 1) * self.effective_lag

    @property
    def min_length(self) -> int:
        return self.span + self.horizons + 1


@dataclass(frozen=True)
class EmbeddedDataset:
    """Input windows (n x D x F), targets (n x MSA), and per-sample anchor
    dates (calendar date of each window's newest element)."""

    inputs: np.ndarray
    targets: np.ndarray
    anchor_dates: np.ndarray | None = None

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.targets.ndim != 2 \
                or self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"inconsistent dataset arrays: inputs {self.inputs.shape}, "
                f"targets {self.targets.shape}")
        if self.anchor_dates is not None \
                and len(self.anchor_dates) != self.inputs.shape[0]:
            raise ValueError("anchor_dates length mismatch")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def features(self) -> int:
        return self.inputs.shape[2]

    def subset(self, indices) -> "EmbeddedDataset":
        idx = np.asarray(indices, dtype=np.int64)
        anchors = None if self.anchor_dates is None else self.anchor_dates[idx]
        return EmbeddedDataset(self.inputs[idx], self.targets[idx], anchors)


def takens_embed(series: np.ndarray, cfg: EmbeddingConfig,
                 start_date: dt.date | None = None) -> EmbeddedDataset:
    """Reconstruct a (time x F) matrix into windows and multi-step targets.

    Targets for the window anchored at index j are column 0 at j+1 .. j+MSA.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    n_time = series.shape[0]
    if n_time < cfg.min_length:
        raise ValueError(
            f"series length {n_time} too short for embedding: need at least "
            f"{cfg.min_length} points (D={cfg.dimension}, "
            f"T={cfg.effective_lag}, MSA={cfg.horizons})")

    lag, span, msa = cfg.effective_lag, cfg.span, cfg.horizons
    n_samples = n_time - span - msa
    inputs = np.empty((n_samples, cfg.dimension, series.shape[1]))
    targets = np.empty((n_samples, msa))
    for k in range(n_samples):
        j = span + k  # index of the window's newest element
        inputs[k] = series[j - span:j + 1:lag, :]
        targets[k] = series[j + 1:j + 1 + msa, 0]

    anchors = None
    if start_date is not None:
        anchors = np.array(
            [start_date + dt.timedelta(days=span + k) for k in range(n_samples)],
            dtype=object)
    return EmbeddedDataset(inputs, targets, anchors)


def static_split(ds: EmbeddedDataset,
                 boundary: dt.date) -> tuple[EmbeddedDataset, EmbeddedDataset]:
    """Chronological partition: samples whose target block starts on or
    before `boundary` train, the rest test.  Order is preserved."""
    if ds.anchor_dates is None:
        raise ValueError("static_split requires a dataset with anchor dates")
    target_starts = np.array([d + dt.timedelta(days=1) for d in ds.anchor_dates])
    train_mask = target_starts <= boundary
    if not train_mask.any():
        raise ValueError(
            f"boundary {boundary} precedes every target date "
            f"({target_starts[0]}..{target_starts[-1]}): empty training set")
    idx = np.arange(len(ds))
    return ds.subset(idx[train_mask]), ds.subset(idx[~train_mask])


def derive_train_fraction(ds: EmbeddedDataset, boundary: dt.date) -> float:
    """Train fraction that makes a random split match the static split size."""
    train, _ = static_split(ds, boundary)
    return len(train) / len(ds)


def random_split(ds: EmbeddedDataset, train_fraction: float,
                 rng: Rng) -> tuple[EmbeddedDataset, EmbeddedDataset]:
    """Seeded shuffle; the first floor(n * fraction) samples train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    perm = rng.permutation(len(ds))
    k = math.floor(len(ds) * train_fraction)
    return ds.subset(perm[:k]), ds.subset(perm[k:])
