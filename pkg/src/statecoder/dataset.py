"""Multichannel series ingestion, scaling, windowing and streaming.

A series is a (T', P) float64 array: one row per time step ("frame"), one
column per sensor channel.  Fixed-length windows of T consecutive rows are
drawn by shifting one step at a time, producing exactly T' - T windows
(window k covers rows k .. k+T-1).  The same windows can be produced online
by pushing frames through a :class:`StreamWindowBuffer`.

Scaling is per-channel z-scoring.  Statistics are meant to be fitted on the
training segment only and then applied everywhere; channels with (near) zero
variance keep their mean but divide by 1.0 so constant channels survive.

Out of scope by design: imputation, resampling and timestamp parsing.  Rows
are assumed to be complete, equally spaced and time-ascending.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, UsageError

__all__ = [
    "SeriesDataset",
    "ScalingStats",
    "WindowSample",
    "SplitSpec",
    "StreamWindowBuffer",
    "load_csv",
    "write_csv",
    "fit_scaler",
    "apply_scaler",
    "invert_scaler",
    "save_scaler",
    "load_scaler",
    "draw_windows",
    "split_windows",
    "stack_windows",
]

# Channels whose fitted std falls below this are treated as constant.
ZERO_VARIANCE_GUARD = 1e-12


def _frozen_array(values, dtype=np.float64, ndim=None) -> np.ndarray:
    """Return a C-contiguous, read-only float64 copy of *values*."""
    arr = np.array(values, dtype=dtype, order="C")
    if ndim is not None and arr.ndim != ndim:
        raise UsageError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SeriesDataset:
    """An ordered multichannel series with named channels.

    Attributes
    ----------
    channel_names : list of str, length P
    frames : read-only (T', P) float64 array, rows in time order
    granularity_minutes : nominal spacing between rows (metadata only)
    """

    channel_names: list[str]
    frames: np.ndarray
    granularity_minutes: float = 5.0

    def __post_init__(self):
        frames = _frozen_array(self.frames, ndim=2)
        object.__setattr__(self, "frames", frames)
        if len(self.channel_names) != frames.shape[1]:
            raise UsageError(
                f"{len(self.channel_names)} channel names for "
                f"{frames.shape[1]} columns"
            )
        if self.granularity_minutes <= 0:
            raise UsageError("granularity_minutes must be positive")

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def n_channels(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class ScalingStats:
    """Per-channel z-score parameters (std pre-guarded, never ~0)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen_array(self.mean, ndim=1))
        object.__setattr__(self, "std", _frozen_array(self.std, ndim=1))
        if self.mean.shape != self.std.shape:
            raise UsageError("mean and std must have identical shapes")

    @property
    def n_channels(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class WindowSample:
    """T consecutive scaled frames starting at ``start_index`` in the source."""

    values: np.ndarray  # (T, P), read-only
    start_index: int

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=2))
        if self.start_index < 0:
            raise UsageError("start_index must be non-negative")


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation split over an ordered window list."""

    train_fraction: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise UsageError("train_fraction must lie strictly between 0 and 1")

    def boundary_index(self, n_windows: int) -> int:
        """First validation index: floor(train_fraction * n_windows)."""
        return int(math.floor(self.train_fraction * n_windows))


def load_csv(path, has_header: bool = True) -> SeriesDataset:
    """Read a comma-separated series: one row per step, one column per channel.

    With ``has_header=False`` channels are auto-named ch000, ch001, ...
    Malformed rows and non-finite cells raise :class:`DataError` naming the
    offending 1-based line number.
    """
    try:
        fh = open(path, "r", newline="")
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        names: list[str] | None = None
        rows: list[list[float]] = []
        n_cols = -1
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue  # ignore blank lines (e.g. trailing newline)
            if names is None and has_header:
                names = [cell.strip() for cell in row]
                n_cols = len(names)
                continue
            if n_cols == -1:
                n_cols = len(row)
            if len(row) != n_cols:
                raise DataError(
                    f"{path}: line {lineno}: expected {n_cols} columns, "
                    f"got {len(row)}"
                )
            try:
                parsed = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            for j, v in enumerate(parsed):
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: line {lineno}: non-finite value {v!r} "
                        f"in column {j}"
                    )
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if names is None:
        names = [f"ch{i:03d}" for i in range(n_cols)]
    return SeriesDataset(channel_names=names, frames=np.array(rows))


def write_csv(dataset: SeriesDataset, path, include_header: bool = True) -> None:
    """Write a dataset in the format :func:`load_csv` reads.

    Floats are rendered with shortest round-trip repr, so a write/read cycle
    reproduces the values exactly.
    """
    with open(path, "w", newline="") as fh:
        if include_header:
            fh.write(",".join(dataset.channel_names) + "\n")
        for row in dataset.frames:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def fit_scaler(dataset: SeriesDataset, fit_range: tuple[int, int]) -> ScalingStats:
    """Fit per-channel mean/std on rows ``fit_range[0]:fit_range[1]``.

    The range is half-open and must be non-empty.  Channels with std below
    ``ZERO_VARIANCE_GUARD`` get std 1.0.
    """
    start, stop = fit_range
    if not (0 <= start < stop <= dataset.length):
        raise UsageError(
            f"fit range [{start}, {stop}) invalid for series of length "
            f"{dataset.length}"
        )
    segment = dataset.frames[start:stop]
    mean = segment.mean(axis=0)
    std = segment.std(axis=0)  # population std: a {-1,+1} channel scales to 1
    std = np.where(std < ZERO_VARIANCE_GUARD, 1.0, std)
    return ScalingStats(mean=mean, std=std)


def _check_channels(stats: ScalingStats, dataset: SeriesDataset) -> None:
    if stats.n_channels != dataset.n_channels:
        raise UsageError(
            f"scaler has {stats.n_channels} channels, dataset has "
            f"{dataset.n_channels}"
        )


def apply_scaler(stats: ScalingStats, dataset: SeriesDataset) -> SeriesDataset:
    """Return a new dataset with every channel z-scored by *stats*."""
    _check_channels(stats, dataset)
    scaled = (dataset.frames - stats.mean) / stats.std
    return SeriesDataset(
        channel_names=list(dataset.channel_names),
        frames=scaled,
        granularity_minutes=dataset.granularity_minutes,
    )


def invert_scaler(stats: ScalingStats, dataset: SeriesDataset) -> SeriesDataset:
    """Undo :func:`apply_scaler`: map scaled values back to raw units."""
    _check_channels(stats, dataset)
    raw = dataset.frames * stats.std + stats.mean
    return SeriesDataset(
        channel_names=list(dataset.channel_names),
        frames=raw,
        granularity_minutes=dataset.granularity_minutes,
    )


def save_scaler(stats: ScalingStats, channel_names: list[str], path) -> None:
    """Persist scaling stats as JSON: {"mean": [...], "std": [...], "channels": [...]}."""
    if len(channel_names) != stats.n_channels:
        raise UsageError("channel name count does not match scaler width")
    doc = {
        "mean": [float(v) for v in stats.mean],
        "std": [float(v) for v in stats.std],
        "channels": list(channel_names),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scaler(path) -> tuple[ScalingStats, list[str]]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid scaler JSON: {exc}") from exc
    try:
        stats = ScalingStats(
            mean=np.array(doc["mean"], dtype=np.float64),
            std=np.array(doc["std"], dtype=np.float64),
        )
        channels = [str(c) for c in doc["channels"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid scaler JSON: {exc}") from exc
    if len(channels) != stats.n_channels:
        raise DataError(f"{path}: channel list does not match mean/std width")
    return stats, channels


def draw_windows(dataset: SeriesDataset, T: int) -> list[WindowSample]:
    """Draw all consecutive windows of length T, shifted by one step.

    Returns exactly ``dataset.length - T`` windows; window k covers rows
    k .. k+T-1.  (The trailing window starting at T'-T is deliberately not
    drawn; the count identity is T' - T.)
    """
    if T < 1:
        raise UsageError("window length must be at least 1")
    if T >= dataset.length:
        raise UsageError("sample length exceeds dataset")
    frames = dataset.frames
    return [
        WindowSample(values=frames[k : k + T], start_index=k)
        for k in range(dataset.length - T)
    ]


def split_windows(
    windows: list[WindowSample], spec: SplitSpec
) -> tuple[list[WindowSample], list[WindowSample]]:
    """Chronological split: first floor(train_fraction * n) windows train."""
    n = len(windows)
    if n < 2:
        raise UsageError("need at least 2 windows to split")
    b = spec.boundary_index(n)
    return windows[:b], windows[b:]


def stack_windows(windows: list[WindowSample]) -> np.ndarray:
    """Stack window values into an (N, T, P) array (empty -> (0, 0, 0))."""
    if not windows:
        return np.zeros((0, 0, 0))
    return np.stack([w.values for w in windows])


class StreamWindowBuffer:
    """Online counterpart of scale-then-:func:`draw_windows`.

    Push raw frames one at a time; each push after the warm-up of T frames
    emits the window ending at the newest frame, scaled with the attached
    stats.  The k-th emission equals ``draw_windows`` window k, so a replay
    of a full series emits every batch window plus one trailing window
    (ending at the final row) that the batch sampler never draws.
    """

    def __init__(self, stats: ScalingStats, T: int):
        if T < 1:
            raise UsageError("window length must be at least 1")
        self.stats = stats
        self.T = T
        self._ring = np.zeros((T, stats.n_channels))
        self._count = 0

    @property
    def n_pushed(self) -> int:
        return self._count

    def push(self, frame) -> WindowSample | None:
        """Scale and append one frame; return a window once T frames are in."""
        vec = np.asarray(frame, dtype=np.float64)
        if vec.shape != (self.stats.n_channels,):
            raise UsageError(
                f"frame has shape {vec.shape}, expected "
                f"({self.stats.n_channels},)"
            )
        if not np.all(np.isfinite(vec)):
            raise DataError(f"non-finite value in frame {self._count}")
        self._ring[self._count % self.T] = (vec - self.stats.mean) / self.stats.std
        self._count += 1
        if self._count < self.T:
            return None
        order = (np.arange(self.T) + self._count) % self.T
        return WindowSample(
            values=self._ring[order], start_index=self._count - self.T
        )
