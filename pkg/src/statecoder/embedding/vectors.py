"""Context-vector sets: extraction, persistence and trajectory geometry."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..dataset import WindowSample, stack_windows
from ..errors import DataError, UsageError
from ..neuralcore.model import (
    AutoencoderParams,
    ContextVector,
    _encode_batch,
)

__all__ = [
    "EmbeddingSet",
    "extract_embeddings",
    "trajectory_smoothness",
    "save_embeddings",
    "load_embeddings",
]


@dataclass
class EmbeddingSet:
    """Context vectors of consecutive windows, ordered by window start."""

    vectors: list[ContextVector]

    def __post_init__(self):
        starts = [v.window_start for v in self.vectors]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise UsageError("window starts must be strictly increasing")
        widths = {v.values.shape[0] for v in self.vectors}
        if len(widths) > 1:
            raise UsageError("context vectors must share one length")

    def __len__(self) -> int:
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        """(n, H) matrix of vector values (0 x 0 when empty)."""
        if not self.vectors:
            return np.zeros((0, 0))
        return np.stack([v.values for v in self.vectors])

    def starts(self) -> np.ndarray:
        return np.array([v.window_start for v in self.vectors], dtype=np.int64)


def extract_embeddings(
    params: AutoencoderParams,
    windows: list[WindowSample],
    chunk: int = 512,
) -> EmbeddingSet:
    """Encode every window (dropout off) into its context vector."""
    if not windows:
        return EmbeddingSet(vectors=[])
    X = stack_windows(windows)
    contexts = np.empty((X.shape[0], params.hidden_size))
    for lo in range(0, X.shape[0], chunk):
        contexts[lo : lo + chunk] = _encode_batch(params, X[lo : lo + chunk]).ctx
    return EmbeddingSet(
        vectors=[
            ContextVector(values=contexts[i], window_start=w.start_index)
            for i, w in enumerate(windows)
        ]
    )


def trajectory_smoothness(
    embeddings, n_pairs: int = 10_000, seed: int = 0
) -> float:
    """Mean consecutive-pair distance over mean random non-consecutive distance.

    Values well below 1 mean the trajectory moves in small steps relative to
    the cloud's overall spread; i.i.d. vectors score about 1.  The random
    baseline uses ``n_pairs`` seeded draws of index pairs (i, j) with
    |i - j| > 1.
    """
    X = embeddings.matrix() if hasattr(embeddings, "matrix") else np.asarray(
        embeddings, dtype=np.float64
    )
    n = X.shape[0]
    if n < 3:
        raise UsageError("need at least 3 vectors to measure smoothness")
    consecutive = float(np.mean(np.linalg.norm(X[1:] - X[:-1], axis=1)))

    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n, size=n_pairs)
    bad = np.abs(i - j) <= 1
    while np.any(bad):  # redraw collisions/adjacent picks deterministically
        i[bad] = rng.integers(0, n, size=int(bad.sum()))
        j[bad] = rng.integers(0, n, size=int(bad.sum()))
        bad = np.abs(i - j) <= 1
    baseline = float(np.mean(np.linalg.norm(X[i] - X[j], axis=1)))
    if baseline == 0.0:
        return 0.0  # all vectors coincide; perfectly smooth
    return consecutive / baseline


def save_embeddings(embeddings: EmbeddingSet, path) -> None:
    """CSV export: window_start column followed by H value columns."""
    X = embeddings.matrix()
    width = X.shape[1] if len(embeddings) else 0
    header = ["window_start"] + [f"c{i:03d}" for i in range(width)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for vec in embeddings.vectors:
            cells = [str(vec.window_start)] + [repr(float(v)) for v in vec.values]
            fh.write(",".join(cells) + "\n")


def load_embeddings(path) -> EmbeddingSet:
    try:
        fh = open(path, "r", newline="")
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty embeddings file") from None
        if not header or header[0] != "window_start":
            raise DataError(f"{path}: missing window_start column")
        vectors: list[ContextVector] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(header)} cells, "
                    f"got {len(row)}"
                )
            try:
                start = int(row[0])
                values = np.array([float(c) for c in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            vectors.append(ContextVector(values=values, window_start=start))
    return EmbeddingSet(vectors=vectors)
