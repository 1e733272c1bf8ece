"""Principal component analysis via SVD of the mean-centered data.

Components are rows, orthonormal, ordered by decreasing explained variance
(sample variance, ddof=1).  Each component's sign is fixed so its largest-
magnitude entry is positive, which keeps projections reproducible across
runs and platforms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, UsageError

__all__ = ["PcaModel", "fit_pca", "project", "save_pca", "load_pca"]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray                # (H,)
    components: np.ndarray          # (n_components, H) orthonormal rows
    explained_variance: np.ndarray  # (n_components,) descending

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def _as_matrix(data) -> np.ndarray:
    """Accept an EmbeddingSet-like object (has .matrix()) or a 2-d array."""
    if hasattr(data, "matrix"):
        return data.matrix()
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise UsageError(f"expected a 2-d point matrix, got shape {arr.shape}")
    return arr


def fit_pca(data, n_components: int) -> PcaModel:
    X = _as_matrix(data)
    n, width = X.shape
    if n < 2:
        raise UsageError("PCA needs at least 2 samples")
    if not 1 <= n_components <= min(width, n):
        raise UsageError(
            f"n_components={n_components} must lie in [1, min(width={width}, "
            f"n={n})]"
        )
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:n_components].copy()
    explained = (s[:n_components] ** 2) / (n - 1)
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def project(model: PcaModel, data) -> np.ndarray:
    """Project points onto the components; a single vector maps to a vector."""
    arr = data
    if hasattr(arr, "matrix"):
        arr = arr.matrix()
    arr = np.asarray(arr, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.mean.shape[0]:
        raise UsageError(
            f"points have shape {arr.shape}, expected (*, {model.mean.shape[0]})"
        )
    out = (arr - model.mean) @ model.components.T
    return out[0] if single else out


def save_pca(model: PcaModel, path) -> None:
    doc = {
        "mean": [float(v) for v in model.mean],
        "components": [[float(v) for v in row] for row in model.components],
        "explained_variance": [float(v) for v in model.explained_variance],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_pca(path) -> PcaModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid PCA JSON: {exc}") from exc
    try:
        model = PcaModel(
            mean=np.array(doc["mean"], dtype=np.float64),
            components=np.array(doc["components"], dtype=np.float64),
            explained_variance=np.array(
                doc["explained_variance"], dtype=np.float64
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid PCA JSON: {exc}") from exc
    if model.components.ndim != 2 or model.components.shape[1] != model.mean.shape[0]:
        raise DataError(f"{path}: component matrix does not match mean width")
    return model
