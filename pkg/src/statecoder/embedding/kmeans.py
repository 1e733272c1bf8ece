"""Lloyd's k-means with k-means++ seeding.

Assignments break ties toward the lowest centroid index, empty clusters are
re-seeded to the point farthest from its assigned centroid, and the within-
cluster sum of squares (inertia) is checked to be non-increasing across
iterations.  Fully deterministic for a given seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, UsageError

__all__ = ["ClusterModel", "kmeans", "assign", "save_clusters", "load_clusters"]


@dataclass
class ClusterModel:
    J: int
    centroids: np.ndarray        # (J, d)
    assignments: np.ndarray      # (n,) labels of the training points
    inertia: float
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)


def _dist2(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, J)."""
    diff = points[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def _kmeans_pp(points: np.ndarray, J: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws after a uniform first pick."""
    n = points.shape[0]
    centroids = np.empty((J, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, J):
        total = d2.sum()
        if total <= 0.0:  # all remaining points coincide with a centroid
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random()))
            idx = min(idx, n - 1)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(
    points: np.ndarray,
    centroids: np.ndarray,
    max_iter: int,
    tol: float,
) -> ClusterModel:
    J = centroids.shape[0]
    history: list[float] = []
    labels = np.zeros(points.shape[0], dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _dist2(points, centroids)
        labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
        min_d2 = d2[np.arange(points.shape[0]), labels]
        inertia = float(min_d2.sum())
        if history and inertia > history[-1] * (1.0 + 1e-12) + 1e-12:
            raise AssertionError(
                f"k-means inertia increased: {history[-1]} -> {inertia}"
            )
        history.append(inertia)
        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=J)
        for j in range(J):
            if counts[j] > 0:
                new_centroids[j] = points[labels == j].mean(axis=0)
        spare = min_d2.copy()
        for j in range(J):
            if counts[j] == 0:  # re-seed dead centroid at the worst-fit point
                far = int(np.argmax(spare))
                new_centroids[j] = points[far]
                spare[far] = -1.0
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break
    # sync assignments and inertia with the final centroids
    d2 = _dist2(points, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(points.shape[0]), labels].sum())
    if history and inertia <= history[-1]:
        history.append(inertia)
    return ClusterModel(
        J=J,
        centroids=centroids,
        assignments=labels,
        inertia=inertia,
        n_iter=n_iter,
        inertia_history=history,
    )


def kmeans(
    points,
    J: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterModel:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise UsageError(f"points must be a 2-d matrix, got shape {points.shape}")
    if J < 1:
        raise UsageError("J must be at least 1")
    if points.shape[0] < J:
        raise UsageError(
            f"cannot form {J} clusters from {points.shape[0]} points"
        )
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(points, J, rng)
    return _lloyd(points, centroids, max_iter=max_iter, tol=tol)


def assign(model: ClusterModel, points) -> np.ndarray:
    """Nearest-centroid labels for new points (ties to the lowest index)."""
    points = np.asarray(points, dtype=np.float64)
    single = points.ndim == 1
    if single:
        points = points[None, :]
    if points.shape[1] != model.centroids.shape[1]:
        raise UsageError(
            f"points have width {points.shape[1]}, centroids have "
            f"{model.centroids.shape[1]}"
        )
    labels = np.argmin(_dist2(points, model.centroids), axis=1)
    return labels[0] if single else labels


def save_clusters(model: ClusterModel, path) -> None:
    doc = {
        "J": int(model.J),
        "centroids": [[float(v) for v in row] for row in model.centroids],
        "inertia": float(model.inertia),
        "assignments": [int(v) for v in model.assignments],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_clusters(path) -> ClusterModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid cluster JSON: {exc}") from exc
    try:
        model = ClusterModel(
            J=int(doc["J"]),
            centroids=np.array(doc["centroids"], dtype=np.float64),
            assignments=np.array(doc["assignments"], dtype=np.int64),
            inertia=float(doc["inertia"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid cluster JSON: {exc}") from exc
    if model.centroids.shape[0] != model.J:
        raise DataError(f"{path}: centroid count does not match J")
    return model
