"""Context-vector analysis: PCA, clustering, classification, monitoring."""
from .kmeans import ClusterModel, assign, kmeans, load_clusters, save_clusters
from .monitor import (
    ClusterChangeEvent,
    StateMonitor,
    monitor,
    read_events,
    write_events,
)
from .pca import PcaModel, fit_pca, load_pca, project, save_pca
from .svm import (
    PairClassifier,
    RbfSvmModel,
    classify,
    decision_grid,
    fit_svm,
    load_svm,
    rbf_kernel,
    save_svm,
)
from .vectors import (
    EmbeddingSet,
    extract_embeddings,
    load_embeddings,
    save_embeddings,
    trajectory_smoothness,
)

__all__ = [
    "ClusterModel",
    "ClusterChangeEvent",
    "EmbeddingSet",
    "PairClassifier",
    "PcaModel",
    "RbfSvmModel",
    "StateMonitor",
    "assign",
    "classify",
    "decision_grid",
    "extract_embeddings",
    "fit_pca",
    "fit_svm",
    "kmeans",
    "load_clusters",
    "load_embeddings",
    "load_pca",
    "load_svm",
    "monitor",
    "project",
    "rbf_kernel",
    "read_events",
    "save_clusters",
    "save_embeddings",
    "save_pca",
    "save_svm",
    "trajectory_smoothness",
    "write_events",
]
