"""Metrics for comparing learned image representations from embedding matrices."""

from repmetric._core import (
    LinearProbe,
    RepmetricError,
    augmentation_invariance,
    greedy_accuracy,
    hungarian_accuracy,
    kmeans,
    knn_classify,
    linear_cka,
    nn_graph_overlap,
    prediction_agreement,
    tolerance,
    train_probe,
    uniformity,
)

__version__ = "0.1.0"

__all__ = [
    "LinearProbe",
    "RepmetricError",
    "augmentation_invariance",
    "greedy_accuracy",
    "hungarian_accuracy",
    "kmeans",
    "knn_classify",
    "linear_cka",
    "nn_graph_overlap",
    "prediction_agreement",
    "tolerance",
    "train_probe",
    "uniformity",
]
