"""Metrics, PCA export, and sensitivity reporting."""

from .metrics import MetricsReport, class_metrics, topk_accuracy
from .pca import export_pca_csv, pca_project
from .sensitivity import sensitivity_report

__all__ = [
    "MetricsReport",
    "class_metrics",
    "export_pca_csv",
    "pca_project",
    "sensitivity_report",
    "topk_accuracy",
]
