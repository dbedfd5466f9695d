"""Cross-study transfer learning for predicting infection from binary symptom data."""

from .adapt import Method, MethodOutcome, MethodSpec
from .core import Dataset, FeatureAlignment, FeatureName, FeatureSpace, align_spaces, project_dataset
from .learn import TrainedClassifier, auc, fit_logistic, predict_prob

__all__ = [
    "Dataset",
    "FeatureAlignment",
    "FeatureName",
    "FeatureSpace",
    "Method",
    "MethodOutcome",
    "MethodSpec",
    "TrainedClassifier",
    "align_spaces",
    "auc",
    "fit_logistic",
    "predict_prob",
    "project_dataset",
]
