"""From-scratch classifiers: bagged Gini trees and an RBF-kernel SVM.

forest   random forest with OOB tracking and permutation importances
svm      RBF support vector machine trained by sequential minimal optimisation
tuning   stratified cross-validated grid search over either family
io       JSON model persistence
"""

from .forest import (
    RFHyperParams,
    RFModel,
    predict_rf,
    predict_rf_batch,
    rf_permutation_importance,
    train_rf,
)
from .svm import (
    SVMHyperParams,
    SVMModel,
    decision_function,
    predict_svm,
    predict_svm_batch,
    rbf_kernel,
    train_svm,
)
from .tuning import (
    DEFAULT_C_GRID,
    DEFAULT_SIGMA_GRID,
    CVEntry,
    GridSearchResult,
    GridSpec,
    grid_search,
)
from .io import load_model, save_model

__all__ = [
    "RFHyperParams", "RFModel", "train_rf", "predict_rf", "predict_rf_batch",
    "rf_permutation_importance",
    "SVMHyperParams", "SVMModel", "train_svm", "predict_svm",
    "predict_svm_batch", "decision_function", "rbf_kernel",
    "GridSpec", "GridSearchResult", "CVEntry", "grid_search",
    "DEFAULT_SIGMA_GRID", "DEFAULT_C_GRID",
    "save_model", "load_model",
]
