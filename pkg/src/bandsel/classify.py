"""Gaussian quadratic discriminant classification and stratified CV scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import ValidationError
from .validation import as_binary_labels, as_float_matrix, require_both_classes

CLASSES = (0, 1)
LOG_2PI = float(np.log(2.0 * np.pi))


def binary_weighted_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Weighted F1 from raw confusion counts; assumes validated 0/1 arrays.

    Per-class F1 is 2TP / (2TP + FP + FN), taken as 0 when the denominator
    vanishes, then weighted by true-class support.
    """
    true1 = y_true == 1
    pred1 = y_pred == 1
    tp1 = int(np.count_nonzero(true1 & pred1))
    fp1 = int(np.count_nonzero(~true1 & pred1))
    fn1 = int(np.count_nonzero(true1 & ~pred1))
    n = y_true.shape[0]
    tp0 = n - tp1 - fp1 - fn1
    den1 = 2 * tp1 + fp1 + fn1
    den0 = 2 * tp0 + fn1 + fp1
    f1_pos = 2 * tp1 / den1 if den1 else 0.0
    f1_neg = 2 * tp0 / den0 if den0 else 0.0
    n_pos = tp1 + fn1
    return ((n - n_pos) * f1_neg + n_pos * f1_pos) / n


def weighted_f1(y_true, y_pred) -> float:
    """Support-weighted mean of per-class F1; undefined components count as 0."""
    y_true = as_binary_labels(y_true, name="y_true")
    y_pred = as_binary_labels(y_pred, name="y_pred")
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValidationError("y_true and y_pred must be equal-length, non-empty 1-D arrays")
    return binary_weighted_f1(y_true, y_pred)


def shrunk_covariance(cov: np.ndarray, shrinkage: float) -> np.ndarray:
    """Add a scaled-identity ridge, shrinkage * (trace/d) * I."""
    d = cov.shape[0]
    if shrinkage > 0:
        return cov + shrinkage * (np.trace(cov) / d) * np.eye(d)
    return cov


class QdaClassifier(BaseEstimator, ClassifierMixin):
    """Two-class Gaussian classifier with class-specific covariances.

    Each class gets its sample mean and sample covariance (plus the shrinkage
    ridge), and priors equal to the class frequencies. Prediction maximizes
    log prior + Gaussian log density; exact ties go to class 0.
    """

    def __init__(self, shrinkage: float = 1e-6):
        self.shrinkage = shrinkage

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_binary_labels(y, X.shape[0])
        require_both_classes(y)
        if self.shrinkage < 0:
            raise ValidationError("shrinkage must be non-negative")
        d = X.shape[1]
        means, chols, log_priors = [], [], []
        for c in CLASSES:
            xc = X[y == c]
            if xc.shape[0] < 2:
                raise ValidationError(f"class {c} needs at least 2 samples")
            cov = np.cov(xc, rowvar=False, ddof=1).reshape(d, d)
            cov = shrunk_covariance(cov, self.shrinkage)
            try:
                chols.append(np.linalg.cholesky(cov))
            except np.linalg.LinAlgError:
                raise ValidationError(
                    f"singular covariance for class {c}; increase shrinkage"
                ) from None
            means.append(xc.mean(axis=0))
            log_priors.append(np.log(xc.shape[0] / X.shape[0]))
        self.n_features_in_ = d
        self.classes_ = np.asarray(CLASSES)
        self.means_ = np.vstack(means)
        self.log_priors_ = np.asarray(log_priors)
        self._chols = chols
        return self

    def _check_input(self, X):
        if not hasattr(self, "means_"):
            raise ValidationError("QdaClassifier is not fitted")
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X

    def log_likelihoods(self, X) -> np.ndarray:
        """Per-class joint log density, log prior + log N(x; mean, cov)."""
        X = self._check_input(X)
        d = self.n_features_in_
        out = np.empty((X.shape[0], len(CLASSES)))
        for c in CLASSES:
            chol = self._chols[c]
            z = solve_triangular(chol, (X - self.means_[c]).T, lower=True)
            maha = np.einsum("ij,ij->j", z, z)
            log_det = 2.0 * np.log(np.diag(chol)).sum()
            out[:, c] = self.log_priors_[c] - 0.5 * (maha + log_det + d * LOG_2PI)
        return out

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.log_likelihoods(X), axis=1)


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold ids from a seeded shuffle within each class, dealt round-robin.

    Keeps every fold's class counts within one sample of perfect proportion.
    """
    y = as_binary_labels(y)
    if n_folds < 2:
        raise ValidationError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold = np.empty(y.shape[0], dtype=int)
    for c in sorted(np.unique(y)):
        idx = np.flatnonzero(y == c)
        if idx.size < n_folds:
            raise ValidationError(f"class {c} has {idx.size} samples for {n_folds} folds")
        perm = rng.permutation(idx)
        fold[perm] = np.arange(idx.size) % n_folds
    return fold


@dataclass(frozen=True)
class CvResult:
    fold_scores: tuple[float, ...]
    f1_mean: float
    f1_std: float


def cross_validate(
    x, y, folds: int = 10, seed: int = 0, shrinkage: float = 1e-6
) -> CvResult:
    """Stratified k-fold CV of the QDA classifier, scored by weighted F1.

    Features are expected to arrive already normalized by the calling stage;
    no per-fold refit of normalization statistics happens here.
    """
    x = as_float_matrix(x)
    y = as_binary_labels(y, x.shape[0])
    fold = stratified_folds(y, folds, seed)
    scores = []
    for f in range(folds):
        train = fold != f
        model = QdaClassifier(shrinkage=shrinkage).fit(x[train], y[train])
        scores.append(weighted_f1(y[~train], model.predict(x[~train])))
    arr = np.asarray(scores)
    return CvResult(tuple(scores), float(arr.mean()), float(arr.std()))
