"""Input validation helpers used by the estimators and pipeline stages."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def as_float_matrix(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_binary_labels(y, n_samples: int | None = None, name: str = "y") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{name} must contain only class labels 0 and 1")
    if n_samples is not None and arr.shape[0] != n_samples:
        raise ValidationError(f"{name} has {arr.shape[0]} labels for {n_samples} samples")
    return arr.astype(int)


def require_both_classes(y, name: str = "y") -> None:
    if np.unique(y).size < 2:
        raise ValidationError(f"{name} must contain both classes")


def check_feature_names(names, n_features: int) -> tuple[str, ...]:
    names = tuple(str(n) for n in names)
    if len(names) != n_features:
        raise ValidationError(f"{len(names)} feature names for {n_features} features")
    if len(set(names)) != len(names):
        seen, dup = set(), None
        for n in names:
            if n in seen:
                dup = n
                break
            seen.add(n)
        raise ValidationError(f"duplicate feature name: {dup!r}")
    return names
