"""Correlation windows over adjacent wavelengths and training-stat normalization.

Windows are grouped on the training correlation matrix only and then applied
unchanged to any table on the same wavelength grid, so no test-set statistic
ever reaches a fitted artifact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import SpectraTable
from .errors import ValidationError
from .utils import fmt_nm
from .validation import as_float_matrix, check_feature_names


@dataclass(frozen=True)
class Window:
    """One contiguous run of mutually correlated wavelength columns."""

    first_nm: float
    last_nm: float
    midpoint_nm: float
    member_indices: tuple[int, ...]

    @property
    def name(self) -> str:
        return fmt_nm(self.midpoint_nm)

    @property
    def width_nm(self) -> float:
        return self.last_nm - self.first_nm


@dataclass(frozen=True)
class WindowMap:
    """Ordered windows jointly covering every wavelength column exactly once."""

    threshold_rho: float
    windows: tuple[Window, ...]

    def __post_init__(self):
        if not 0 < self.threshold_rho <= 1:
            raise ValidationError("threshold_rho must lie in (0, 1]")
        covered = []
        for w in self.windows:
            idx = list(w.member_indices)
            if idx != list(range(idx[0], idx[-1] + 1)):
                raise ValidationError("window member indices must be consecutive")
            if not w.first_nm <= w.midpoint_nm <= w.last_nm:
                raise ValidationError("window midpoint must lie between first and last")
            if w.midpoint_nm != (w.first_nm + w.last_nm) / 2:
                raise ValidationError("window midpoint must be (first + last)/2")
            covered.extend(idx)
        if covered != list(range(len(covered))):
            raise ValidationError("windows must cover all columns exactly once, in order")

    @property
    def n_features(self) -> int:
        return sum(len(w.member_indices) for w in self.windows)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(w.name for w in self.windows)

    def to_json_dict(self) -> dict:
        return {
            "threshold": self.threshold_rho,
            "windows": [
                {
                    "first": w.first_nm,
                    "last": w.last_nm,
                    "midpoint": w.midpoint_nm,
                    "indices": list(w.member_indices),
                }
                for w in self.windows
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "WindowMap":
        windows = tuple(
            Window(w["first"], w["last"], w["midpoint"], tuple(w["indices"]))
            for w in data["windows"]
        )
        return cls(data["threshold"], windows)


def _zero_variance_columns(x: np.ndarray) -> np.ndarray:
    # a constant column of e.g. 0.2 accumulates ~1e-17 of rounding noise,
    # so "zero" is judged relative to the column's magnitude
    stds = x.std(axis=0)
    scale = np.maximum(1.0, np.abs(x.mean(axis=0)))
    return np.flatnonzero(stds <= 1e-12 * scale)


def correlation_matrix(x, feature_names=None) -> np.ndarray:
    """Pearson correlations between columns; rejects zero-variance columns."""
    x = as_float_matrix(x)
    if x.shape[0] < 2:
        raise ValidationError("correlation needs at least 2 samples")
    zero = _zero_variance_columns(x)
    if zero.size:
        label = feature_names[zero[0]] if feature_names is not None else f"#{zero[0]}"
        raise ValidationError(f"zero-variance column {label}")
    corr = np.corrcoef(x, rowvar=False)
    corr = np.asarray(corr, dtype=float).reshape(x.shape[1], x.shape[1])
    corr = (corr + corr.T) / 2.0
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def build_windows(corr, wavelengths_nm, threshold_rho: float = 0.99) -> WindowMap:
    """Greedy left-to-right grouping under complete linkage.

    The next column joins the open window only if its correlation with every
    member already in the window exceeds threshold_rho; otherwise it starts a
    new window. This guarantees every within-window pair is correlated above
    the threshold and prevents chaining across weakly related wavelengths.
    """
    if not 0 < threshold_rho <= 1:
        raise ValidationError("threshold_rho must lie in (0, 1]")
    corr = np.asarray(corr, dtype=float)
    wavelengths = np.asarray(wavelengths_nm, dtype=float)
    d = wavelengths.shape[0]
    if corr.shape != (d, d):
        raise ValidationError(
            f"correlation matrix shape {corr.shape} does not match {d} wavelengths"
        )
    bounds = []
    start = 0
    for j in range(1, d):
        if not (corr[j, start:j] > threshold_rho).all():
            bounds.append((start, j))
            start = j
    bounds.append((start, d))
    windows = []
    for lo, hi in bounds:
        first, last = float(wavelengths[lo]), float(wavelengths[hi - 1])
        windows.append(Window(first, last, (first + last) / 2, tuple(range(lo, hi))))
    return WindowMap(threshold_rho, tuple(windows))


def apply_windows(table, window_map: WindowMap, wavelengths_nm=None) -> np.ndarray:
    """Average each window's member columns into one feature per window.

    Accepts a SpectraTable or a plain matrix (with optional wavelengths for
    grid validation). Output columns follow window order and are named by the
    window midpoints.
    """
    if isinstance(table, SpectraTable):
        x, wl = table.reflectance, table.wavelengths_nm
    else:
        x = as_float_matrix(table)
        wl = None if wavelengths_nm is None else np.asarray(wavelengths_nm, dtype=float)
    if window_map.n_features != x.shape[1]:
        raise ValidationError(
            f"matrix has {x.shape[1]} columns but the window map covers "
            f"{window_map.n_features}"
        )
    if wl is not None:
        for w in window_map.windows:
            if (
                abs(wl[w.member_indices[0]] - w.first_nm) > 1e-9
                or abs(wl[w.member_indices[-1]] - w.last_nm) > 1e-9
            ):
                raise ValidationError(
                    f"wavelength grid does not match window {w.name}"
                )
    starts = np.array([w.member_indices[0] for w in window_map.windows])
    sizes = np.array([len(w.member_indices) for w in window_map.windows], dtype=float)
    return np.add.reduceat(x, starts, axis=1) / sizes


@dataclass(frozen=True)
class Normalizer:
    """Per-feature training mean and population std for z-scoring."""

    feature_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        n = len(self.feature_names)
        if means.shape != (n,) or stds.shape != (n,):
            raise ValidationError("normalizer statistics are not parallel to names")
        if not (np.isfinite(means).all() and np.isfinite(stds).all() and (stds > 0).all()):
            raise ValidationError("normalizer stds must be finite and positive")


def fit_normalizer(x, feature_names=None) -> Normalizer:
    x = as_float_matrix(x)
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(x.shape[1])]
    names = check_feature_names(feature_names, x.shape[1])
    zero = _zero_variance_columns(x)
    if zero.size:
        raise ValidationError(f"zero-variance feature {names[zero[0]]!r}")
    return Normalizer(names, x.mean(axis=0), x.std(axis=0))


def apply_normalizer(norm: Normalizer, x, feature_names=None) -> np.ndarray:
    x = as_float_matrix(x)
    if x.shape[1] != len(norm.feature_names):
        raise ValidationError(
            f"matrix has {x.shape[1]} columns but the normalizer expects "
            f"{len(norm.feature_names)}"
        )
    if feature_names is not None:
        names = check_feature_names(feature_names, x.shape[1])
        if names != norm.feature_names:
            raise ValidationError("feature names do not match the normalizer")
    return (x - norm.means) / norm.stds


class CorrelationWindower(BaseEstimator, TransformerMixin):
    """Transformer that learns correlation windows and averages them."""

    def __init__(self, threshold_rho: float = 0.99):
        self.threshold_rho = threshold_rho

    def fit(self, X, y=None, *, wavelengths_nm=None):
        if wavelengths_nm is None:
            raise ValidationError("wavelengths_nm is required to fit")
        X = as_float_matrix(X)
        names = [fmt_nm(w) for w in wavelengths_nm]
        self.correlation_matrix_ = correlation_matrix(X, names)
        self.window_map_ = build_windows(
            self.correlation_matrix_, wavelengths_nm, self.threshold_rho
        )
        return self

    def transform(self, X):
        if not hasattr(self, "window_map_"):
            raise ValidationError("CorrelationWindower is not fitted")
        return apply_windows(X, self.window_map_)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.window_map_.feature_names, dtype=object)


class FeatureNormalizer(BaseEstimator, TransformerMixin):
    """Transformer that z-scores with the statistics of the fit matrix."""

    def fit(self, X, y=None, *, feature_names=None):
        self.normalizer_ = fit_normalizer(X, feature_names)
        return self

    def transform(self, X):
        if not hasattr(self, "normalizer_"):
            raise ValidationError("FeatureNormalizer is not fitted")
        return apply_normalizer(self.normalizer_, X)
