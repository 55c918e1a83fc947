"""Feature rank vectors shared by the base rankers and the ensemble stages."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .validation import check_feature_names


@dataclass(frozen=True)
class RankVector:
    """A full ranking of features: a permutation of 1..N, 1 = most informative."""

    feature_names: tuple[str, ...]
    ranks: np.ndarray

    def __post_init__(self):
        names = check_feature_names(self.feature_names, len(self.feature_names))
        ranks = np.asarray(self.ranks, dtype=int)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "ranks", ranks)
        n = len(names)
        if ranks.shape != (n,) or not np.array_equal(np.sort(ranks), np.arange(1, n + 1)):
            raise ValidationError("ranks must be a permutation of 1..N aligned to names")

    def order(self) -> tuple[str, ...]:
        """Feature names sorted best-first."""
        idx = np.argsort(self.ranks, kind="stable")
        return tuple(self.feature_names[i] for i in idx)

    def rank_of(self, name: str) -> int:
        return int(self.ranks[self.feature_names.index(name)])

    def to_mapping(self) -> dict[str, int]:
        return {n: int(r) for n, r in zip(self.feature_names, self.ranks)}

    def to_csv_text(self) -> str:
        lines = ["feature,rank"]
        lines.extend(f"{n},{int(r)}" for n, r in zip(self.feature_names, self.ranks))
        return "\n".join(lines) + "\n"


def dense_ranks(scores, descending: bool = True) -> np.ndarray:
    """1..N ranks from scores; ties keep the earlier position first."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise ValidationError("scores must be a non-empty 1-D array")
    if np.isnan(scores).any():
        raise ValidationError("scores contain NaN; every feature must be scored")
    key = -scores if descending else scores
    order = np.argsort(key, kind="stable")
    ranks = np.empty(scores.size, dtype=int)
    ranks[order] = np.arange(1, scores.size + 1)
    return ranks


def to_rank_vector(scores, feature_names=None, descending: bool = True) -> RankVector:
    """Build a RankVector from per-feature scores (mapping or aligned array)."""
    if isinstance(scores, Mapping):
        if feature_names is None:
            feature_names = list(scores)
        names = check_feature_names(feature_names, len(feature_names))
        missing = [n for n in names if n not in scores]
        if missing:
            raise ValidationError(f"unscored features: {missing[:5]}")
        values = np.asarray([scores[n] for n in names], dtype=float)
    else:
        values = np.asarray(scores, dtype=float)
        if feature_names is None:
            feature_names = [f"f{j}" for j in range(values.size)]
        names = check_feature_names(feature_names, values.size)
    return RankVector(names, dense_ranks(values, descending=descending))
