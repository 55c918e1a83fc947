"""Rank aggregation, fitness-scored subset search, and recursive ranker elimination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .classify import (
    CLASSES,
    LOG_2PI,
    binary_weighted_f1,
    shrunk_covariance,
    stratified_folds,
)
from .errors import ValidationError
from .ranking import RankVector, to_rank_vector
from .validation import as_binary_labels, as_float_matrix, require_both_classes


def fitness(f1_mean: float, subset_size: int, total_features: int) -> float:
    """Mean CV F1 plus a smallness bonus of (1 - subset_size/total_features)."""
    if not 1 <= subset_size <= total_features:
        raise ValidationError("subset_size must lie in 1..total_features")
    if not 0 <= f1_mean <= 1:
        raise ValidationError("f1_mean must lie in [0, 1]")
    return float(f1_mean) + (1.0 - subset_size / total_features)


@dataclass(frozen=True)
class SubsetEvaluation:
    """One scored feature subset; ``features`` is ordered best-first."""

    features: tuple[str, ...]
    f1_mean: float
    f1_std: float
    fitness: float

    def to_json_dict(self) -> dict:
        return {
            "features": list(self.features),
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "fitness": self.fitness,
        }


@dataclass(frozen=True)
class RreRound:
    members: tuple[str, ...]
    best: SubsetEvaluation
    eliminated: str | None

    def to_json_dict(self) -> dict:
        return {
            "members": list(self.members),
            "best": self.best.to_json_dict(),
            "eliminated": self.eliminated,
        }


@dataclass(frozen=True)
class EliminationTrace:
    rounds: tuple[RreRound, ...]
    winner_members: tuple[str, ...]
    winner: SubsetEvaluation
    n_evaluations: int

    def to_json_dict(self) -> dict:
        return {
            "rounds": [r.to_json_dict() for r in self.rounds],
            "winner_members": list(self.winner_members),
            "winner": self.winner.to_json_dict(),
            "n_evaluations": self.n_evaluations,
        }


class SubsetCvScorer:
    """Cross-validated QDA F1 for many feature subsets of one dataset.

    Per-fold class means and full covariance matrices are computed once; each
    subset evaluation then slices the relevant block and refolds only the
    Cholesky factor. This is what keeps nested subset sweeps and the
    metaheuristic search affordable, and it reproduces ``cross_validate``
    (same folds, same model) up to floating-point noise.
    """

    def __init__(self, x, y, folds: int = 10, seed: int = 0, shrinkage: float = 1e-6):
        x = as_float_matrix(x)
        y = as_binary_labels(y, x.shape[0])
        require_both_classes(y)
        if shrinkage < 0:
            raise ValidationError("shrinkage must be non-negative")
        self.x = x
        self.y = y
        self.folds = folds
        self.shrinkage = shrinkage
        self.n_features = x.shape[1]
        self.fold_ids = stratified_folds(y, folds, seed)
        d = self.n_features
        self._folds = []
        for f in range(folds):
            train = self.fold_ids != f
            test_idx = np.flatnonzero(~train)
            n_train = int(train.sum())
            per_class = []
            for c in CLASSES:
                xc = x[train & (y == c)]
                if xc.shape[0] < 2:
                    raise ValidationError(
                        f"fold {f}: class {c} needs at least 2 training samples"
                    )
                per_class.append(
                    (
                        xc.mean(axis=0),
                        np.cov(xc, rowvar=False, ddof=1).reshape(d, d),
                        float(np.log(xc.shape[0] / n_train)),
                    )
                )
            self._folds.append((x[test_idx], y[test_idx], per_class))

    def score(self, subset) -> tuple[float, float]:
        """(f1_mean, f1_std) of the QDA CV restricted to the given columns."""
        subset = np.asarray(subset, dtype=int)
        if subset.ndim != 1 or subset.size == 0:
            raise ValidationError("subset must be a non-empty 1-D index array")
        if np.unique(subset).size != subset.size:
            raise ValidationError("subset contains repeated columns")
        if subset.min() < 0 or subset.max() >= self.n_features:
            raise ValidationError("subset index out of range")
        k = subset.size
        scores = np.empty(self.folds)
        for f, (x_test_full, y_test, per_class) in enumerate(self._folds):
            x_test = x_test_full[:, subset]
            ll = np.empty((x_test.shape[0], len(CLASSES)))
            for c, (mean, cov, log_prior) in enumerate(per_class):
                sub_cov = shrunk_covariance(cov[np.ix_(subset, subset)], self.shrinkage)
                try:
                    chol = np.linalg.cholesky(sub_cov)
                except np.linalg.LinAlgError:
                    raise ValidationError(
                        f"fold {f}: singular covariance for class {c}; increase shrinkage"
                    ) from None
                z = solve_triangular(chol, (x_test - mean[subset]).T, lower=True)
                maha = np.einsum("ij,ij->j", z, z)
                log_det = 2.0 * np.log(np.diag(chol)).sum()
                ll[:, c] = log_prior - 0.5 * (maha + log_det + k * LOG_2PI)
            pred = np.argmax(ll, axis=1)
            scores[f] = binary_weighted_f1(y_test, pred)
        return float(scores.mean()), float(scores.std())


def aggregate_ranks(vectors: Sequence[RankVector]) -> RankVector:
    """Mean-rank aggregation; lower mean rank wins, ties keep column order."""
    if not vectors:
        raise ValidationError("need at least one rank vector")
    names = vectors[0].feature_names
    for v in vectors[1:]:
        if v.feature_names != names:
            raise ValidationError("rank vectors cover different feature sets")
    mean_rank = np.mean([v.ranks for v in vectors], axis=0)
    return to_rank_vector(mean_rank, names, descending=False)


def evaluate_nested_subsets(
    ranking: RankVector,
    x,
    y,
    cv_seed: int = 0,
    max_k: int | None = None,
    folds: int = 10,
    shrinkage: float = 1e-6,
    scorer: SubsetCvScorer | None = None,
    total_features: int | None = None,
) -> SubsetEvaluation:
    """Sweep the top-k subsets of a ranking and return the fitness maximizer.

    Ties in fitness resolve toward the smaller subset. The smallness term is
    measured against ``total_features``, which defaults to the stage's own
    feature count; a stage evaluating a handful of derived features can pass
    the size of the pool they were selected from instead.
    """
    if scorer is None:
        scorer = SubsetCvScorer(x, y, folds=folds, seed=cv_seed, shrinkage=shrinkage)
    n = len(ranking.feature_names)
    if n != scorer.n_features:
        raise ValidationError("ranking does not match the matrix width")
    if max_k is None:
        max_k = n
    if not 1 <= max_k <= n:
        raise ValidationError("max_k must lie in 1..n_features")
    if total_features is None:
        total_features = n
    if total_features < n:
        raise ValidationError("total_features cannot be below the feature count")
    order_idx = np.argsort(ranking.ranks, kind="stable")
    best = None
    for k in range(1, max_k + 1):
        f1_mean, f1_std = scorer.score(order_idx[:k])
        fit = fitness(f1_mean, k, total_features)
        if best is None or fit > best.fitness:
            features = tuple(ranking.feature_names[i] for i in order_idx[:k])
            best = SubsetEvaluation(features, f1_mean, f1_std, fit)
    return best


def recursive_ranker_elimination(
    rank_vectors: Mapping[str, RankVector],
    x,
    y,
    cv_seed: int = 0,
    max_k: int | None = None,
    folds: int = 10,
    shrinkage: float = 1e-6,
    total_features: int | None = None,
) -> EliminationTrace:
    """Shrink the ranker ensemble one member at a time, tracking each round's best.

    Every round aggregates the remaining rankings and records the best nested
    subset. To descend, each member is tentatively left out and the remaining
    aggregate is re-evaluated; the member whose removal yields the highest
    fitness is dropped (ties drop the alphabetically last name), and that
    evaluation becomes the next round's best. The overall winner is the
    highest-fitness round, with ties going to the smaller ensemble.
    """
    if not rank_vectors:
        raise ValidationError("need at least one ranker")
    scorer = SubsetCvScorer(x, y, folds=folds, seed=cv_seed, shrinkage=shrinkage)
    evaluations = 0

    def evaluate(members: list[str]) -> SubsetEvaluation:
        nonlocal evaluations
        evaluations += 1
        aggregate = aggregate_ranks([rank_vectors[m] for m in members])
        return evaluate_nested_subsets(
            aggregate, x, y, max_k=max_k, scorer=scorer, total_features=total_features
        )

    members = list(rank_vectors)
    current = evaluate(members)
    rounds: list[RreRound] = []
    while True:
        if len(members) == 1:
            rounds.append(RreRound(tuple(members), current, None))
            break
        candidates = {
            m: evaluate([other for other in members if other != m]) for m in members
        }
        drop = max(members, key=lambda m: (candidates[m].fitness, m))
        rounds.append(RreRound(tuple(members), current, drop))
        members = [m for m in members if m != drop]
        current = candidates[drop]

    winner_round = rounds[0]
    for r in rounds[1:]:
        if r.best.fitness >= winner_round.best.fitness:
            winner_round = r
    return EliminationTrace(
        tuple(rounds), winner_round.members, winner_round.best, evaluations
    )
