"""Six base feature rankers behind one sklearn-style interface.

Each ranker fits on a feature matrix with binary labels and exposes
``ranking_``, a permutation of 1..n_features with 1 = most informative, plus
the underlying ``scores_``. Ties always resolve in favor of the earlier
column, so reruns and reordered suites reproduce bit-identical rankings.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.ensemble import RandomForestClassifier
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import lasso_path
from sklearn.svm import LinearSVC

from .classify import CLASSES
from .ensemble import SubsetCvScorer, fitness
from .errors import ConvergenceError, ValidationError
from .ranking import RankVector, dense_ranks, to_rank_vector  # noqa: F401  (re-export)
from .utils import seed_for
from .validation import (
    as_binary_labels,
    as_float_matrix,
    check_feature_names,
    require_both_classes,
)

RANKER_NAMES = ("SelectKBest", "ReliefF", "SVM-RFE", "CCSA", "LASSO", "Random Forest")


class FeatureRanker(BaseEstimator):
    """Base class: fit(X, y) must set ``scores_`` and ``ranking_``."""

    def fit(self, X, y):
        raise NotImplementedError

    def _finalize(self, scores, descending: bool = True):
        self.scores_ = np.asarray(scores, dtype=float)
        self.ranking_ = dense_ranks(self.scores_, descending=descending)
        return self

    def rank_vector(self, feature_names=None) -> RankVector:
        if not hasattr(self, "ranking_"):
            raise ValidationError(f"{type(self).__name__} is not fitted")
        if feature_names is None:
            feature_names = [f"f{j}" for j in range(self.ranking_.size)]
        names = check_feature_names(feature_names, self.ranking_.size)
        return RankVector(names, self.ranking_.copy())

    def _validate(self, X, y):
        X = as_float_matrix(X)
        y = as_binary_labels(y, X.shape[0])
        require_both_classes(y)
        return X, y


class AnovaFRanker(FeatureRanker):
    """Ranks by the one-way ANOVA F statistic between the two classes.

    A feature that is constant within both classes but separates them gets
    an infinite F; a fully constant feature gets 0.
    """

    def fit(self, X, y):
        X, y = self._validate(X, y)
        x0, x1 = X[y == 0], X[y == 1]
        n0, n1 = x0.shape[0], x1.shape[0]
        if min(n0, n1) < 2:
            raise ValidationError("each class needs at least 2 samples")
        grand = X.mean(axis=0)
        m0, m1 = x0.mean(axis=0), x1.mean(axis=0)
        ss_between = n0 * (m0 - grand) ** 2 + n1 * (m1 - grand) ** 2
        ss_within = ((x0 - m0) ** 2).sum(axis=0) + ((x1 - m1) ** 2).sum(axis=0)
        ms_within = ss_within / (n0 + n1 - 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(
                ms_within > 0,
                np.divide(ss_between, ms_within, out=np.zeros_like(grand), where=ms_within > 0),
                np.where(ss_between > 0, np.inf, 0.0),
            )
        self.f_statistic_ = f
        return self._finalize(f)


class ReliefFRanker(FeatureRanker):
    """ReliefF weights from range-scaled Manhattan nearest hits and misses.

    For each visited instance, the k nearest same-class neighbors pull each
    feature's weight down by their mean absolute difference, and the k
    nearest other-class neighbors push it up, weighted by the miss class's
    prior relative to the instance's own class. Constant features keep a
    weight of exactly zero.
    """

    def __init__(self, k_neighbors: int = 10, n_iterations: int | None = None,
                 random_state: int = 0):
        self.k_neighbors = k_neighbors
        self.n_iterations = n_iterations
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        k = self.k_neighbors
        if k < 1:
            raise ValidationError("k_neighbors must be positive")
        counts = {c: int((y == c).sum()) for c in CLASSES}
        for c, n_c in counts.items():
            if n_c < k + 1:
                raise ValidationError(
                    f"class {c} has {n_c} samples; needs at least k_neighbors+1={k + 1}"
                )
        n, d = X.shape
        ranges = X.max(axis=0) - X.min(axis=0)
        scale = np.where(ranges > 0, ranges, 1.0)
        xs = X / scale
        dist = cdist(xs, xs, "cityblock")
        np.fill_diagonal(dist, np.inf)
        neighbor_order = np.argsort(dist, axis=1, kind="stable")

        if self.n_iterations is None or self.n_iterations >= n:
            visited = np.arange(n)
        else:
            if self.n_iterations < 1:
                raise ValidationError("n_iterations must be positive")
            rng = np.random.default_rng(seed_for(self.random_state, "relieff"))
            visited = np.sort(rng.choice(n, size=self.n_iterations, replace=False))

        priors = {c: counts[c] / n for c in CLASSES}
        weights = np.zeros(d)
        for i in visited:
            neigh = neighbor_order[i]
            neigh_y = y[neigh]
            hits = neigh[neigh_y == y[i]][:k]
            weights -= np.abs(xs[i] - xs[hits]).mean(axis=0)
            for c in CLASSES:
                if c == y[i]:
                    continue
                misses = neigh[neigh_y == c][:k]
                coeff = priors[c] / (1.0 - priors[y[i]])
                weights += coeff * np.abs(xs[i] - xs[misses]).mean(axis=0)
        weights /= visited.size
        self.weights_ = weights
        return self._finalize(weights)


class SvmRfeRanker(FeatureRanker):
    """Recursive feature elimination driven by linear soft-margin SVM weights.

    Each round trains the SVM (squared-hinge loss, dual coordinate descent)
    on the surviving columns and removes the feature(s) with the smallest
    squared weight: 1 per round at or below ``batch_threshold`` survivors,
    otherwise floor(elim_fraction * remaining). Rank is the reverse removal
    order, so the last survivor is 1.
    """

    def __init__(self, c: float = 1.0, elim_fraction: float = 0.1,
                 batch_threshold: int = 50, tol: float = 1e-4,
                 max_iter: int = 10_000, random_state: int = 0):
        self.c = c
        self.elim_fraction = elim_fraction
        self.batch_threshold = batch_threshold
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        if not 0 <= self.elim_fraction < 1:
            raise ValidationError("elim_fraction must lie in [0, 1)")
        n, d = X.shape
        remaining = list(range(d))
        removal_order: list[int] = []
        round_no = 0
        while len(remaining) > 1:
            # squared hinge: the dual solver stalls on near-duplicate columns
            # with plain hinge, which windows produce by construction
            svm = LinearSVC(
                C=self.c,
                loss="squared_hinge",
                dual=True,
                tol=self.tol,
                max_iter=self.max_iter,
                random_state=seed_for(self.random_state, "svm-rfe", round_no) % (2**31),
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", category=ConvergenceWarning)
                svm.fit(X[:, remaining], y)
            n_iter = int(np.max(svm.n_iter_))
            if n_iter >= self.max_iter:
                raise ConvergenceError(
                    f"linear SVM did not converge within {n_iter} iterations"
                )
            sq_weights = np.ravel(svm.coef_) ** 2
            if len(remaining) > self.batch_threshold:
                batch = max(1, int(self.elim_fraction * len(remaining)))
            else:
                batch = 1
            batch = min(batch, len(remaining) - 1)
            # smallest weight goes first; weight ties drop the later column
            by_weakness = sorted(
                range(len(remaining)), key=lambda t: (sq_weights[t], -remaining[t])
            )[:batch]
            removed = [remaining[t] for t in by_weakness]
            removal_order.extend(removed)
            remaining = [col for col in remaining if col not in set(removed)]
            round_no += 1
        sequence = removal_order + remaining
        ranking = np.empty(d, dtype=int)
        for pos, col in enumerate(sequence):
            ranking[col] = d - pos
        self.ranking_ = ranking
        self.scores_ = -ranking.astype(float)
        return self


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


class CcsaRanker(FeatureRanker):
    """Chaotic crow search over binary feature masks, ranked by lifetime.

    Mask fitness is the cross-validated QDA F1 of the active features plus
    the subset-smallness bonus. Crows either follow a random crow's memory
    (with the step binarized through a sigmoid transfer) or relocate to a
    random mask when that crow is aware; the awareness probability is
    modulated each iteration by a logistic chaotic map. A feature's score is
    the number of iterations it spent inside the best mask seen so far.
    """

    def __init__(self, n_crows: int = 20, n_iterations: int = 100,
                 flight_length: float = 2.0, awareness_probability: float = 0.1,
                 chaos_init: float = 0.7, cv_folds: int = 10,
                 shrinkage: float = 1e-6, random_state: int = 0):
        self.n_crows = n_crows
        self.n_iterations = n_iterations
        self.flight_length = flight_length
        self.awareness_probability = awareness_probability
        self.chaos_init = chaos_init
        self.cv_folds = cv_folds
        self.shrinkage = shrinkage
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        n, d = X.shape
        if d < 2:
            raise ValidationError("crow search needs at least 2 features")
        if self.n_crows < 1 or self.n_iterations < 1:
            raise ValidationError("population and iteration counts must be positive")
        if not 0 <= self.awareness_probability <= 1:
            raise ValidationError("awareness_probability must lie in [0, 1]")
        if not 0 < self.chaos_init < 1:
            raise ValidationError("chaos_init must lie in (0, 1)")

        scorer = SubsetCvScorer(
            X, y, folds=self.cv_folds,
            seed=seed_for(self.random_state, "ccsa-cv"), shrinkage=self.shrinkage,
        )
        rng = np.random.default_rng(seed_for(self.random_state, "ccsa"))
        memo: dict[bytes, float] = {}

        def mask_fitness(mask: np.ndarray) -> float:
            key = mask.tobytes()
            if key not in memo:
                active = np.flatnonzero(mask)
                f1_mean, _ = scorer.score(active)
                memo[key] = fitness(f1_mean, active.size, d)
            return memo[key]

        def repair(masks: np.ndarray) -> None:
            for i in np.flatnonzero(~masks.any(axis=1)):
                masks[i, rng.integers(d)] = True

        positions = rng.random((self.n_crows, d)) < 0.5
        repair(positions)
        memory = positions.copy()
        memory_fitness = np.array([mask_fitness(row) for row in memory])

        lifetime = np.zeros(d)
        chaos = self.chaos_init
        for _ in range(self.n_iterations):
            chaos = 4.0 * chaos * (1.0 - chaos)
            # chaos averages 0.5 over the logistic map, so this keeps the
            # long-run awareness probability at its configured value
            ap_t = min(1.0, self.awareness_probability * 2.0 * chaos)
            followed = rng.integers(self.n_crows, size=self.n_crows)
            flight_r = rng.random(self.n_crows)
            aware_r = rng.random(self.n_crows)
            u = rng.random((self.n_crows, d))

            pos_f = positions.astype(float)
            step = self.flight_length * flight_r[:, None] * (
                memory[followed].astype(float) - pos_f
            )
            follow_bits = u < _sigmoid(pos_f + step)
            random_bits = u < 0.5
            new_positions = np.where((aware_r >= ap_t)[:, None], follow_bits, random_bits)
            repair(new_positions)

            new_fitness = np.array([mask_fitness(row) for row in new_positions])
            positions = new_positions
            improved = new_fitness > memory_fitness
            memory[improved] = new_positions[improved]
            memory_fitness[improved] = new_fitness[improved]

            gbest = int(np.argmax(memory_fitness))
            lifetime += memory[gbest]

        gbest = int(np.argmax(memory_fitness))
        self.best_mask_ = memory[gbest].copy()
        self.best_fitness_ = float(memory_fitness[gbest])
        self.lifetime_ = lifetime
        return self._finalize(lifetime)


class LassoPathRanker(FeatureRanker):
    """Ranks by activation order along a geometric L1 regularization path.

    The path starts at the smallest penalty that zeroes every coefficient,
    lambda_max = max_j |x_j^T (y - mean(y))| / n, and descends geometrically
    to lambda_max * eps. A feature's score is the penalty at which its
    coefficient first becomes nonzero; features that never activate keep
    their original column order after all active ones.
    """

    def __init__(self, n_alphas: int = 100, eps: float = 1e-3, max_iter: int = 5000):
        self.n_alphas = n_alphas
        self.eps = eps
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = self._validate(X, y)
        if self.n_alphas < 2:
            raise ValidationError("n_alphas must be at least 2")
        if not 0 < self.eps < 1:
            raise ValidationError("eps must lie in (0, 1)")
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        if np.abs(mu).max() > 1e-6 or np.abs(sd - 1).max() > 1e-6:
            raise ValidationError(
                "features must be z-normalized (mean 0, std 1) before LASSO ranking"
            )
        n = X.shape[0]
        y_centered = y.astype(float) - y.mean()
        lam_max = float(np.abs(X.T @ y_centered).max() / n)
        if lam_max == 0:
            scores = np.full(X.shape[1], -np.inf)
        else:
            alphas = lam_max * np.power(
                self.eps, np.arange(self.n_alphas) / (self.n_alphas - 1)
            )
            with warnings.catch_warnings():
                # near-duplicate columns converge slowly at the smallest
                # penalties; activation order is settled long before that
                warnings.simplefilter("ignore", category=ConvergenceWarning)
                _, coefs, _ = lasso_path(
                    X, y_centered, alphas=alphas, max_iter=self.max_iter
                )
            active = coefs != 0
            ever_active = active.any(axis=1)
            first_idx = np.where(ever_active, np.argmax(active, axis=1), 0)
            scores = np.where(ever_active, alphas[first_idx], -np.inf)
            self.alphas_ = alphas
            self.path_coefs_ = coefs
        self.activation_alphas_ = scores
        return self._finalize(scores)


class RandomForestRanker(FeatureRanker):
    """Ranks by Gini impurity-decrease importance from a bagged CART forest."""

    def __init__(self, n_trees: int = 500, random_state: int = 0):
        self.n_trees = n_trees
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        if self.n_trees < 1:
            raise ValidationError("n_trees must be positive")
        forest = RandomForestClassifier(
            n_estimators=self.n_trees,
            criterion="gini",
            max_features="sqrt",
            bootstrap=True,
            min_samples_leaf=1,
            n_jobs=1,
            random_state=seed_for(self.random_state, "forest") % (2**32),
        ).fit(X, y)
        self.importances_ = forest.feature_importances_
        return self._finalize(self.importances_)


@dataclass
class RankerConfig:
    """Per-method hyperparameters plus the suite seed.

    The dict for a method is passed to the estimator's constructor, so keys
    must match its parameters; an explicit ``random_state`` there overrides
    the seed derived from ``seed``.
    """

    select_k_best: dict = field(default_factory=dict)
    relieff: dict = field(default_factory=dict)
    svm_rfe: dict = field(default_factory=dict)
    ccsa: dict = field(default_factory=dict)
    lasso: dict = field(default_factory=dict)
    random_forest: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "select_k_best": dict(self.select_k_best),
            "relieff": dict(self.relieff),
            "svm_rfe": dict(self.svm_rfe),
            "ccsa": dict(self.ccsa),
            "lasso": dict(self.lasso),
            "random_forest": dict(self.random_forest),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RankerConfig":
        return cls(**data)


def build_ranker_suite(
    config: RankerConfig | None = None, seed: int | None = None
) -> dict[str, FeatureRanker]:
    """The six base rankers, each with a name-derived child seed."""
    cfg = config or RankerConfig()
    root = cfg.seed if seed is None else seed

    def seeded(params: dict, name: str) -> dict:
        return {"random_state": seed_for(root, name), **params}

    return {
        "SelectKBest": AnovaFRanker(**cfg.select_k_best),
        "ReliefF": ReliefFRanker(**seeded(cfg.relieff, "ReliefF")),
        "SVM-RFE": SvmRfeRanker(**seeded(cfg.svm_rfe, "SVM-RFE")),
        "CCSA": CcsaRanker(**seeded(cfg.ccsa, "CCSA")),
        "LASSO": LassoPathRanker(**cfg.lasso),
        "Random Forest": RandomForestRanker(**seeded(cfg.random_forest, "Random Forest")),
    }


def rank_all(
    suite: dict[str, FeatureRanker], x, y, feature_names, threads: int = 1
) -> dict[str, RankVector]:
    """Fit every ranker on the same inputs; results keyed by ranker name.

    With threads > 1 the rankers run concurrently; each one's seed is fixed
    by name, so the result never depends on scheduling.
    """

    def run(name: str) -> RankVector:
        return suite[name].fit(x, y).rank_vector(feature_names)

    if threads <= 1:
        return {name: run(name) for name in suite}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {name: pool.submit(run, name) for name in suite}
        return {name: futures[name].result() for name in suite}
