"""Bring source data closer to the target before transfer.

Covariate shift is corrected by resampling source rows in proportion to
the ratio of smoothed target/source profile frequencies; class imbalance by
stratified resampling to the target's positive fraction.  Feature selection
keeps the columns that are Wald-significant when a dataset is fit on itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import DataError, Dataset, FeatureName, project_dataset
from .featurize import profile_ids
from .learn import LearnerError, fit_dataset

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0


class ConvergenceError(LearnerError):
    """The self-fit used for feature selection did not converge."""

    def __init__(self, message, classifier=None):
        super().__init__(message)
        self.classifier = classifier


@dataclass(frozen=True, eq=False)
class ProfileWeightTable:
    """Density-ratio weight of every distinct source profile.

    ``profiles`` is a (K_s, F) 0/1 array; ``weights[k]`` belongs to
    ``profiles[k]``.  ``row_profile`` maps each source row to its profile.
    """

    profiles: np.ndarray
    weights: np.ndarray
    row_profile: np.ndarray
    alpha: float
    n_profiles_total: int

    def weight_of(self, x) -> float:
        x = np.asarray(x, dtype=np.uint8)
        hit = np.all(self.profiles == x, axis=1)
        if not hit.any():
            raise KeyError("profile not present in source")
        return float(self.weights[np.argmax(hit)])


def profile_weights(source: Dataset, target: Dataset, alpha: float = DEFAULT_ALPHA) -> ProfileWeightTable:
    """Laplace-smoothed ratio P_t(x) / P_s(x) for every source profile x.

    Frequencies are ``(count(x) + alpha) / (n + alpha * K)`` with ``K`` the
    number of distinct profiles across both datasets.  Row weights act as
    counts.
    """
    if source.space != target.space:
        raise DataError("source and target must share a feature space; align and project first")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    ids, k = profile_ids(np.vstack([source.X, target.X]))
    s_ids, t_ids = ids[: source.n], ids[source.n:]
    s_count = np.bincount(s_ids, weights=source.w, minlength=k)
    t_count = np.bincount(t_ids, weights=target.w, minlength=k)
    p_s = (s_count + alpha) / (source.w.sum() + alpha * k)
    p_t = (t_count + alpha) / (target.w.sum() + alpha * k)
    present = np.unique(s_ids)
    first_row = np.full(k, -1)
    first_row[s_ids[::-1]] = np.arange(source.n)[::-1]
    remap = np.full(k, -1)
    remap[present] = np.arange(present.size)
    return ProfileWeightTable(
        profiles=source.X[first_row[present]],
        weights=(p_t / p_s)[present],
        row_profile=remap[s_ids],
        alpha=alpha,
        n_profiles_total=k,
    )


def _draw(rng: np.random.Generator, probs: np.ndarray, m: int) -> np.ndarray:
    probs = probs / probs.sum()
    return rng.choice(probs.size, size=m, replace=True, p=probs)


def covariate_shift_resample(
    source: Dataset,
    target: Dataset,
    m: int,
    rng: np.random.Generator,
    alpha: float = DEFAULT_ALPHA,
    features=None,
) -> Dataset:
    """Draw ``m`` source rows with replacement, weighted toward the target's profile mix.

    Profiles are taken over ``features`` when given (typically the features
    both studies share), otherwise over the common space of the two
    datasets.  Drawn rows keep all their columns; output weights are 1.
    """
    if m <= 0:
        raise ValueError(f"sample size must be positive, got {m}")
    if source.n == 0:
        raise DataError("empty source dataset")
    if features is not None:
        table = profile_weights(project_dataset(source, features), project_dataset(target, features), alpha)
    else:
        table = profile_weights(source, target, alpha)
    probs = table.weights[table.row_profile] * source.w
    if probs.sum() <= 0:
        raise DataError("source rows all have zero weight")
    return source.take(_draw(rng, probs, m), reset_weights=True)


def stratified_counts(m: int, positive_fraction: float) -> tuple[int, int]:
    pos = int(math.floor(m * positive_fraction + 0.5))
    return pos, m - pos


def class_balance_resample(
    source: Dataset,
    target: Dataset,
    m: int,
    rng: np.random.Generator,
) -> Dataset:
    """Draw ``m`` source rows so the positive share matches the target's.

    Within a class, rows are drawn proportionally to their weights.
    Positives come first in the output, then negatives.
    """
    if m <= 0:
        raise ValueError(f"sample size must be positive, got {m}")
    if target.n == 0:
        raise DataError("empty target dataset")
    n_pos, n_neg = stratified_counts(m, float(target.y.mean()))
    picks = []
    for label, count in ((1, n_pos), (0, n_neg)):
        if count == 0:
            continue
        rows = np.flatnonzero((source.y == label) & (source.w > 0))
        if rows.size == 0:
            raise DataError(f"missing class {label} in source")
        picks.append(rows[_draw(rng, source.w[rows], count)])
    return source.take(np.concatenate(picks), reset_weights=True)


@dataclass(frozen=True)
class SignificanceReport:
    """Outcome of a self-fit: ranked ``(feature, coefficient, p)`` rows plus degeneracies.

    ``aliased`` lists features that are exact linear combinations of the
    intercept and earlier columns; they get no p-value and are never
    selected.  ``ridge_used`` is nonzero when the fit separated.
    """

    table: tuple[tuple[FeatureName, float, float], ...]
    aliased: tuple[FeatureName, ...]
    ridge_used: float

    def selected(self, p_threshold: float = 0.05) -> list[FeatureName]:
        return [f for f, _, p in self.table if p < p_threshold]


def select_significant_features(d: Dataset, p_threshold: float = 0.05) -> list[FeatureName]:
    """Features with two-sided Wald p-value below ``p_threshold`` in a self-fit.

    Ordered by ascending p-value (ties keep column order).  Raises
    :class:`~symptransfer.learn.SingleClassError` for single-class data and
    :class:`ConvergenceError` when the fit does not converge.
    """
    return significance_report(d).selected(p_threshold)


def significance_table(d: Dataset) -> list[tuple[FeatureName, float, float]]:
    """``(feature, coefficient, p)`` for every testable feature, sorted by p."""
    return list(significance_report(d).table)


def significance_report(d: Dataset) -> SignificanceReport:
    if d.n < 2:
        raise DataError("need at least 2 rows")
    clf = fit_dataset(d)
    if not clf.converged:
        raise ConvergenceError(
            f"self-fit did not converge after {clf.iterations} iterations "
            f"(gradient norm {clf.grad_norm:.3g}, ridge {clf.ridge_used:g})",
            clf,
        )
    if clf.p is None:
        raise ConvergenceError("information matrix is singular; no Wald statistics", clf)
    rows = [
        (f, float(clf.coef[j]), float(clf.p[j]))
        for j, f in enumerate(d.space)
        if not np.isnan(clf.p[j])
    ]
    order = sorted(range(len(rows)), key=lambda i: (rows[i][2], i))
    aliased = tuple(d.space.features[j] for j in clf.aliased)
    if aliased:
        log.debug("%d aliased feature(s) in %s", len(aliased), d.provenance or "dataset")
    return SignificanceReport(tuple(rows[i] for i in order), aliased, clf.ridge_used)
