"""Baseline and the five transfer strategies.

Every ``run_*`` function returns a :class:`MethodOutcome`.  Degenerate
situations (no usable overlap, a fit that does not converge, a test fold
with one class) produce an NA outcome with a reason instead of raising.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, FeatureAlignment, FeatureName, concat, project_dataset
from .learn import LearnerError, TrainedClassifier, auc, fit_logistic, predict_prob

log = logging.getLogger(__name__)

NO_OVERLAP = "no significant overlapping features"
NO_FEATURES = "no significant target features"
NOT_CONVERGED = "learner did not converge"
SINGLE_CLASS_TRAIN = "training data has a single class"
AUC_UNDEFINED = "AUC undefined (single-class test fold)"


class Method(str, enum.Enum):
    BASELINE = "baseline"
    SOURCE_ONLY = "sourceonly"
    UNION = "union"
    FEDA = "feda"
    PRED = "pred"
    LININT = "linint"

    @classmethod
    def parse(cls, text: str) -> "Method":
        key = text.strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        aliases = {"source": cls.SOURCE_ONLY, "lin": cls.LININT, "target": cls.BASELINE}
        try:
            return aliases.get(key) or cls(key)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {text!r} (choose from {choices})") from None

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Method.BASELINE: "Baseline",
    Method.SOURCE_ONLY: "SourceOnly",
    Method.UNION: "Union",
    Method.FEDA: "FEDA",
    Method.PRED: "PRED",
    Method.LININT: "LinInt",
}

TRANSFER_METHODS = (Method.SOURCE_ONLY, Method.UNION, Method.FEDA, Method.PRED, Method.LININT)


@dataclass(frozen=True)
class MethodSpec:
    method: Method
    linint_grid: int = 21
    linint_holdout: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method) if isinstance(self.method, str) else self.method)
        if self.linint_grid < 1:
            raise ValueError("LinInt grid needs at least one point")
        if not 0 < self.linint_holdout < 1:
            raise ValueError("LinInt held-out fraction must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class MethodOutcome:
    scores: np.ndarray | None
    auc: float | None
    na_reason: str | None = None
    info: dict = field(default_factory=dict)

    @property
    def is_na(self) -> bool:
        return self.auc is None


def _na(reason: str, **info) -> MethodOutcome:
    return MethodOutcome(None, None, reason, info)


def _finish(scores: np.ndarray, test_y, **info) -> MethodOutcome:
    value = auc(scores, test_y)
    if value is None:
        return MethodOutcome(scores, None, AUC_UNDEFINED, info)
    return MethodOutcome(scores, value, None, info)


class _Unusable(Exception):
    def __init__(self, reason):
        self.reason = reason


def _fit(X, y, w) -> TrainedClassifier:
    if np.unique(np.asarray(y)[np.asarray(w) > 0]).size < 2:
        raise _Unusable(SINGLE_CLASS_TRAIN)
    try:
        clf = fit_logistic(X, y, w)
    except LearnerError as e:
        raise _Unusable(f"{NOT_CONVERGED}: {e}") from None
    if not clf.converged:
        raise _Unusable(NOT_CONVERGED)
    return clf


def _guard(fn):
    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _Unusable as e:
            return _na(e.reason)

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    wrapped.__wrapped__ = fn
    return wrapped


def source_features(al: FeatureAlignment) -> list[FeatureName]:
    return sorted(al.shared + al.source_only)


def target_features(al: FeatureAlignment) -> list[FeatureName]:
    return sorted(al.shared + al.target_only)


def _shared_or_na(al: FeatureAlignment):
    if not al.shared:
        raise _Unusable(NO_OVERLAP)
    return list(al.shared)


@_guard
def run_baseline(target_train: Dataset, target_test: Dataset, alignment: FeatureAlignment | None = None) -> MethodOutcome:
    """Fit on the target training fold and score its test fold."""
    if alignment is not None:
        keep = target_features(alignment)
        target_train = project_dataset(target_train, keep)
        target_test = project_dataset(target_test, keep)
    if target_train.space.size == 0:
        return _na(NO_FEATURES)
    clf = _fit(target_train.X, target_train.y, target_train.w)
    return _finish(predict_prob(clf, target_test.X), target_test.y, ridge=clf.ridge_used)


def _source_model(source_train: Dataset, shared) -> TrainedClassifier:
    s = project_dataset(source_train, shared)
    return _fit(s.X, s.y, s.w)


@_guard
def run_source_only(source_train: Dataset, target_test: Dataset, alignment: FeatureAlignment) -> MethodOutcome:
    """Fit on source rows over the overlapping features only."""
    shared = _shared_or_na(alignment)
    clf = _source_model(source_train, shared)
    scores = predict_prob(clf, project_dataset(target_test, shared).X)
    return _finish(scores, target_test.y, ridge=clf.ridge_used)


@_guard
def run_union(source_train, target_train, target_test, alignment) -> MethodOutcome:
    """Pool source and target training rows over the overlapping features."""
    shared = _shared_or_na(alignment)
    pooled = concat([project_dataset(source_train, shared), project_dataset(target_train, shared)])
    clf = _fit(pooled.X, pooled.y, pooled.w)
    scores = predict_prob(clf, project_dataset(target_test, shared).X)
    return _finish(scores, target_test.y, ridge=clf.ridge_used)


# -- FEDA ---------------------------------------------------------------------

SOURCE_ORIGIN, TARGET_ORIGIN = 0, 1


@dataclass(frozen=True, eq=False)
class AugmentedDataset:
    """Rows laid out as ``<source block | shared block | target block>``."""

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    origin: np.ndarray
    n_source_block: int
    n_shared_block: int
    n_target_block: int
    columns: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return self.n_source_block + self.n_shared_block + self.n_target_block

    def blocks(self):
        a = self.n_source_block
        b = a + self.n_shared_block
        return self.X[:, :a], self.X[:, a:b], self.X[:, b:]


def _feda_columns(al: FeatureAlignment):
    src, tgt = source_features(al), target_features(al)
    cols = [f"src:{f}" for f in src] + [f"gen:{f}" for f in al.shared] + [f"tgt:{f}" for f in tgt]
    return src, list(al.shared), tgt, tuple(cols)


def _embed(d: Dataset, own, shared, other_width: int, origin: int) -> np.ndarray:
    own_block = project_dataset(d, own).X
    shared_block = project_dataset(d, shared).X
    zeros = np.zeros((d.n, other_width), dtype=np.uint8)
    if origin == SOURCE_ORIGIN:
        return np.hstack([own_block, shared_block, zeros])
    return np.hstack([zeros, shared_block, own_block])


def feda_augment(source: Dataset, target: Dataset, alignment: FeatureAlignment) -> AugmentedDataset:
    """Source rows become ``<x_s, x_ov, 0>``, target rows ``<0, x_ov, x_t>``."""
    src, shared, tgt, cols = _feda_columns(alignment)
    Xs = _embed(source, src, shared, len(tgt), SOURCE_ORIGIN)
    Xt = _embed(target, tgt, shared, len(src), TARGET_ORIGIN)
    return AugmentedDataset(
        X=np.vstack([Xs, Xt]),
        y=np.concatenate([source.y, target.y]),
        w=np.concatenate([source.w, target.w]),
        origin=np.concatenate([np.full(source.n, SOURCE_ORIGIN), np.full(target.n, TARGET_ORIGIN)]).astype(np.uint8),
        n_source_block=len(src),
        n_shared_block=len(shared),
        n_target_block=len(tgt),
        columns=cols,
    )


def feda_embed_target(target: Dataset, alignment: FeatureAlignment) -> np.ndarray:
    src, shared, tgt, _ = _feda_columns(alignment)
    return _embed(target, tgt, shared, len(src), TARGET_ORIGIN)


@_guard
def run_feda(source_train, target_train, target_test, alignment) -> MethodOutcome:
    """Fit on the augmented space; score test rows in their target-origin embedding."""
    aug = feda_augment(source_train, target_train, alignment)
    if aug.n_features == 0:
        return _na(NO_FEATURES)
    clf = _fit(aug.X, aug.y, aug.w)
    scores = predict_prob(clf, feda_embed_target(target_test, alignment))
    return _finish(scores, target_test.y, ridge=clf.ridge_used, n_augmented=aug.n_features)


# -- PRED ---------------------------------------------------------------------

def pred_augment(target: Dataset, alignment: FeatureAlignment, source_model: TrainedClassifier) -> np.ndarray:
    """``[p_s, X_t]``: source-model probability prepended to the target features."""
    p_s = predict_prob(source_model, project_dataset(target, list(alignment.shared)).X)
    own = project_dataset(target, target_features(alignment)).X
    return np.hstack([p_s[:, None], own.astype(float)])


@_guard
def run_pred(source_train, target_train, target_test, alignment, source_model: TrainedClassifier | None = None) -> MethodOutcome:
    """Use the source classifier's probability as one extra target feature."""
    shared = _shared_or_na(alignment)
    if source_model is None:
        source_model = _source_model(source_train, shared)
    Xtr = pred_augment(target_train, alignment, source_model)
    clf = _fit(Xtr, target_train.y, target_train.w)
    scores = predict_prob(clf, pred_augment(target_test, alignment, source_model))
    return _finish(scores, target_test.y, ridge=clf.ridge_used, n_augmented=Xtr.shape[1])


# -- LinInt -------------------------------------------------------------------

def stratified_split(y, test_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Row indices ``(train, test)`` with each class split at ``test_fraction``.

    Per class, ``round(n_c * test_fraction)`` rows go to test, at least one
    when the class has two or more rows.
    """
    y = np.asarray(y)
    train, test = [], []
    for label in (0, 1):
        rows = np.flatnonzero(y == label)
        rows = rows[rng.permutation(rows.size)]
        k = int(np.floor(rows.size * test_fraction + 0.5))
        if rows.size >= 2:
            k = min(max(k, 1), rows.size - 1)
        test.append(rows[:k])
        train.append(rows[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def lambda_grid(points: int) -> np.ndarray:
    if points == 1:
        return np.array([1.0])
    return np.linspace(0.0, 1.0, points)


def choose_lambda(p_target, p_source, y, lambdas) -> tuple[float, float | None]:
    """Grid value maximizing held-out AUC; ties go to the larger value."""
    best, best_auc = None, None
    for lam in sorted(lambdas):
        a = auc(lam * p_target + (1 - lam) * p_source, y)
        if a is None:
            return 1.0, None
        if best_auc is None or a >= best_auc:
            best, best_auc = float(lam), a
    return best, best_auc


@_guard
def run_linint(
    source_train,
    target_train,
    target_test,
    alignment,
    grid: int = 21,
    holdout: float = 0.25,
    rng: np.random.Generator | None = None,
    lambdas=None,
) -> MethodOutcome:
    """Blend target-only and source-only probabilities with a tuned weight."""
    shared = _shared_or_na(alignment)
    tgt = target_features(alignment)
    if rng is None:
        rng = np.random.default_rng(0)
    lambdas = lambda_grid(grid) if lambdas is None else np.asarray(lambdas, float)
    src_model = _source_model(source_train, shared)

    warning = None
    if lambdas.size == 1:
        lam = float(lambdas[0])
    else:
        fit_rows, held_rows = stratified_split(target_train.y, holdout, rng)
        fit_part, held = target_train.take(fit_rows), target_train.take(held_rows)
        if np.unique(held.y).size < 2 or np.unique(fit_part.y).size < 2:
            lam, warning = 1.0, "single-class held-out split; lambda set to 1"
        else:
            try:
                fp = project_dataset(fit_part, tgt)
                tgt_fit = _fit(fp.X, fp.y, fp.w)
            except _Unusable as e:
                lam, warning = 1.0, f"held-out target fit failed ({e.reason}); lambda set to 1"
            else:
                lam, _ = choose_lambda(
                    predict_prob(tgt_fit, project_dataset(held, tgt).X),
                    predict_prob(src_model, project_dataset(held, shared).X),
                    held.y,
                    lambdas,
                )
        if warning:
            log.warning("LinInt: %s", warning)

    full = project_dataset(target_train, tgt)
    tgt_model = _fit(full.X, full.y, full.w)
    p_t = predict_prob(tgt_model, project_dataset(target_test, tgt).X)
    p_s = predict_prob(src_model, project_dataset(target_test, shared).X)
    return _finish(lam * p_t + (1 - lam) * p_s, target_test.y, lam=lam, warning=warning)


def run_method(spec: MethodSpec, source_train, target_train, target_test, alignment, rng=None) -> MethodOutcome:
    m = spec.method
    if m is Method.BASELINE:
        return run_baseline(target_train, target_test, alignment)
    if m is Method.SOURCE_ONLY:
        return run_source_only(source_train, target_test, alignment)
    if m is Method.UNION:
        return run_union(source_train, target_train, target_test, alignment)
    if m is Method.FEDA:
        return run_feda(source_train, target_train, target_test, alignment)
    if m is Method.PRED:
        return run_pred(source_train, target_train, target_test, alignment)
    return run_linint(
        source_train, target_train, target_test, alignment,
        grid=spec.linint_grid, holdout=spec.linint_holdout, rng=rng,
    )
