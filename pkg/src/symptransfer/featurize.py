"""Combination features and within-study label standardization."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import (
    AGE_FEATURES,
    COMBINATION,
    GENDER_FEATURE,
    DataError,
    Dataset,
    FeatureName,
    FeatureSpace,
    base_kind,
)

# influenza-like-illness triples
ILI_TRIPLES = (
    ("cough", "fever", "sorethroat"),
    ("cough", "fever", "muscle"),
)

DEFAULT_DEMOGRAPHICS = (GENDER_FEATURE,) + AGE_FEATURES


@dataclass(frozen=True)
class BaseVocabulary:
    demographics: tuple[str, ...] = DEFAULT_DEMOGRAPHICS
    symptoms: tuple[str, ...] = ()

    def __post_init__(self):
        names = list(self.demographics) + list(self.symptoms)
        if len(set(names)) != len(names):
            raise DataError("vocabulary names must be unique")
        for s in self.symptoms:
            if base_kind(s) != "symptom":
                raise DataError(f"{s!r} is a demographic name, not a symptom")

    @classmethod
    def from_space(cls, space: FeatureSpace) -> "BaseVocabulary":
        bases = [f.parts[0] for f in space if len(f.parts) == 1]
        return cls(
            tuple(b for b in bases if base_kind(b) == "demographic"),
            tuple(b for b in bases if base_kind(b) == "symptom"),
        )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.demographics) + tuple(self.symptoms)


def build_combination_space(v: BaseVocabulary) -> FeatureSpace:
    """All singletons, all unordered pairs, and the ILI triples present in ``v``."""
    base = v.names
    feats = [FeatureName.base(b) for b in base]
    feats += [FeatureName.combo(a, b) for a, b in combinations(base, 2)]
    symptoms = set(v.symptoms)
    feats += [FeatureName.combo(*t) for t in ILI_TRIPLES if symptoms.issuperset(t)]
    return FeatureSpace.canonical(feats)


def materialize_combinations(d: Dataset, space: FeatureSpace) -> Dataset:
    """Compute every column of ``space`` as the AND of its base columns in ``d``."""
    base_cols = {}
    for f in d.space:
        if len(f.parts) == 1:
            base_cols[f.parts[0]] = d.space.index(f)
    missing = sorted(space.base_names() - base_cols.keys())
    if missing:
        raise DataError(f"missing base feature(s) {', '.join(missing)}")
    X = np.empty((d.n, space.size), dtype=np.uint8)
    for j, f in enumerate(space):
        col = d.X[:, base_cols[f.parts[0]]]
        for p in f.parts[1:]:
            col = col & d.X[:, base_cols[p]]
        X[:, j] = col
    return Dataset(space, X, d.y, d.w, d.provenance)


def expand(d: Dataset) -> Dataset:
    """Materialize the full combination space of a base-feature dataset.

    Datasets that already carry combination columns are returned unchanged.
    """
    if any(f.kind == COMBINATION for f in d.space):
        return d
    space = build_combination_space(BaseVocabulary.from_space(d.space))
    return materialize_combinations(d, space)


def profile_ids(X: np.ndarray) -> tuple[np.ndarray, int]:
    """Integer id per row such that equal rows share an id; also the id count."""
    X = np.ascontiguousarray(X, dtype=np.uint8)
    if X.shape[1] == 0:
        return np.zeros(X.shape[0], dtype=np.intp), int(X.shape[0] > 0)
    packed = np.ascontiguousarray(np.packbits(X, axis=1))
    keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, inverse = np.unique(keys, return_inverse=True)
    inverse = inverse.ravel()
    return inverse, int(inverse.max()) + 1 if inverse.size else 0


def standardize_labels(d: Dataset) -> Dataset:
    """Give each distinct feature vector its strict-majority label (ties -> 0)."""
    if d.n == 0:
        raise DataError("cannot standardize labels of an empty dataset")
    ids, k = profile_ids(d.X)
    pos = np.bincount(ids, weights=d.y.astype(float), minlength=k)
    tot = np.bincount(ids, minlength=k)
    majority = (pos > tot - pos).astype(np.uint8)
    return d.with_labels(majority[ids])
