"""Feature spaces, datasets and the alignment between two studies.

A feature is a binary predicate over one observation: a demographic
indicator, a symptom, or the conjunction of two or three of those.  All
features of a study live in a :class:`FeatureSpace`; a :class:`Dataset` is a
0/1 matrix over that space plus labels and per-row sampling weights.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEMOGRAPHIC = "demographic"
SYMPTOM = "symptom"
COMBINATION = "combination"
_KIND_RANK = {DEMOGRAPHIC: 0, SYMPTOM: 1, COMBINATION: 2}

AGE_BUCKETS = ("0-4", "5-15", "16-44", "45-64", "65+")
AGE_FEATURES = tuple(f"age{b}" for b in AGE_BUCKETS)
GENDER_FEATURE = "male"
DEMOGRAPHIC_NAMES = frozenset((GENDER_FEATURE,) + AGE_FEATURES)

SEPARATOR = "&"


class DataError(ValueError):
    """Malformed dataset content or an unknown feature reference."""


def base_kind(name: str) -> str:
    return DEMOGRAPHIC if name in DEMOGRAPHIC_NAMES else SYMPTOM


@dataclass(frozen=True)
class FeatureName:
    """A base indicator or a conjunction of base indicators.

    ``parts`` is always stored sorted, so ``FeatureName.parse("fever&cough")``
    equals ``FeatureName.parse("cough&fever")``.
    """

    kind: str
    parts: tuple[str, ...]

    def __post_init__(self):
        parts = tuple(sorted(self.parts))
        if not 1 <= len(parts) <= 3:
            raise DataError(f"feature needs 1-3 parts, got {parts!r}")
        if len(set(parts)) != len(parts):
            raise DataError(f"repeated part in feature {parts!r}")
        for p in parts:
            if not p or SEPARATOR in p or "," in p or p != p.strip():
                raise DataError(f"invalid base feature identifier {p!r}")
        if len(parts) == 1 and self.kind == COMBINATION:
            raise DataError(f"combination {parts[0]!r} has a single part")
        if len(parts) > 1 and self.kind != COMBINATION:
            raise DataError(f"{self.kind} feature cannot have {len(parts)} parts")
        if self.kind not in _KIND_RANK:
            raise DataError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def base(cls, name: str) -> "FeatureName":
        return cls(base_kind(name), (name,))

    @classmethod
    def combo(cls, *names: str) -> "FeatureName":
        return cls(COMBINATION, tuple(names))

    @classmethod
    def parse(cls, text: str) -> "FeatureName":
        parts = tuple(text.split(SEPARATOR))
        if len(parts) == 1:
            return cls.base(parts[0])
        return cls(COMBINATION, parts)

    @property
    def sort_key(self) -> tuple:
        return (_KIND_RANK[self.kind], self.parts)

    def __lt__(self, other: "FeatureName") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return SEPARATOR.join(self.parts)


def _as_feature(f) -> FeatureName:
    return f if isinstance(f, FeatureName) else FeatureName.parse(str(f))


@dataclass(frozen=True)
class FeatureSpace:
    """Ordered, duplicate-free collection of features.

    The order given at construction is preserved (it defines column
    indices).  Use :meth:`canonical` for the reproducible sorted order.
    """

    features: tuple[FeatureName, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        feats = tuple(_as_feature(f) for f in self.features)
        index = {f: i for i, f in enumerate(feats)}
        if len(index) != len(feats):
            seen, dup = set(), None
            for f in feats:
                if f in seen:
                    dup = f
                    break
                seen.add(f)
            raise DataError(f"duplicate feature {dup}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "_index", index)

    @classmethod
    def canonical(cls, features: Iterable) -> "FeatureSpace":
        return cls(tuple(sorted(_as_feature(f) for f in features)))

    @property
    def size(self) -> int:
        return len(self.features)

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __contains__(self, f) -> bool:
        return _as_feature(f) in self._index

    def index(self, f) -> int:
        try:
            return self._index[_as_feature(f)]
        except KeyError:
            raise DataError(f"unknown feature {f}") from None

    def names(self) -> list[str]:
        return [str(f) for f in self.features]

    def base_names(self) -> set[str]:
        return {p for f in self.features for p in f.parts}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled binary observation matrix with per-row sampling weights."""

    space: FeatureSpace
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.X)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.space.size)
        if X.ndim != 2 or X.shape[1] != self.space.size:
            raise DataError(
                f"X has shape {X.shape}, expected (n, {self.space.size})"
            )
        if X.size and not np.isin(X, (0, 1)).all():
            raise DataError("feature values must be 0 or 1")
        y = np.asarray(self.y)
        if y.shape != (X.shape[0],):
            raise DataError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        w = np.ones(X.shape[0]) if self.w is None else np.asarray(self.w, float)
        if w.shape != (X.shape[0],):
            raise DataError(f"w has shape {w.shape}, expected ({X.shape[0]},)")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("weights must be finite and nonnegative")
        object.__setattr__(self, "X", _frozen(X.astype(np.uint8)))
        object.__setattr__(self, "y", _frozen(y.astype(np.uint8)))
        object.__setattr__(self, "w", _frozen(w))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, rows, *, reset_weights: bool = False) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        w = np.ones(len(rows)) if reset_weights else self.w[rows]
        return Dataset(self.space, self.X[rows], self.y[rows], w, self.provenance)

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.space, self.X, y, self.w, self.provenance)

    def column(self, f) -> np.ndarray:
        return self.X[:, self.space.index(f)]

    def positive_fraction(self) -> float:
        return float(self.y.mean()) if self.n else float("nan")

    def same_as(self, other: "Dataset") -> bool:
        return (
            self.space == other.space
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.w, other.w)
        )


def concat(datasets: Sequence[Dataset], provenance: str | None = None) -> Dataset:
    space = datasets[0].space
    for d in datasets[1:]:
        if d.space != space:
            raise DataError("cannot concatenate datasets over different spaces")
    return Dataset(
        space,
        np.vstack([d.X for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        np.concatenate([d.w for d in datasets]),
        datasets[0].provenance if provenance is None else provenance,
    )


@dataclass(frozen=True)
class FeatureAlignment:
    shared: tuple[FeatureName, ...]
    source_only: tuple[FeatureName, ...]
    target_only: tuple[FeatureName, ...]

    @property
    def n_shared(self) -> int:
        return len(self.shared)

    @property
    def n_source(self) -> int:
        return len(self.shared) + len(self.source_only)

    @property
    def n_target(self) -> int:
        return len(self.shared) + len(self.target_only)

    def restrict(self, keep: Iterable) -> "FeatureAlignment":
        """Drop every feature not in ``keep`` from all three parts."""
        keep = {_as_feature(f) for f in keep}
        return FeatureAlignment(
            tuple(f for f in self.shared if f in keep),
            tuple(f for f in self.source_only if f in keep),
            tuple(f for f in self.target_only if f in keep),
        )


def align_spaces(source: FeatureSpace, target: FeatureSpace) -> FeatureAlignment:
    """Partition two feature spaces into shared and domain-specific parts.

    Features match on exact name equality; each part is canonically sorted.
    """
    if not source.size or not target.size:
        raise DataError("cannot align an empty feature space")
    s, t = set(source.features), set(target.features)
    return FeatureAlignment(
        tuple(sorted(s & t)), tuple(sorted(s - t)), tuple(sorted(t - s))
    )


def project_dataset(d: Dataset, keep: Sequence) -> Dataset:
    """Select columns ``keep`` (in that order); rows, labels and weights stay."""
    keep = [_as_feature(f) for f in keep]
    for f in keep:
        if f not in d.space:
            raise DataError(f"unknown feature {f} (not in {d.provenance or 'dataset'})")
    cols = [d.space.index(f) for f in keep]
    return Dataset(FeatureSpace(tuple(keep)), d.X[:, cols], d.y, d.w, d.provenance)


# -- CSV ---------------------------------------------------------------------

def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    buf.write(",".join(["id", *d.space.names(), "label"]) + "\n")
    for i in range(d.n):
        cells = ",".join(map(str, d.X[i].tolist()))
        buf.write(f"{i},{cells},{int(d.y[i])}\n" if d.space.size else f"{i},{int(d.y[i])}\n")
    return buf.getvalue()


def write_csv(d: Dataset, path) -> None:
    Path(path).write_bytes(dataset_to_csv(d).encode("utf-8"))


def read_csv(path, provenance: str | None = None) -> Dataset:
    """Read the ``id,<features...>,label`` format.

    Errors name the file, line number and offending field.
    """
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path}:1: empty file")
    header = [h.rstrip("\r") for h in lines[0].split(",")]
    if len(header) < 2 or header[0] != "id" or header[-1] != "label":
        raise DataError(f"{path}:1: header must be 'id,<features...>,label'")
    try:
        space = FeatureSpace(tuple(FeatureName.parse(h) for h in header[1:-1]))
    except DataError as e:
        raise DataError(f"{path}:1: {e}") from None
    width = len(header)
    X = np.zeros((len(lines) - 1, width - 2), dtype=np.uint8)
    y = np.zeros(len(lines) - 1, dtype=np.uint8)
    for r, line in enumerate(lines[1:]):
        cells = line.rstrip("\r").split(",")
        lineno = r + 2
        if len(cells) != width:
            raise DataError(
                f"{path}:{lineno}: expected {width} fields, found {len(cells)}"
            )
        for c, cell in enumerate(cells[1:], start=1):
            if cell not in ("0", "1"):
                raise DataError(
                    f"{path}:{lineno}: field '{header[c]}' must be 0 or 1, got {cell!r}"
                )
        vals = [int(c) for c in cells[1:]]
        X[r] = vals[:-1]
        y[r] = vals[-1]
    return Dataset(space, X, y, None, provenance or path.stem)
