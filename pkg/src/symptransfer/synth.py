"""Synthetic study designs standing in for private surveillance datasets.

Infection status is Bernoulli(prevalence); each recorded symptom is drawn
independently given status, then every symptom cell is flipped with the
study's reporting-noise probability.  Rows with fewer positive symptom cells
than the inclusion rule are discarded and redrawn.

All conditional-rate magnitudes here are synthetic choices, not values
published for the real studies.  Sizes, positive counts and symptom lists of
the six presets follow the published study descriptions.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .config import Section, parse_floats, parse_list
from .core import AGE_FEATURES, GENDER_FEATURE, DataError, Dataset, FeatureName, FeatureSpace

N_AGE = len(AGE_FEATURES)
CLAMP_LO, CLAMP_HI = 0.01, 0.99

# P(symptom | infected), P(symptom | not infected)
MASTER_CONDITIONALS: dict[str, tuple[float, float]] = {
    "fever": (0.70, 0.25),
    "cough": (0.80, 0.50),
    "sorethroat": (0.55, 0.40),
    "runnynose": (0.60, 0.42),
    "muscle": (0.50, 0.28),
    "fatigue": (0.60, 0.45),
    "headache": (0.55, 0.40),
    "chills": (0.45, 0.22),
    "body aches": (0.45, 0.28),
    "blockednose": (0.50, 0.40),
    "sneeze": (0.30, 0.25),
    "phlegm": (0.30, 0.20),
    "sinus": (0.20, 0.15),
    "earache": (0.06, 0.05),
    "wheezy": (0.06, 0.05),
    "joint aches": (0.15, 0.10),
    "loss of appetite": (0.20, 0.12),
    "diarrhea": (0.06, 0.05),
    "nausea": (0.08, 0.06),
    "vomit": (0.05, 0.04),
    "rash": (0.03, 0.03),
    "leg pain": (0.08, 0.06),
    "shortness of breath": (0.10, 0.08),
}

MASTER_SYMPTOMS = tuple(MASTER_CONDITIONALS)


def _uniform_mix():
    return np.full((2, N_AGE), 1.0 / (2 * N_AGE))


@dataclass(frozen=True, eq=False)
class StudyProfile:
    """Generative parameters of one synthetic study.

    ``demographics_mix`` is a 2 x 5 array: row 0 female, row 1 male; columns
    follow the age buckets.  ``conditionals[s] = (P(s|y=1), P(s|y=0))``.
    """

    name: str
    n: int
    prevalence: float
    symptoms: tuple[str, ...]
    conditionals: dict
    noise: float = 0.0
    inclusion: int = 0
    demographics_mix: np.ndarray = field(default_factory=_uniform_mix)

    def __post_init__(self):
        mix = np.asarray(self.demographics_mix, dtype=float)
        object.__setattr__(self, "demographics_mix", mix)
        object.__setattr__(self, "symptoms", tuple(self.symptoms))
        cond = {s: tuple(float(v) for v in rates) for s, rates in dict(self.conditionals).items()}
        object.__setattr__(self, "conditionals", cond)
        self.validate()

    def validate(self):
        if not self.name or any(c in self.name for c in "[]\n"):
            raise DataError(f"invalid study name {self.name!r}")
        if self.n < 1:
            raise DataError(f"{self.name}: n must be positive")
        if not 0 < self.prevalence < 1:
            raise DataError(f"{self.name}: prevalence must lie in (0, 1)")
        if not 0 <= self.noise < 0.5:
            raise DataError(f"{self.name}: noise must lie in [0, 0.5)")
        if self.inclusion not in (0, 1, 2):
            raise DataError(f"{self.name}: inclusion rule must be 0, 1 or 2")
        if len(set(self.symptoms)) != len(self.symptoms):
            raise DataError(f"{self.name}: duplicate symptom")
        for s in self.symptoms:
            FeatureName.base(s)
            if s not in self.conditionals:
                raise DataError(f"{self.name}: no conditional rates for {s!r}")
            for v in self.conditionals[s]:
                if not 0 <= v <= 1:
                    raise DataError(f"{self.name}: rate for {s!r} outside [0, 1]")
        mix = self.demographics_mix
        if mix.shape != (2, N_AGE) or np.any(mix < 0) or not np.isclose(mix.sum(), 1.0):
            raise DataError(f"{self.name}: demographics mix must be a 2x{N_AGE} distribution")

    # -- analytic quantities -------------------------------------------------

    def observed_rates(self, label: int) -> np.ndarray:
        """Per-symptom probability of a recorded 1 after reporting noise."""
        col = 0 if label == 1 else 1
        p = np.array([self.conditionals[s][col] for s in self.symptoms])
        return p * (1 - self.noise) + (1 - p) * self.noise

    def retention(self, label: int) -> float:
        return _at_least(self.observed_rates(label), self.inclusion)

    def expected_positive_fraction(self) -> float:
        a1, a0 = self.retention(1), self.retention(0)
        num = self.prevalence * a1
        return num / (num + (1 - self.prevalence) * a0)

    def expected_symptom_marginals(self) -> np.ndarray:
        """P(symptom recorded | row retained) for each vocabulary symptom."""
        out = np.zeros(len(self.symptoms))
        total = 0.0
        for label, prior in ((1, self.prevalence), (0, 1 - self.prevalence)):
            q = self.observed_rates(label)
            total += prior * _at_least(q, self.inclusion)
            for j in range(len(q)):
                rest = np.delete(q, j)
                out[j] += prior * q[j] * _at_least(rest, self.inclusion - 1)
        return out / total

    @property
    def space(self) -> FeatureSpace:
        return FeatureSpace.canonical(base_features(self.symptoms))


def base_features(symptoms) -> list[FeatureName]:
    return [FeatureName.base(b) for b in (GENDER_FEATURE, *AGE_FEATURES, *symptoms)]


def _at_least(q: np.ndarray, k: int) -> float:
    """P(sum of independent Bernoulli(q_i) >= k)."""
    if k <= 0:
        return 1.0
    dist = np.zeros(len(q) + 1)
    dist[0] = 1.0
    for qi in q:
        dist[1:] = dist[1:] * (1 - qi) + dist[:-1] * qi
        dist[0] *= 1 - qi
    return float(dist[k:].sum())


def prevalence_for(target_fraction: float, retention_pos: float, retention_neg: float) -> float:
    """Pre-inclusion prevalence giving ``target_fraction`` positives after inclusion."""
    r = target_fraction
    return r * retention_neg / (r * retention_neg + (1 - r) * retention_pos)


def generate(p: StudyProfile, rng: np.random.Generator) -> Dataset:
    """Draw ``p.n`` retained rows over the base features (demographics + symptoms)."""
    p.validate()
    budget = p.n * 1000
    k = len(p.symptoms)
    q1 = np.array([p.conditionals[s][0] for s in p.symptoms])
    q0 = np.array([p.conditionals[s][1] for s in p.symptoms])
    mix = p.demographics_mix.ravel()
    mix = mix / mix.sum()

    demo_parts, sym_parts, y_parts = [], [], []
    kept = attempts = 0
    while kept < p.n:
        if attempts >= budget:
            raise DataError(
                f"{p.name}: inclusion rule {p.inclusion} unreachable "
                f"({kept} of {p.n} rows after {attempts} attempts)"
            )
        batch = min(max(1024, 2 * (p.n - kept)), budget - attempts)
        attempts += batch
        cell = rng.choice(mix.size, size=batch, p=mix)
        y = (rng.random(batch) < p.prevalence).astype(np.uint8)
        rates = np.where(y[:, None] == 1, q1, q0)
        sym = (rng.random((batch, k)) < rates).astype(np.uint8)
        if p.noise > 0:
            sym ^= (rng.random((batch, k)) < p.noise).astype(np.uint8)
        ok = np.flatnonzero(sym.sum(axis=1) >= p.inclusion)[: p.n - kept]
        demo_parts.append(cell[ok])
        sym_parts.append(sym[ok])
        y_parts.append(y[ok])
        kept += ok.size

    cell = np.concatenate(demo_parts)
    sym = np.concatenate(sym_parts) if k else np.zeros((p.n, 0), dtype=np.uint8)
    y = np.concatenate(y_parts)
    demo = np.zeros((p.n, 1 + N_AGE), dtype=np.uint8)
    demo[:, 0] = cell // N_AGE
    demo[np.arange(p.n), 1 + cell % N_AGE] = 1

    raw_space = FeatureSpace(tuple(base_features(p.symptoms)))
    X = np.hstack([demo, sym])
    space = p.space
    order = [raw_space.index(f) for f in space]
    return Dataset(space, X[:, order], y, None, p.name)


def perturb_conditionals(cond: dict, delta: float, rng: np.random.Generator, symptoms) -> dict:
    """Shift every rate by +delta or -delta (random sign) and clamp to [0.01, 0.99]."""
    out = {}
    for s in symptoms:
        signs = rng.choice((-1.0, 1.0), size=2)
        out[s] = tuple(float(np.clip(v + sg * delta, CLAMP_LO, CLAMP_HI)) for v, sg in zip(cond[s], signs))
    return out


def shift_pair(base: StudyProfile, delta: float, rng: np.random.Generator) -> tuple[StudyProfile, StudyProfile]:
    """Two profiles over the same vocabulary; the second has shifted conditionals."""
    if delta < 0:
        raise ValueError("shift magnitude must be nonnegative")
    shifted = perturb_conditionals(base.conditionals, delta, rng, base.symptoms) if delta else dict(base.conditionals)
    return (
        replace(base, name=f"{base.name}_a"),
        replace(base, name=f"{base.name}_b", conditionals=shifted),
    )


# -- presets ---------------------------------------------------------------------

def _mix(female, male):
    m = np.array([female, male], dtype=float)
    return m / m.sum()


@dataclass(frozen=True)
class _Preset:
    name: str
    n: int
    positives: int
    symptoms: tuple[str, ...]
    noise: float
    shift: float
    inclusion: int
    mix: tuple


# Symptom lists as recorded by each study; FluWatch's "sorethropat" is read as sorethroat.
_PRESETS = (
    _Preset("NYUMC", 21907, 583,
            ("cough", "diarrhea", "fatigue", "fever", "headache", "muscle", "nausea", "sorethroat", "vomit"),
            0.01, 0.20, 1, ((4, 4, 16, 14, 12), (4, 4, 16, 14, 12))),
    _Preset("GoViral", 520, 297,
            ("body aches", "chills", "cough", "diarrhea", "fatigue", "fever", "leg pain", "nausea",
             "runnynose", "shortness of breath", "sorethroat", "vomit"),
            0.12, 0.10, 1, ((1, 2, 34, 14, 3), (1, 2, 28, 12, 3))),
    _Preset("FluWatch", 915, 498,
            ("fever", "cough", "sorethroat", "runnynose", "blockednose", "sneeze", "diarrhea", "muscle",
             "headache", "rash", "earache", "wheezy", "chills", "joint aches", "loss of appetite",
             "fatigue", "vomit", "nausea"),
            0.10, 0.06, 1, ((7, 10, 16, 14, 6), (7, 10, 12, 12, 6))),
    _Preset("HongKong", 4954, 1137,
            ("cough", "fever", "headache", "muscle", "phlegm", "runnynose", "sorethroat"),
            0.05, 0.08, 0, ((4, 8, 30, 12, 3), (4, 8, 22, 7, 2))),
    _Preset("Hutterite1", 1281, 616,
            ("blockednose", "chills", "cough", "earache", "fatigue", "fever", "headache", "muscle",
             "runnynose", "sorethroat"),
            0.05, 0.08, 2, ((12, 16, 14, 6, 2), (12, 16, 14, 6, 2))),
    _Preset("Hutterite2", 1236, 191,
            ("chills", "cough", "fever", "headache", "muscle", "runnynose", "sinus"),
            0.04, 0.12, 0, ((11, 15, 15, 6, 3), (11, 15, 15, 6, 3))),
)

PRESET_NAMES = tuple(p.name for p in _PRESETS)
PRESET_TABLE = {p.name: (p.n, p.positives) for p in _PRESETS}


def _stable_seed(*parts) -> int:
    return zlib.crc32("/".join(map(str, parts)).encode("utf-8"))


def preset_profiles() -> dict[str, StudyProfile]:
    """The six study designs, keyed by name.

    Each study's conditionals are the master table shifted by the study's
    own magnitude with a fixed per-study sign pattern; prevalence is solved
    so that the expected retained positive share equals positives / n.
    """
    out = {}
    for pr in _PRESETS:
        cond = perturb_conditionals(
            MASTER_CONDITIONALS, pr.shift, np.random.default_rng(_stable_seed("preset", pr.name)), pr.symptoms
        )
        draft = StudyProfile(pr.name, pr.n, 0.5, pr.symptoms, cond, pr.noise, pr.inclusion, _mix(*pr.mix))
        pi = prevalence_for(pr.positives / pr.n, draft.retention(1), draft.retention(0))
        out[pr.name] = replace(draft, prevalence=pi)
    return out


def benchmark_profile(n: int = 1500, noise: float = 0.05) -> StudyProfile:
    """A mid-sized study over the eight most common symptoms, used for shift experiments."""
    symptoms = ("chills", "cough", "fatigue", "fever", "headache", "muscle", "runnynose", "sorethroat")
    return StudyProfile("bench", n, 0.4, symptoms, {s: MASTER_CONDITIONALS[s] for s in symptoms}, noise, 0)


def na_pathway_pair(seed: int = 11, n: int = 500) -> tuple[Dataset, Dataset]:
    """A (source, target) pair whose only overlapping feature is unrelated to the target label.

    The target's label depends on fever and headache; cough is shared with
    the source but independent of the target outcome, so after significance
    selection on the target nothing overlaps.
    """
    rng = np.random.default_rng(seed)
    t_X = (rng.random((n, 3)) < [0.3, 0.4, 0.4]).astype(np.uint8)
    t_eta = -1.2 + 2.2 * t_X[:, 1] + 1.5 * t_X[:, 2]
    t_y = (rng.random(n) < 1 / (1 + np.exp(-t_eta))).astype(np.uint8)
    s_X = (rng.random((n, 2)) < 0.4).astype(np.uint8)
    s_eta = -0.5 + 1.0 * s_X[:, 0] + 1.2 * s_X[:, 1]
    s_y = (rng.random(n) < 1 / (1 + np.exp(-s_eta))).astype(np.uint8)
    source = Dataset(FeatureSpace.canonical(["cough", "rash"]), s_X, s_y, None, "source")
    target = Dataset(FeatureSpace.canonical(["cough", "fever", "headache"]), t_X, t_y, None, "target")
    return source, target


# -- config serialization ----------------------------------------------------------

def profile_to_config(p: StudyProfile) -> str:
    lines = [
        f"[dataset {p.name}]",
        f"n = {p.n}",
        f"prevalence = {p.prevalence!r}",
        f"noise = {p.noise!r}",
        f"inclusion = {p.inclusion}",
        f"symptoms = {', '.join(p.symptoms)}",
        "demographics.female = " + ", ".join(repr(float(v)) for v in p.demographics_mix[0]),
        "demographics.male = " + ", ".join(repr(float(v)) for v in p.demographics_mix[1]),
    ]
    for s in p.symptoms:
        pos, neg = p.conditionals[s]
        lines.append(f"cond.{s} = {pos!r}, {neg!r}")
    return "\n".join(lines) + "\n"


def profiles_to_config(profiles) -> str:
    return "\n".join(profile_to_config(p) for p in profiles)


def profile_from_section(sec: Section) -> StudyProfile:
    """Build a profile from a ``[dataset name]`` section.

    ``preset = NAME`` starts from a preset; any other key overrides it.
    Without a preset, ``n``, ``prevalence``, ``symptoms`` and one
    ``cond.<symptom>`` per symptom are required.
    """
    name = sec.title
    if sec.has("preset"):
        presets = preset_profiles()
        key = sec.get("preset")
        if key not in presets:
            raise sec.error("preset", f"unknown preset {key!r} (choose from {', '.join(PRESET_NAMES)})")
        base = replace(presets[key], name=name or key)
    else:
        base = None

    def pick(key, convert, default):
        if sec.has(key):
            return sec.get(key, convert)
        if base is not None:
            return getattr(base, key)
        if default is ...:
            raise sec.error(None, f"missing required key '{key}' in [{sec.header}]")
        return default

    n = pick("n", int, ...)
    prevalence = pick("prevalence", float, ...)
    noise = pick("noise", float, 0.0)
    inclusion = pick("inclusion", int, 0)
    if sec.has("symptoms") or base is None:
        symptoms = tuple(sec.get("symptoms", parse_list))
    else:
        symptoms = base.symptoms

    cond = dict(base.conditionals) if base is not None else {}
    for key in sec.keys_with_prefix("cond."):
        vals = sec.get(key, parse_floats)
        if len(vals) != 2:
            raise sec.error(key, "expected two rates: P(symptom|infected), P(symptom|not infected)")
        cond[key[len("cond."):].strip()] = tuple(vals)
    for s in symptoms:
        if s not in cond:
            if s in MASTER_CONDITIONALS and base is not None:
                cond[s] = MASTER_CONDITIONALS[s]
            else:
                raise sec.error(None, f"no 'cond.{s}' rates for symptom {s!r}")

    mix = base.demographics_mix.copy() if base is not None else _uniform_mix()
    for row, key in enumerate(("demographics.female", "demographics.male")):
        if sec.has(key):
            vals = sec.get(key, parse_floats)
            if len(vals) != N_AGE:
                raise sec.error(key, f"expected {N_AGE} age-bucket weights")
            mix[row] = vals
    if any(sec.has(k) for k in ("demographics.female", "demographics.male")):
        if mix.sum() <= 0:
            raise sec.error("demographics.female", "demographic weights sum to zero")
        mix = mix / mix.sum()
    try:
        return StudyProfile(name, n, prevalence, symptoms, {s: cond[s] for s in symptoms}, noise, inclusion, mix)
    except DataError as e:
        raise sec.error(None, str(e)) from None
