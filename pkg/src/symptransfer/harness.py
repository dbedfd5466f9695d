"""Experimental protocol: split, preprocess, transfer, score, aggregate.

Randomness is derived per stage from the root seed and the names involved,
so a cell never depends on which other cells ran, in which order, or in
which worker process:

* target split             <- (root, seed, target)
* source resampling        <- (root, seed, source, target)
* method-internal (LinInt) <- (root, seed, source, target, method)
"""

from __future__ import annotations

import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import adapt, preprocess
from .adapt import Method, MethodSpec, stratified_split
from .config import ConfigError, Section, format_ratio, parse_list, parse_ratio, read_config
from .core import DataError, Dataset, FeatureAlignment, align_spaces, read_csv
from .featurize import expand, standardize_labels
from .learn import LearnerError
from .synth import StudyProfile, generate, preset_profiles, profile_from_section, shift_pair

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "source", "target", "method", "seed", "auc", "na_reason",
    "n_source_train", "n_target_train", "n_shared_features",
)

_SPLIT, _RESAMPLE, _METHOD, _GENERATE = 1, 2, 3, 4


def _key(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def stream(root_seed: int, *parts) -> np.random.Generator:
    words = [p if isinstance(p, int) else _key(str(p)) for p in parts]
    return np.random.default_rng(np.random.SeedSequence([root_seed & 0xFFFFFFFF, *words]))


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class DatasetRef:
    """A study from a CSV file or from a synthetic profile."""

    name: str
    path: str | None = None
    profile: StudyProfile | None = None

    def load(self, root_seed: int = 0) -> Dataset:
        if self.path is not None:
            base = read_csv(self.path, provenance=self.name)
        else:
            base = generate(self.profile, stream(root_seed, _GENERATE, self.name))
        return prepare_study(base)


def prepare_study(d: Dataset) -> Dataset:
    """Materialize combination features, then standardize labels over the full study."""
    return standardize_labels(expand(d))


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetRef, ...]
    methods: tuple[MethodSpec, ...] = tuple(MethodSpec(m) for m in adapt.TRANSFER_METHODS)
    seeds: tuple[int, ...] = tuple(range(20))
    root_seed: int = 0
    train_test_ratio: float = 4.0
    source_target_mix: float = 1.0
    sweep_mixes: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    p_threshold: float = 0.05
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        for value in (self.train_test_ratio, self.source_target_mix, *self.sweep_mixes):
            if not value > 0:
                raise ValueError("ratios must be positive")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError("dataset names must be unique")

    @property
    def test_fraction(self) -> float:
        return 1.0 / (self.train_test_ratio + 1.0)


def preset_config(**kwargs) -> ExperimentConfig:
    refs = tuple(DatasetRef(name, profile=p) for name, p in preset_profiles().items())
    return ExperimentConfig(datasets=refs, **kwargs)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"20"`` means seeds 0..19; ``"3, 7, 11"`` lists them."""
    items = parse_list(text)
    if not items:
        raise ValueError("need at least one seed")
    if len(items) == 1:
        n = int(items[0])
        if n < 1:
            raise ValueError("need at least one seed")
        return tuple(range(n))
    return tuple(int(s) for s in items)


def config_from_sections(sections: list[Section], base_dir=".") -> ExperimentConfig:
    refs, exp = [], None
    for sec in sections:
        if sec.kind == "dataset":
            if not sec.title:
                raise sec.error(None, "dataset section needs a name: [dataset <name>]")
            if sec.has("file"):
                path = Path(sec.get("file"))
                if not path.is_absolute():
                    path = Path(base_dir) / path
                refs.append(DatasetRef(sec.title, path=str(path)))
            else:
                refs.append(DatasetRef(sec.title, profile=profile_from_section(sec)))
        elif sec.kind == "experiment":
            if exp is not None:
                raise sec.error(None, "duplicate [experiment] section")
            exp = sec
        else:
            raise sec.error(None, f"unknown section kind [{sec.kind}]")
    kwargs = {}
    if exp is not None:
        known = {"methods", "seeds", "root_seed", "train_test_ratio", "source_target_mix",
                 "sweep_mixes", "p_threshold", "output", "linint_grid", "linint_holdout", "workers"}
        for key in exp.entries:
            if key not in known:
                raise exp.error(key, "unknown experiment key")
        grid = exp.get("linint_grid", int, 21)
        holdout = exp.get("linint_holdout", float, 0.25)
        if exp.has("methods"):
            try:
                kwargs["methods"] = tuple(
                    MethodSpec(Method.parse(m), grid, holdout) for m in exp.get("methods", parse_list)
                )
            except ValueError as e:
                raise exp.error("methods", str(e)) from None
        else:
            kwargs["methods"] = tuple(MethodSpec(m, grid, holdout) for m in adapt.TRANSFER_METHODS)
        if exp.has("seeds"):
            kwargs["seeds"] = exp.get("seeds", parse_seeds)
        for key, conv in (("root_seed", int), ("train_test_ratio", parse_ratio),
                          ("source_target_mix", parse_ratio), ("p_threshold", float),
                          ("output", str), ("workers", int)):
            if exp.has(key):
                kwargs[key] = exp.get(key, conv)
        if exp.has("sweep_mixes"):
            kwargs["sweep_mixes"] = exp.get("sweep_mixes", lambda t: tuple(parse_ratio(x) for x in parse_list(t)))
        if "p_threshold" in kwargs and not 0 <= kwargs["p_threshold"] <= 1:
            raise exp.error("p_threshold", "must lie in [0, 1]")
    if not refs:
        raise ConfigError(sections[0].path if sections else "<config>", None, None, "no [dataset] sections")
    try:
        return ExperimentConfig(datasets=tuple(refs), **kwargs)
    except ValueError as e:
        raise ConfigError(sections[0].path, None, None, str(e)) from None


def load_config(path) -> ExperimentConfig:
    return config_from_sections(read_config(path), base_dir=Path(path).parent)


# -- results -------------------------------------------------------------------

@dataclass(frozen=True)
class TransferResult:
    source: str
    target: str
    method: str
    seed: int
    auc: float | None
    n_source_train: int = 0
    n_target_train: int = 0
    n_shared_features: int = 0
    na_reason: str | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.auc is None and not self.na_reason:
            raise ValueError("an NA result needs a reason")
        if self.auc is not None and not 0.0 <= self.auc <= 1.0:
            raise ValueError(f"AUC {self.auc} outside [0, 1]")

    @property
    def is_na(self) -> bool:
        return self.auc is None

    def csv_row(self) -> str:
        auc = "NA" if self.auc is None else f"{self.auc:.6f}"
        reason = (self.na_reason or "").replace(",", ";").replace("\n", " ")
        return ",".join(map(str, (
            self.source, self.target, self.method, self.seed, auc, reason,
            self.n_source_train, self.n_target_train, self.n_shared_features,
        )))

    @property
    def sort_key(self):
        return (self.source, self.target, self.method, self.seed)


def results_to_csv(results) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    lines += [r.csv_row() for r in sorted(results, key=lambda r: r.sort_key)]
    return "\n".join(lines) + "\n"


# -- the pipeline ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetSplit:
    name: str
    seed: int
    train: Dataset
    test: Dataset
    selected: tuple | None
    na_reason: str | None = None


@dataclass(frozen=True, eq=False)
class PreparedPair:
    source_name: str
    target: TargetSplit
    source_train: Dataset | None
    alignment: FeatureAlignment | None
    na_reason: str | None = None


class Tracer:
    """Collects one line per pipeline stage."""

    def __init__(self, enabled: bool = False):
        self.enabled = enabled
        self.lines: list[str] = []

    def __call__(self, stage: str, **fields):
        if self.enabled:
            body = " ".join(f"{k}={v}" for k, v in fields.items())
            self.lines.append(f"stage={stage} {body}".rstrip())


def split_target(target: Dataset, name: str, seed: int, cfg: ExperimentConfig, trace=None) -> TargetSplit:
    trace = trace or Tracer()
    tr, te = stratified_split(target.y, cfg.test_fraction, stream(cfg.root_seed, _SPLIT, seed, name))
    train, test = target.take(tr), target.take(te)
    trace("split", target=name, seed=seed, n_train=train.n, n_test=test.n,
          pos_train=int(train.y.sum()), pos_test=int(test.y.sum()))
    try:
        report = preprocess.significance_report(train)
    except (LearnerError, DataError) as e:
        trace("select", target=name, seed=seed, status="failed")
        return TargetSplit(name, seed, train, test, None, f"feature selection failed: {e}")
    selected = tuple(report.selected(cfg.p_threshold))
    trace("select", target=name, seed=seed, n_selected=len(selected), n_aliased=len(report.aliased),
          ridge=f"{report.ridge_used:g}", features="|".join(map(str, selected)))
    return TargetSplit(name, seed, train, test, selected)


def prepare_pair(source: Dataset, source_name: str, split: TargetSplit, cfg: ExperimentConfig,
                 mix: float | None = None, trace=None) -> PreparedPair:
    """Align, reweight for covariate shift, class-balance, and apply the selection."""
    trace = trace or Tracer()
    mix = cfg.source_target_mix if mix is None else mix
    al = align_spaces(source.space, split.train.space)
    trace("align", source=source_name, target=split.name, shared=al.n_shared,
          source_only=len(al.source_only), target_only=len(al.target_only))
    rng = stream(cfg.root_seed, _RESAMPLE, split.seed, source_name, split.name)
    m = max(1, int(math.floor(split.train.n * mix + 0.5)))
    try:
        shifted = preprocess.covariate_shift_resample(source, split.train, m, rng, features=al.shared)
        trace("covariate_shift", source=source_name, target=split.name, m=m,
              pos=int(shifted.y.sum()))
        balanced = preprocess.class_balance_resample(shifted, split.train, m, rng)
    except DataError as e:
        trace("class_balance", source=source_name, target=split.name, status="failed")
        return PreparedPair(source_name, split, None, None, str(e))
    trace("class_balance", source=source_name, target=split.name, m=m,
          pos=int(balanced.y.sum()))
    if split.selected is None:
        return PreparedPair(source_name, split, balanced, None, split.na_reason)
    filtered = al.restrict(split.selected)
    trace("filter", source=source_name, target=split.name, shared=filtered.n_shared,
          target_features=filtered.n_target)
    return PreparedPair(source_name, split, balanced, filtered)


def _result(source, target, spec_or_method, seed, outcome=None, reason=None, n_src=0, n_tgt=0, n_shared=0):
    label = spec_or_method.label if isinstance(spec_or_method, Method) else spec_or_method.method.label
    if outcome is not None:
        return TransferResult(source, target, label, seed, outcome.auc, n_src, n_tgt, n_shared,
                              outcome.na_reason, dict(outcome.info))
    return TransferResult(source, target, label, seed, None, n_src, n_tgt, n_shared, reason)


def run_baseline_split(split: TargetSplit, cfg: ExperimentConfig, trace=None) -> TransferResult:
    trace = trace or Tracer()
    n_tgt = split.train.n
    if split.selected is None:
        res = _result(split.name, split.name, Method.BASELINE, split.seed, reason=split.na_reason, n_tgt=n_tgt)
    else:
        al = FeatureAlignment((), (), tuple(sorted(split.selected)))
        out = adapt.run_baseline(split.train, split.test, al)
        res = _result(split.name, split.name, Method.BASELINE, split.seed, out, n_tgt=n_tgt)
    trace("method", source=split.name, target=split.name, method="Baseline",
          auc="NA" if res.is_na else f"{res.auc:.6f}")
    return res


def run_prepared(pp: PreparedPair, spec: MethodSpec, cfg: ExperimentConfig, trace=None) -> TransferResult:
    trace = trace or Tracer()
    split = pp.target
    n_src = 0 if pp.source_train is None else pp.source_train.n
    n_shared = 0 if pp.alignment is None else pp.alignment.n_shared
    if spec.method is Method.BASELINE:
        res = run_baseline_split(split, cfg)
        res = replace(res, source=pp.source_name)
    elif pp.na_reason is not None or pp.alignment is None:
        res = _result(pp.source_name, split.name, spec, split.seed, reason=pp.na_reason,
                      n_src=n_src, n_tgt=split.train.n, n_shared=n_shared)
    else:
        rng = stream(cfg.root_seed, _METHOD, split.seed, pp.source_name, split.name, spec.method.value)
        out = adapt.run_method(spec, pp.source_train, split.train, split.test, pp.alignment, rng)
        res = _result(pp.source_name, split.name, spec, split.seed, out,
                      n_src=n_src, n_tgt=split.train.n, n_shared=n_shared)
    trace("method", source=pp.source_name, target=split.name, method=spec.method.label,
          auc="NA" if res.is_na else f"{res.auc:.6f}")
    return res


def run_single(source: Dataset, target: Dataset, spec: MethodSpec | Method | str, seed: int,
               cfg: ExperimentConfig | None = None, *, source_name: str | None = None,
               target_name: str | None = None, mix: float | None = None,
               trace: Tracer | None = None) -> TransferResult:
    """One (source, target, method, seed) run.  Failures come back as NA results."""
    cfg = cfg or ExperimentConfig(datasets=())
    if not isinstance(spec, MethodSpec):
        spec = MethodSpec(Method.parse(spec) if isinstance(spec, str) else spec)
    source_name = source_name or source.provenance or "source"
    target_name = target_name or target.provenance or "target"
    split = split_target(target, target_name, seed, cfg, trace)
    if spec.method is Method.BASELINE:
        res = run_baseline_split(split, cfg, trace)
        return replace(res, source=source_name)
    pp = prepare_pair(source, source_name, split, cfg, mix, trace)
    return run_prepared(pp, spec, cfg, trace)


# -- matrix ---------------------------------------------------------------------

_WORKER_STUDIES: dict = {}


def _init_worker(studies):
    _WORKER_STUDIES.clear()
    _WORKER_STUDIES.update(studies)


def _target_unit(args):
    """All runs that share one (target, seed): baseline plus every source x method."""
    target_name, seed, cfg, trace_on = args
    studies = _WORKER_STUDIES
    trace = Tracer(trace_on)
    split = split_target(studies[target_name], target_name, seed, cfg, trace)
    results = [run_baseline_split(split, cfg, trace)]
    for source_name in sorted(studies):
        if source_name == target_name:
            continue
        pp = prepare_pair(studies[source_name], source_name, split, cfg, trace=trace)
        for spec in cfg.methods:
            if spec.method is Method.BASELINE:
                continue
            results.append(run_prepared(pp, spec, cfg, trace))
    return results, trace.lines


def load_studies(cfg: ExperimentConfig) -> dict[str, Dataset]:
    return {ref.name: ref.load(cfg.root_seed) for ref in cfg.datasets}


@dataclass
class MatrixRun:
    names: tuple[str, ...]
    methods: tuple[str, ...]
    results: list[TransferResult]
    trace: list[str]

    def runs(self, source, target, method):
        if source == target:
            return [r for r in self.results if r.source == target and r.target == target and r.method == "Baseline"]
        return [r for r in self.results if r.source == source and r.target == target and r.method == method]

    def cell(self, source, target, method) -> float | None:
        return mean_auc(self.runs(source, target, method))

    def matrix(self, method) -> dict[tuple[str, str], float | None]:
        return {(s, t): self.cell(s, t, method) for s in self.names for t in self.names}

    def baseline(self, target) -> float | None:
        return self.cell(target, target, "Baseline")


def mean_auc(results) -> float | None:
    vals = sorted(r.auc for r in results if r.auc is not None)
    return math.fsum(vals) / len(vals) if vals else None


def run_matrix(cfg: ExperimentConfig, studies: dict[str, Dataset] | None = None, trace: bool = False) -> MatrixRun:
    """Every ordered study pair under every method, averaged over seeds.

    Diagonal cells hold the Baseline (target on itself) for every method.
    """
    studies = load_studies(cfg) if studies is None else studies
    if len(studies) < 2:
        raise ValueError("a matrix needs at least two datasets")
    units = [(t, s, cfg, trace) for t in sorted(studies) for s in sorted(cfg.seeds)]
    workers = max(1, min(cfg.workers, len(units)))
    if workers == 1:
        _init_worker(studies)
        outputs = [_target_unit(u) for u in units]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(studies,)) as pool:
            outputs = list(pool.map(_target_unit, units, chunksize=1))
    results = [r for rs, _ in outputs for r in rs]
    lines = [line for _, ls in outputs for line in ls]
    methods = tuple(spec.method.label for spec in cfg.methods if spec.method is not Method.BASELINE)
    return MatrixRun(tuple(sorted(studies)), methods, sorted(results, key=lambda r: r.sort_key), lines)


def format_auc(v: float | None, digits: int = 3) -> str:
    return "NA" if v is None else f"{v:.{digits}f}"


def matrix_to_csv(run: MatrixRun, method: str) -> str:
    rows = [",".join(["source", *run.names])]
    for s in run.names:
        rows.append(",".join([s, *(format_auc(run.cell(s, t, method), 6) for t in run.names)]))
    return "\n".join(rows) + "\n"


def matrix_to_text(run: MatrixRun, method: str) -> str:
    """Aligned table: rows are sources, columns targets, cell = mean AUC."""
    header = ["", *run.names]
    body = [[s, *(format_auc(run.cell(s, t, method)) for t in run.names)] for s in run.names]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    title = f"AUC scores of {method} method (row = source, column = target; diagonal = baseline)"
    lines = [title]
    for r in [header, *body]:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def baseline_to_csv(run: MatrixRun) -> str:
    return "target,baseline_auc\n" + "".join(f"{t},{format_auc(run.baseline(t), 6)}\n" for t in run.names)


def bars_to_csv(run: MatrixRun) -> str:
    """Long-format export for bar charts; cells below 0.5 are flagged as not drawn."""
    lines = ["source,target,method,auc,baseline_auc,drawn"]
    for m in run.methods:
        for s in run.names:
            for t in run.names:
                if s == t:
                    continue
                v = run.cell(s, t, m)
                drawn = "no" if v is None or v < 0.5 else "yes"
                lines.append(f"{s},{t},{m},{format_auc(v, 6)},{format_auc(run.baseline(t), 6)},{drawn}")
    return "\n".join(lines) + "\n"


def write_matrix_outputs(run: MatrixRun, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"results.csv": results_to_csv(run.results), "baseline.csv": baseline_to_csv(run),
             "bars.csv": bars_to_csv(run)}
    for m in run.methods:
        files[f"matrix_{m.lower()}.csv"] = matrix_to_csv(run, m)
        files[f"matrix_{m.lower()}.txt"] = matrix_to_text(run, m)
    written = []
    for name, text in files.items():
        path = out / name
        path.write_bytes(text.encode("utf-8"))
        written.append(path)
    return written


# -- sweep ----------------------------------------------------------------------

@dataclass
class SweepPoint:
    mix: float
    mean_auc: float | None
    n_numeric: int
    n_na: int


def run_sweep(cfg: ExperimentConfig, source: Dataset, target: Dataset, method=Method.UNION,
              source_name: str | None = None, target_name: str | None = None,
              trace: Tracer | None = None) -> tuple[list[SweepPoint], list[TransferResult]]:
    """Mean AUC at each source:target mix ratio, target data held fixed."""
    if not cfg.sweep_mixes:
        raise ValueError("no sweep mixes configured")
    spec = method if isinstance(method, MethodSpec) else MethodSpec(Method.parse(method) if isinstance(method, str) else method)
    source_name = source_name or source.provenance or "source"
    target_name = target_name or target.provenance or "target"
    trace = trace or Tracer()
    splits = {seed: split_target(target, target_name, seed, cfg, trace) for seed in sorted(cfg.seeds)}
    points, all_results = [], []
    for mix in cfg.sweep_mixes:
        results = []
        for seed, split in splits.items():
            pp = prepare_pair(source, source_name, split, cfg, mix, trace)
            results.append(run_prepared(pp, spec, cfg, trace))
        all_results += results
        numeric = [r for r in results if r.auc is not None]
        points.append(SweepPoint(mix, mean_auc(results), len(numeric), len(results) - len(numeric)))
    return points, all_results


def sweep_to_csv(points, source_name, target_name, method_label) -> str:
    lines = ["source,target,method,mix,mean_auc,n_numeric,n_na"]
    for p in points:
        lines.append(f"{source_name},{target_name},{method_label},{format_ratio(p.mix)},"
                     f"{format_auc(p.mean_auc, 6)},{p.n_numeric},{p.n_na}")
    return "\n".join(lines) + "\n"


def default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))


# -- controlled-shift experiments ---------------------------------------------------

def shifted_studies(base: StudyProfile, delta: float, seed: int, root_seed: int = 0) -> tuple[Dataset, Dataset]:
    """Fresh (source, target) studies from ``shift_pair(base, delta)`` for one replicate."""
    a, b = shift_pair(base, delta, stream(root_seed, _GENERATE, "shift", seed, repr(delta)))
    source = prepare_study(generate(a, stream(root_seed, _GENERATE, seed, a.name)))
    target = prepare_study(generate(b, stream(root_seed, _GENERATE, seed, b.name)))
    return source, target


def run_shift_suite(base: StudyProfile, delta: float, cfg: ExperimentConfig,
                    methods=(Method.BASELINE, *adapt.TRANSFER_METHODS),
                    mixes=None) -> dict[tuple[str, float], float | None]:
    """Mean AUC per (method, mix) over ``cfg.seeds``, each seed drawing a new shifted pair."""
    mixes = tuple(mixes) if mixes is not None else (cfg.source_target_mix,)
    specs = [m if isinstance(m, MethodSpec) else MethodSpec(Method.parse(m) if isinstance(m, str) else m) for m in methods]
    runs: dict[tuple[str, float], list[TransferResult]] = {}
    for seed in sorted(cfg.seeds):
        source, target = shifted_studies(base, delta, seed, cfg.root_seed)
        split = split_target(target, "target", seed, cfg)
        for mix in mixes:
            pp = prepare_pair(source, "source", split, cfg, mix)
            for spec in specs:
                runs.setdefault((spec.method.label, mix), []).append(run_prepared(pp, spec, cfg))
    return {k: mean_auc(v) for k, v in runs.items()}
