"""Command-line entry point: ``symptransfer <command> [options]``.

Commands: generate, features, pair, matrix, sweep.  Exit status is 0 on
success (NA results included) and 2 on malformed input or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path


from . import harness
from .adapt import Method, MethodSpec
from .config import ConfigError, parse_list, parse_ratio
from .core import DataError, write_csv
from .featurize import expand
from .harness import DatasetRef, ExperimentConfig, Tracer
from .preprocess import significance_table
from .learn import LearnerError
from .synth import PRESET_NAMES, generate, preset_profiles, profiles_to_config


class UsageError(ValueError):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    g.add_argument("--seeds", type=int, default=None, metavar="N", help="number of replicate seeds")
    g.add_argument("--config", type=Path, default=None, metavar="PATH", help="experiment config file")
    g.add_argument("--out", type=Path, default=None, metavar="DIR", help="output directory")
    g.add_argument("--p-threshold", type=float, default=None, help="significance threshold (default 0.05)")
    g.add_argument("--workers", type=int, default=None, help="worker processes for matrix runs")
    g.add_argument("--trace", action="store_true", help="print one line per pipeline stage to stderr")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="symptransfer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write synthetic studies as CSV")
    g.add_argument("--preset", action="append", default=None,
                   help=f"preset study to emit (repeatable; default all of {', '.join(PRESET_NAMES)})")
    g.add_argument("--materialize", action="store_true", help="include combination columns")
    g.add_argument("--profiles", action="store_true", help="also write the profiles as profiles.cfg")

    f = sub.add_parser("features", parents=[common], help="significant features of each dataset")
    f.add_argument("--data", action="append", default=None, help="dataset CSV, preset or config name")
    f.add_argument("--top", type=int, default=None, help="show at most this many rows")

    for name, helptext in (("pair", "one source/target/method run"), ("sweep", "source:target mix series")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--source", required=True)
        s.add_argument("--target", required=True)
        s.add_argument("--method", default="union" if name == "sweep" else "feda")
        if name == "sweep":
            s.add_argument("--mixes", default=None, help="comma list of ratios, e.g. 1,2,4 or 1:1,2:1")
        else:
            s.add_argument("--mix", default=None, help="source:target ratio (default 1:1)")

    sub.add_parser("matrix", parents=[common], help="all ordered pairs x all methods")
    return parser


def _config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.preset_config()
    updates = {}
    if args.seed is not None:
        updates["root_seed"] = args.seed
    if args.seeds is not None:
        if args.seeds < 1:
            raise UsageError("--seeds must be at least 1")
        updates["seeds"] = tuple(range(args.seeds))
    if args.p_threshold is not None:
        if not 0 <= args.p_threshold <= 1:
            raise UsageError("--p-threshold must lie in [0, 1]")
        updates["p_threshold"] = args.p_threshold
    if args.workers is not None:
        updates["workers"] = max(1, args.workers)
    if args.out is not None:
        updates["output"] = str(args.out)
    return replace(cfg, **updates)


def _resolve(token: str, cfg: ExperimentConfig) -> DatasetRef:
    refs = {r.name: r for r in cfg.datasets}
    if token in refs:
        return refs[token]
    path = Path(token)
    if path.suffix.lower() == ".csv" or path.exists():
        if not path.exists():
            raise DataError(f"{path}: no such file")
        return DatasetRef(path.stem, path=str(path))
    presets = preset_profiles()
    if token in presets:
        return DatasetRef(token, profile=presets[token])
    raise UsageError(f"unknown dataset {token!r}: not a CSV file, config dataset or preset")


def _emit(text: str, out_dir: Path | None, filename: str, stdout) -> None:
    if out_dir is None:
        stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / filename).write_bytes(text.encode("utf-8"))
    print(f"wrote {out_dir / filename}", file=sys.stderr)


def cmd_generate(args, cfg, stdout):
    out = args.out or Path(".")
    if args.config is not None and not args.preset:
        refs = [r for r in cfg.datasets if r.profile is not None]
    else:
        presets = preset_profiles()
        names = args.preset or list(PRESET_NAMES)
        unknown = [n for n in names if n not in presets]
        if unknown:
            raise UsageError(f"unknown preset(s) {', '.join(unknown)}")
        refs = [DatasetRef(n, profile=presets[n]) for n in names]
    out.mkdir(parents=True, exist_ok=True)
    for ref in refs:
        d = generate(ref.profile, harness.stream(cfg.root_seed, 4, ref.name))
        if args.materialize:
            d = expand(d)
        path = out / f"{ref.name}.csv"
        write_csv(d, path)
        print(f"{ref.name}: {d.n} rows, {int(d.y.sum())} positive -> {path}", file=stdout)
    if args.profiles:
        (out / "profiles.cfg").write_bytes(profiles_to_config([r.profile for r in refs]).encode("utf-8"))
        print(f"profiles -> {out / 'profiles.cfg'}", file=stdout)


def features_table(d, p_threshold: float, top=None) -> str:
    rows = [r for r in significance_table(d) if r[2] < p_threshold]
    if top is not None:
        rows = rows[:top]
    lines = ["feature,coefficient,p"]
    lines += [f"{f},{coef:.6f},{p:.6g}" for f, coef, p in rows]
    return "\n".join(lines) + "\n"


def cmd_features(args, cfg, stdout):
    tokens = args.data or [r.name for r in cfg.datasets]
    blocks = []
    for token in tokens:
        ref = _resolve(token, cfg)
        d = ref.load(cfg.root_seed)
        try:
            table = features_table(d, cfg.p_threshold, args.top)
        except LearnerError as e:
            table = f"# NA: {e}\n"
        blocks.append(table if len(tokens) == 1 else f"# {ref.name}\n{table}")
    _emit("\n".join(blocks), args.out, "features.csv", stdout)


def _method(text: str) -> MethodSpec:
    try:
        return MethodSpec(Method.parse(text))
    except ValueError as e:
        raise UsageError(str(e)) from None


def _spec_for(cfg, method: Method) -> MethodSpec:
    for spec in cfg.methods:
        if spec.method is method:
            return spec
    return MethodSpec(method)


def cmd_pair(args, cfg, stdout):
    src_ref, tgt_ref = _resolve(args.source, cfg), _resolve(args.target, cfg)
    spec = _spec_for(cfg, _method(args.method).method)
    mix = parse_ratio(args.mix) if args.mix else None
    source, target = src_ref.load(cfg.root_seed), tgt_ref.load(cfg.root_seed)
    seeds = cfg.seeds if args.seeds is not None or args.config is not None else (0,)
    trace = Tracer(args.trace)
    results = [
        harness.run_single(source, target, spec, s, cfg, source_name=src_ref.name,
                           target_name=tgt_ref.name, mix=mix, trace=trace)
        for s in sorted(seeds)
    ]
    _flush_trace(trace.lines)
    _emit(harness.results_to_csv(results), args.out, "pair.csv", stdout)


def cmd_matrix(args, cfg, stdout):
    if args.workers is None and args.config is None:
        cfg = replace(cfg, workers=harness.default_workers())
    run = harness.run_matrix(cfg, trace=args.trace)
    _flush_trace(run.trace)
    out = Path(cfg.output) if cfg.output else None
    if out is not None:
        for path in harness.write_matrix_outputs(run, out):
            print(f"wrote {path}", file=sys.stderr)
    lines = ["baseline (target on itself): " + ", ".join(
        f"{t}={harness.format_auc(run.baseline(t))}" for t in run.names)]
    text = "\n".join(lines) + "\n\n" + "\n".join(harness.matrix_to_text(run, m) for m in run.methods)
    stdout.write(text)


def cmd_sweep(args, cfg, stdout):
    src_ref, tgt_ref = _resolve(args.source, cfg), _resolve(args.target, cfg)
    spec = _spec_for(cfg, _method(args.method).method)
    if args.mixes:
        try:
            cfg = replace(cfg, sweep_mixes=tuple(parse_ratio(x) for x in parse_list(args.mixes)))
        except ValueError as e:
            raise UsageError(f"--mixes: {e}") from None
    source, target = src_ref.load(cfg.root_seed), tgt_ref.load(cfg.root_seed)
    trace = Tracer(args.trace)
    points, _ = harness.run_sweep(cfg, source, target, spec, src_ref.name, tgt_ref.name, trace)
    _flush_trace(trace.lines)
    _emit(harness.sweep_to_csv(points, src_ref.name, tgt_ref.name, spec.method.label), args.out, "sweep.csv", stdout)


def _flush_trace(lines):
    for line in lines:
        print(line, file=sys.stderr)


COMMANDS = {
    "generate": cmd_generate,
    "features": cmd_features,
    "pair": cmd_pair,
    "matrix": cmd_matrix,
    "sweep": cmd_sweep,
}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg, stdout)
    except (ConfigError, DataError, UsageError) as e:
        print(f"symptransfer: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
