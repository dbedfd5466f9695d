"""Acceptance suite: one test per criterion, reported as PASS/FAIL lines.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists every
criterion.  Criterion 12 runs the six-study matrix twice at 20 seeds.
"""

import time

import numpy as np
import pytest

from symptransfer import adapt, harness
from symptransfer.adapt import Method
from symptransfer.core import align_spaces, project_dataset
from symptransfer.learn import FALLBACK_RIDGE, auc, fit_logistic, gradient, objective
from symptransfer.preprocess import class_balance_resample, covariate_shift_resample, profile_weights
from symptransfer.synth import benchmark_profile, na_pathway_pair

from conftest import make_dataset
from oracles import brute_auc, central_difference, first_order_logistic, total_variation

criterion = pytest.mark.criterion


# -- 1 ------------------------------------------------------------------------

@criterion(1, "rank-sum AUC equals brute-force pair counting (1e-12, 1000 cases, < 5 s)")
def test_auc_matches_pair_counting():
    rng = np.random.default_rng(1)
    cases = []
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        levels = int(rng.integers(1, 8))
        scores = rng.integers(0, levels, n) / levels if rng.random() < 0.6 else rng.normal(size=n)
        cases.append((scores, labels))
    start = time.perf_counter()
    got = [auc(s, l) for s, l in cases]
    elapsed = time.perf_counter() - start
    worst = max(abs(g - brute_auc(s, l)) for g, (s, l) in zip(got, cases))
    print(f"max |AUC - brute| = {worst:.2e}, {elapsed:.3f} s")
    assert worst <= 1e-12
    assert elapsed < 5.0


# -- 2 ------------------------------------------------------------------------

def _random_problem(rng):
    n, k = int(rng.integers(150, 400)), int(rng.integers(2, 7))
    X = (rng.random((n, k)) < rng.uniform(0.2, 0.6, k)).astype(float)
    beta = rng.normal(0, 1.0, k)
    y = (rng.random(n) < 1 / (1 + np.exp(-(rng.normal(0, 0.5) + X @ beta)))).astype(float)
    w = rng.uniform(0.5, 2.0, n)
    return X, y, w


@criterion(2, "learner: finite-difference gradient, first-order optimizer agreement, separable fallback")
def test_learner_correctness():
    rng = np.random.default_rng(2)
    worst_grad = worst_coef = 0.0
    checked = 0
    while checked < 50:
        X, y, w = _random_problem(rng)
        fit = fit_logistic(X, y, w)
        if fit.ridge_used:
            continue  # separable draw; not part of the non-separable population
        checked += 1
        params = np.concatenate([[fit.intercept], fit.coef]) + rng.normal(0, 0.3, X.shape[1] + 1)
        g = gradient(params, X, y, w)
        fd = central_difference(lambda b: objective(b, X, y, w), params)
        worst_grad = max(worst_grad, np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)))
        ref = first_order_logistic(X, y, w)
        worst_coef = max(worst_coef, np.max(np.abs(np.concatenate([[fit.intercept], fit.coef]) - ref)))
    print(f"gradient rel err {worst_grad:.2e}, coefficient gap {worst_coef:.2e}")
    assert worst_grad <= 1e-5
    assert worst_coef <= 1e-4

    x = np.repeat([0.0, 1.0], 20)[:, None]
    sep = fit_logistic(x, x[:, 0])
    assert sep.ridge_used == FALLBACK_RIDGE and sep.converged and sep.coef[0] > 5


# -- 3 ------------------------------------------------------------------------

POOL = ["male", "age0-4", "age65+", "cough", "fever", "chills", "rash", "cough&fever", "chills&fever",
        "cough&fever&sorethroat", "nausea", "vomit"]


@criterion(3, "FEDA: F_a = F_s + F_ov + F_t and origin-block zeroing (200 space pairs)")
def test_feda_structure():
    rng = np.random.default_rng(3)
    for _ in range(200):
        s_names = sorted(rng.choice(POOL, int(rng.integers(1, 8)), replace=False))
        t_names = sorted(rng.choice(POOL, int(rng.integers(1, 8)), replace=False))
        ns, nt = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        src = make_dataset(s_names, rng.integers(0, 2, (ns, len(s_names))), rng.integers(0, 2, ns))
        tgt = make_dataset(t_names, rng.integers(0, 2, (nt, len(t_names))), rng.integers(0, 2, nt))
        al = align_spaces(src.space, tgt.space)
        aug = adapt.feda_augment(src, tgt, al)
        assert aug.n_features == src.space.size + al.n_shared + tgt.space.size
        assert aug.X.shape == (ns + nt, aug.n_features)
        s_block, g_block, t_block = aug.blocks()
        from_src = aug.origin == adapt.SOURCE_ORIGIN
        assert not t_block[from_src].any()
        assert not s_block[~from_src].any()
        assert np.array_equal(s_block[from_src], src.X[:, [src.space.index(f) for f in adapt.source_features(al)]])
        assert np.array_equal(t_block[~from_src], tgt.X[:, [tgt.space.index(f) for f in adapt.target_features(al)]])
        shared_rows = np.vstack([src.X[:, [src.space.index(f) for f in al.shared]],
                                 tgt.X[:, [tgt.space.index(f) for f in al.shared]]])
        assert np.array_equal(g_block, shared_rows)


# -- shared fixtures for 4 and 5 --------------------------------------------------

def _study(rng, names, beta, n, intercept=-0.3):
    X = (rng.random((n, len(names))) < 0.4).astype(np.uint8)
    y = (rng.random(n) < 1 / (1 + np.exp(-(intercept + X @ beta)))).astype(np.uint8)
    return make_dataset(names, X, y)


@pytest.fixture(scope="module")
def small_pair():
    rng = np.random.default_rng(45)
    source = _study(rng, ["chills", "cough", "fever", "rash"], np.array([0.8, 0.6, 1.4, 0.2]), 600)
    target = _study(rng, ["cough", "fever", "headache", "nausea"], np.array([0.4, 1.1, 0.9, -0.5]), 500)
    idx = rng.permutation(target.n)
    return source, target.take(np.sort(idx[:400])), target.take(np.sort(idx[400:]))


@criterion(4, "LinInt endpoints: lambda=1 is Baseline, lambda=0 is SourceOnly, exactly")
def test_linint_endpoints(small_pair):
    source, train, test = small_pair
    al = align_spaces(source.space, train.space)
    at_one = adapt.run_linint(source, train, test, al, lambdas=[1.0])
    at_zero = adapt.run_linint(source, train, test, al, lambdas=[0.0])
    base = adapt.run_baseline(train, test, al)
    only = adapt.run_source_only(source, test, al)
    assert np.array_equal(at_one.scores, base.scores) and at_one.auc == base.auc
    assert np.array_equal(at_zero.scores, only.scores) and at_zero.auc == only.auc


@criterion(5, "PRED with a constant source prediction reproduces Baseline AUC (1e-6)")
def test_pred_constant_feature(small_pair):
    source, train, test = small_pair
    X = source.X.copy()
    al = align_spaces(source.space, train.space)
    for f in al.shared:
        X[:, source.space.index(f)] = 0
    flat = make_dataset(source.space.names(), X, source.y)
    model = fit_logistic(project_dataset(flat, al.shared).X, flat.y)
    assert model.converged and model.ridge_used == 0
    assert np.ptp(adapt.pred_augment(test, al, model)[:, 0]) == 0
    pred = adapt.run_pred(flat, train, test, al, source_model=model)
    base = adapt.run_baseline(train, test, al)
    assert pred.info["ridge"] == 0 and base.info["ridge"] == 0
    assert abs(pred.auc - base.auc) <= 1e-6


# -- 6 ------------------------------------------------------------------------

@criterion(6, "covariate-shift resampling within TV 0.05 of the reweighted distribution (m=50,000)")
def test_covariate_shift_fidelity():
    rng = np.random.default_rng(6)
    xs = np.r_[np.ones(80), np.zeros(20)][:, None]
    xt = np.r_[np.ones(25), np.zeros(75)][:, None]
    source = make_dataset(["fever"], xs, rng.integers(0, 2, 100))
    target = make_dataset(["fever"], xt, rng.integers(0, 2, 100))
    k = 2
    ratio = {v: ((np.sum(xt == v) + 1) / (100 + k)) / ((np.sum(xs == v) + 1) / (100 + k)) for v in (0, 1)}
    mass = np.array([np.sum(xs == v) * ratio[v] for v in (0, 1)])
    expected = mass / mass.sum()
    table = profile_weights(source, target)
    assert table.weight_of([1]) == pytest.approx(ratio[1], rel=1e-12)
    drawn = covariate_shift_resample(source, target, 50_000, rng)
    observed = np.array([np.mean(drawn.X[:, 0] == v) for v in (0, 1)])
    tv = total_variation(observed, expected)
    print(f"expected {expected.round(4)}, observed {observed.round(4)}, TV {tv:.4f}")
    assert tv <= 0.05


# -- 7 ------------------------------------------------------------------------

@criterion(7, "class-balance resampling within 1 observation of the target ratio (100 cases)")
def test_class_ratio_matching():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        ns, nt, m = (int(v) for v in rng.integers(2, 400, 3))
        ys = rng.integers(0, 2, ns)
        ys[:2] = [0, 1]
        yt = (rng.random(nt) < rng.uniform(0.02, 0.98)).astype(int)
        source = make_dataset(["fever"], rng.integers(0, 2, (ns, 1)), ys)
        target = make_dataset(["fever"], rng.integers(0, 2, (nt, 1)), yt)
        out = class_balance_resample(source, target, m, rng)
        assert out.n == m
        worst = max(worst, abs(out.y.sum() - m * yt.mean()))
    print(f"worst |positives - m * target fraction| = {worst:.3f}")
    assert worst <= 1.0


# -- 8, 9, 10 -------------------------------------------------------------------

SEEDS = tuple(range(20))


@pytest.fixture(scope="module")
def no_shift():
    cfg = harness.ExperimentConfig(datasets=(), seeds=SEEDS)
    return harness.run_shift_suite(benchmark_profile(), 0.0, cfg, (Method.BASELINE, Method.SOURCE_ONLY))


@pytest.fixture(scope="module")
def shifted():
    cfg = harness.ExperimentConfig(datasets=(), seeds=SEEDS)
    methods = (Method.BASELINE, *adapt.TRANSFER_METHODS)
    return harness.run_shift_suite(benchmark_profile(), 0.3, cfg, methods, mixes=(1.0, 2.0, 4.0))


@criterion(8, "identical domains: |SourceOnly - Baseline| <= 0.03 over 20 seeds")
def test_identical_domain_transfer(no_shift):
    gap = abs(no_shift["SourceOnly", 1.0] - no_shift["Baseline", 1.0])
    print(f"Baseline {no_shift['Baseline', 1.0]:.4f}, SourceOnly {no_shift['SourceOnly', 1.0]:.4f}, gap {gap:.4f}")
    assert gap <= 0.03


@criterion(9, "shifted domains: FEDA, PRED and LinInt each >= SourceOnly over 20 seeds")
def test_shift_ordering(shifted):
    floor = shifted["SourceOnly", 1.0]
    for label in ("FEDA", "PRED", "LinInt"):
        print(f"{label} {shifted[label, 1.0]:.4f} vs SourceOnly {floor:.4f}")
        assert shifted[label, 1.0] >= floor


@criterion(10, "Union sweep 1:1, 2:1, 4:1 non-increasing within 0.01 over 20 seeds")
def test_union_sweep(shifted):
    series = [shifted["Union", mix] for mix in (1.0, 2.0, 4.0)]
    print("Union by mix:", ", ".join(f"{v:.4f}" for v in series))
    for a, b in zip(series, series[1:]):
        assert b <= a + 0.01


# -- 11 -----------------------------------------------------------------------

@criterion(11, "NA pathway: non-significant overlap gives NA for SourceOnly, numeric AUC for FEDA")
def test_na_pathway():
    source, target = na_pathway_pair()
    cfg = harness.ExperimentConfig(datasets=(), seeds=(0, 1, 2))
    for seed in cfg.seeds:
        split = harness.split_target(target, "target", seed, cfg)
        assert split.selected is not None and "cough" not in map(str, split.selected)
        only = harness.run_single(source, target, Method.SOURCE_ONLY, seed, cfg)
        feda = harness.run_single(source, target, Method.FEDA, seed, cfg)
        print(f"seed {seed}: SourceOnly NA ({only.na_reason}); FEDA {feda.auc:.4f}")
        assert only.is_na and only.na_reason == adapt.NO_OVERLAP
        assert feda.auc is not None and 0 <= feda.auc <= 1


# -- 12 -----------------------------------------------------------------------

@criterion(12, "six presets x six methods x 20 seeds under 5 minutes, byte-identical reruns")
def test_end_to_end_budget(tmp_path):
    outputs = []
    for workers in (1, 2):
        cfg = harness.preset_config(seeds=SEEDS, root_seed=0, workers=workers)
        start = time.perf_counter()
        run = harness.run_matrix(cfg)
        paths = harness.write_matrix_outputs(run, tmp_path / f"w{workers}")
        elapsed = time.perf_counter() - start
        print(f"workers={workers}: {elapsed:.1f} s, {len(run.results)} runs")
        assert elapsed < 300
        assert len(run.methods) == 5
        outputs.append({p.name: p.read_bytes() for p in paths})
    assert outputs[0] == outputs[1]
    na = [r for r in run.results if r.is_na]
    assert all(r.na_reason for r in na)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
