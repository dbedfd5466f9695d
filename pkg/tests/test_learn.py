import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings, strategies as st

from symptransfer.learn import (
    FALLBACK_RIDGE,
    LearnerError,
    SingleClassError,
    auc,
    dump_model,
    fit_logistic,
    predict_prob,
)

from oracles import brute_auc, first_order_logistic


def noisy_problem(seed, n=400, k=3):
    rng = np.random.default_rng(seed)
    X = (rng.random((n, k)) < 0.4).astype(float)
    beta = np.linspace(1.2, -0.8, k)
    y = (rng.random(n) < 1 / (1 + np.exp(-(-0.3 + X @ beta)))).astype(float)
    return X, y


class TestAuc:
    def test_hand_example(self):
        assert auc([0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]) == 0.75

    def test_perfect_and_all_ties(self):
        y = np.array([0, 1, 1, 0, 1])
        assert auc(y.astype(float), y) == 1.0
        assert auc(np.ones(5), y) == 0.5

    def test_undefined_for_one_class(self):
        assert auc([0.1, 0.2], [1, 1]) is None

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=40))
    def test_matches_pair_count(self, rows):
        s, y = (np.array(v) for v in zip(*rows))
        got, want = auc(s, y), brute_auc(s, y)
        assert got == want if want is None else abs(got - want) <= 1e-12

    @given(st.lists(st.integers(-40, 40), min_size=4, max_size=30), st.integers(0, 2**32 - 1))
    def test_monotone_transform_invariance(self, scores, seed):
        y = np.random.default_rng(seed).integers(0, 2, len(scores))
        y[:2] = [0, 1]
        s = np.array(scores) / 8.0
        assert auc(np.exp(s), y) == auc(s, y)


class TestFit:
    def test_matches_statsmodels(self):
        X, y = noisy_problem(0)
        fit = fit_logistic(X, y)
        ref = sm.Logit(y, sm.add_constant(X)).fit(disp=0)
        assert fit.ridge_used == 0 and fit.converged
        np.testing.assert_allclose(np.r_[fit.intercept, fit.coef], ref.params, atol=1e-7)
        np.testing.assert_allclose(np.r_[fit.intercept_z, fit.z], ref.tvalues, rtol=1e-6)
        np.testing.assert_allclose(np.r_[fit.intercept_p, fit.p], ref.pvalues, rtol=1e-5)

    def test_matches_first_order_oracle_with_ridge(self):
        X, y = noisy_problem(1)
        fit = fit_logistic(X, y, ridge=0.5)
        np.testing.assert_allclose(np.r_[fit.intercept, fit.coef], first_order_logistic(X, y, ridge=0.5), atol=1e-5)

    def test_separable_falls_back_to_ridge(self):
        x = np.repeat([0.0, 1.0], 100)[:, None]
        fit = fit_logistic(x, x[:, 0])
        assert fit.separated and fit.converged
        assert fit.ridge_used == FALLBACK_RIDGE
        assert fit.coef[0] > 10

    @pytest.mark.xfail(strict=True, reason="Wald p under separation is inflated by the ridge standard error; see notes")
    def test_separable_wald_p_tiny(self):
        x = np.repeat([0.0, 1.0], 100)[:, None]
        assert fit_logistic(x, x[:, 0]).p[0] < 1e-6

    def test_independent_feature_rarely_significant(self):
        rng = np.random.default_rng(7)
        coefs, pvals = [], []
        for _ in range(100):
            x = rng.integers(0, 2, (1000, 1)).astype(float)
            y = rng.integers(0, 2, 1000).astype(float)
            fit = fit_logistic(x, y)
            coefs.append(fit.coef[0])
            pvals.append(fit.p[0])
        assert abs(np.mean(coefs)) <= 0.2
        assert np.sum(np.array(pvals) > 0.05) >= 90

    def test_weights_scale_out_of_argmax(self):
        X, y = noisy_problem(2)
        a, b = fit_logistic(X, y), fit_logistic(X, y, np.full(y.size, 2.0))
        np.testing.assert_allclose(b.coef, a.coef, atol=1e-9)
        assert not np.allclose(a.z, b.z)

    @settings(max_examples=25)
    @given(st.integers(0, 2**32 - 1))
    def test_row_permutation_changes_nothing(self, seed):
        X, y = noisy_problem(seed % 1000, n=150)
        perm = np.random.default_rng(seed).permutation(y.size)
        a, b = fit_logistic(X, y), fit_logistic(X[perm], y[perm])
        assert np.array_equal(a.coef, b.coef) and a.intercept == b.intercept
        s = predict_prob(a, X)
        assert auc(s, y) == auc(s[perm], y[perm])

    def test_duplicated_column_is_aliased(self):
        X, y = noisy_problem(3)
        fit = fit_logistic(np.hstack([X, X[:, :1]]), y)
        assert fit.aliased == (3,)
        assert fit.coef[3] == 0 and np.isnan(fit.p[3])
        assert fit.wald(3) is None and fit.wald(0) is not None
        np.testing.assert_allclose(fit.coef[:3], fit_logistic(X, y).coef, atol=1e-9)

    def test_single_class_raises(self):
        with pytest.raises(SingleClassError):
            fit_logistic(np.ones((5, 1)), np.ones(5))

    def test_shape_errors(self):
        with pytest.raises(LearnerError):
            fit_logistic(np.ones((5, 1)), np.ones(4))


class TestPredict:
    def test_zero_model_gives_half(self):
        X, y = noisy_problem(4)
        fit = fit_logistic(X, y)
        zero = type(fit)(**{**fit.__dict__, "coef": np.zeros(3), "intercept": 0.0})
        assert np.all(predict_prob(zero, X) == 0.5)
        big = type(fit)(**{**fit.__dict__, "coef": np.zeros(3), "intercept": 30.0})
        assert np.all(predict_prob(big, X) > 1 - 1e-12)

    def test_dimension_mismatch(self):
        X, y = noisy_problem(5)
        with pytest.raises(LearnerError, match="expected 3 columns"):
            predict_prob(fit_logistic(X, y), X[:, :2])


def test_dump_model_format():
    X, y = noisy_problem(6)
    fit = fit_logistic(np.hstack([X, X[:, :1]]), y, feature_names=["cough", "fever", "rash", "dup"])
    lines = dump_model(fit).splitlines()
    assert lines[0].startswith("__intercept__\t")
    assert [l.split("\t")[0] for l in lines[1:]] == ["cough", "fever", "rash", "dup"]
    assert lines[-1].endswith("\tNA")
    assert all(len(l.split("\t")) == 3 for l in lines)
