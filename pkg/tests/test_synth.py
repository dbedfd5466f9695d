import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symptransfer import adapt
from symptransfer.config import ConfigError, parse_config
from symptransfer.core import DataError
from symptransfer.harness import prepare_study
from symptransfer.synth import (
    MASTER_CONDITIONALS,
    PRESET_NAMES,
    StudyProfile,
    benchmark_profile,
    generate,
    preset_profiles,
    profile_from_section,
    profile_to_config,
    shift_pair,
)


def cough_only(n=200, prevalence=0.4, noise=0.0):
    return StudyProfile("toy", n, prevalence, ("cough",), {"cough": (1.0, 0.0)}, noise, 0)


def test_noise_free_cough_is_the_label():
    d = generate(cough_only(), np.random.default_rng(0))
    assert np.array_equal(d.column("cough"), d.y)


def test_positive_count_binomial_bound():
    p = StudyProfile("half", 10_000, 0.5, ("cough",), {"cough": (0.6, 0.4)}, 0.0, 0)
    d = generate(p, np.random.default_rng(1))
    assert abs(int(d.y.sum()) - 5000) <= 3 * 50


def test_inclusion_rule_enrichment_matches_enumeration():
    cond = {s: (0.6, 0.0) for s in ("cough", "fever", "chills")}
    p = StudyProfile("strict", 2000, 0.1, tuple(cond), cond, 0.0, 2)
    retained = {}
    for label in (1, 0):
        q = p.observed_rates(label)
        retained[label] = sum(
            np.prod([qi if b else 1 - qi for qi, b in zip(q, bits)])
            for bits in itertools.product((0, 1), repeat=3) if sum(bits) >= 2
        )
        assert p.retention(label) == pytest.approx(retained[label], abs=1e-12)
    assert retained[0] == 0 and p.expected_positive_fraction() == 1.0
    assert generate(p, np.random.default_rng(2)).y.all()


def test_unreachable_inclusion_rule_errors():
    p = StudyProfile("never", 10, 0.5, ("cough",), {"cough": (0.5, 0.5)}, 0.0, 2)
    with pytest.raises(DataError, match="unreachable"):
        generate(p, np.random.default_rng(0))


class TestPresets:
    presets = preset_profiles()

    def test_table_sizes(self):
        assert set(self.presets) == set(PRESET_NAMES)
        assert self.presets["NYUMC"].n == 21907
        assert self.presets["Hutterite1"].inclusion == 2

    def test_expected_positive_share(self):
        assert self.presets["GoViral"].expected_positive_fraction() == pytest.approx(297 / 520, rel=1e-9)
        assert self.presets["NYUMC"].expected_positive_fraction() == pytest.approx(583 / 21907, rel=1e-9)

    def test_deterministic(self):
        again = preset_profiles()
        for name, p in self.presets.items():
            assert again[name].conditionals == p.conditionals


class TestShiftPair:
    base = benchmark_profile()

    def test_zero_shift_is_exchangeable(self):
        a, b = shift_pair(self.base, 0.0, np.random.default_rng(0))
        assert a.conditionals == b.conditionals

    def test_shift_size_before_clamping(self):
        a, b = shift_pair(self.base, 0.3, np.random.default_rng(0))
        for s in self.base.symptoms:
            for va, vb in zip(a.conditionals[s], b.conditionals[s]):
                if 0.01 < va + 0.3 < 0.99 and 0.01 < va - 0.3 < 0.99:
                    assert abs(va - vb) == pytest.approx(0.3)

    def test_large_shift_saturates(self):
        _, b = shift_pair(self.base, 0.8, np.random.default_rng(0))
        assert all(v in (0.01, 0.99) for rates in b.conditionals.values() for v in rates)

    def test_negative_shift_rejected(self):
        with pytest.raises(ValueError):
            shift_pair(self.base, -0.1, np.random.default_rng(0))


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_same_seed_bit_identical(seed):
    p = benchmark_profile(n=300)
    a = generate(p, np.random.default_rng(seed))
    b = generate(p, np.random.default_rng(seed))
    assert a.same_as(b)


def test_informative_study_is_learnable():
    cond = {s: (0.8, 0.2) for s in ("cough", "fever", "chills", "headache")}
    d = prepare_study(generate(StudyProfile("clean", 5000, 0.4, tuple(cond), cond, 0.0, 0),
                               np.random.default_rng(4)))
    tr, te = adapt.stratified_split(d.y, 0.2, np.random.default_rng(5))
    assert adapt.run_baseline(d.take(tr), d.take(te)).auc > 0.9


def test_marginals_match_analytic():
    p = StudyProfile("marg", 50_000, 0.3, ("cough", "fever", "rash"),
                     {"cough": (0.8, 0.4), "fever": (0.7, 0.2), "rash": (0.1, 0.05)}, 0.08, 1)
    d = generate(p, np.random.default_rng(6))
    got = np.array([d.column(s).mean() for s in p.symptoms])
    assert np.max(np.abs(got - p.expected_symptom_marginals())) <= 0.02
    assert d.y.mean() == pytest.approx(p.expected_positive_fraction(), abs=0.02)


class TestConfigRoundTrip:
    def test_profile_survives(self):
        p = preset_profiles()["Hutterite2"]
        (sec,) = parse_config(profile_to_config(p), "p.cfg")
        q = profile_from_section(sec)
        assert (q.name, q.n, q.prevalence, q.noise, q.inclusion, q.symptoms) == \
               (p.name, p.n, p.prevalence, p.noise, p.inclusion, p.symptoms)
        assert q.conditionals == p.conditionals
        assert np.array_equal(q.demographics_mix, p.demographics_mix)

    def test_preset_with_override(self):
        (sec,) = parse_config("[dataset small]\npreset = GoViral\nn = 100\ncond.fever = 0.9, 0.1\n")
        q = profile_from_section(sec)
        assert q.name == "small" and q.n == 100 and q.conditionals["fever"] == (0.9, 0.1)

    @pytest.mark.parametrize("text, where", [
        ("[dataset x]\nn = 10\nprevalence = 0.5\nsymptoms = cough\n", ":1: .*cond.cough"),
        ("[dataset x]\npreset = Nope\n", ":2: \\[preset\\] unknown preset"),
        ("[dataset x]\npreset = GoViral\ncond.fever = 0.9\n", ":3: \\[cond.fever\\]"),
        ("[dataset x]\npreset = GoViral\nn = many\n", ":3: \\[n\\] invalid value"),
    ])
    def test_errors_name_line_and_field(self, text, where):
        (sec,) = parse_config(text, "s.cfg")
        with pytest.raises(ConfigError, match="s.cfg" + where):
            profile_from_section(sec)


def test_master_table_rates_are_probabilities():
    for pos, neg in MASTER_CONDITIONALS.values():
        assert 0 < neg <= pos < 1
