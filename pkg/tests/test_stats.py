from __future__ import annotations

import math
import statistics

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hybridseal.errors import DegenerateVarianceError, InsufficientSamplesError, InvalidParameterError
from hybridseal.stats import (
    BootstrapConfig,
    CovClass,
    StatSummary,
    TimingSampleSet,
    bootstrap_ci_median,
    classify_cov,
    clip_count,
    summarize,
    trim,
    welch,
)

from oracles import rel_err, welch_reference

durations = st.lists(st.floats(min_value=0.5, max_value=1e4, allow_nan=False), min_size=3, max_size=200)
FAST = BootstrapConfig(B=200)


class TestTrim:
    def test_n3000(self):
        assert clip_count(3000, 0.01) == 30
        assert trim(np.arange(1, 3001), 0.01).size == 2940

    def test_n50_floor_of_one(self):
        assert clip_count(50, 0.01) == 1
        assert trim(np.arange(1, 51), 0.01).size == 48

    def test_smallest(self):
        assert trim([5, 1, 9], 0.01).tolist() == [5]

    def test_sorted_before_clipping(self):
        out = trim([100, 1, 2, 3, 4, 5, 6, 7, 8, 0.5], 0.01)
        assert out.tolist() == [1, 2, 3, 4, 5, 6, 7, 8]

    def test_float_edge(self):
        # 700 * 0.01 is 7.000000000000001 in binary floating point, 2900 * 0.01 is 28.999999999999996
        assert clip_count(700, 0.01) == 7
        assert clip_count(2900, 0.01) == 29

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_too_few(self, n):
        with pytest.raises(InsufficientSamplesError):
            trim([1.0] * n)

    def test_bad_pct(self):
        with pytest.raises(InvalidParameterError):
            trim([1, 2, 3], 0.5)

    @given(st.integers(min_value=5, max_value=199))
    def test_idempotent_while_clip_is_one(self, n):
        # below 200 samples clip stays 1, so trimming again drops exactly one more per tail
        x = np.random.default_rng(n).random(n) + 1
        once = trim(x)
        twice = trim(once)
        assert once.size == n - 2 and twice.size == n - 4
        assert twice.tolist() == once[1:-1].tolist()


class TestSummarize:
    def test_constant(self):
        s = summarize([10.0] * 100)
        assert (s.mean, s.std, s.cov, s.ci95_lo, s.ci95_hi) == (10.0, 0.0, 0.0, 10.0, 10.0)

    def test_hand_computed(self):
        s = summarize([8.0, 10.0, 12.0])
        assert s.mean == pytest.approx(10.0) and s.std == pytest.approx(2.0)
        assert s.cov == pytest.approx(20.0)
        assert s.median == 10.0

    def test_synthetic_normal_cov(self):
        x = np.random.default_rng(5).normal(100, 5, 10_000)
        s = summarize(TimingSampleSet(x, "syn"))
        assert 4.0 <= s.cov <= 6.0

    def test_trim_applied_from_sample_set(self):
        x = np.concatenate([np.full(98, 10.0), [1.0, 1000.0]])
        s = summarize(TimingSampleSet(x, trim_pct=0.01))
        assert s.n == 98 and s.std == 0.0

    def test_percentiles_linear(self):
        x = np.arange(1.0, 101.0)
        s = summarize(x, FAST)
        assert s.p95 == pytest.approx(95.05) and s.p99 == pytest.approx(99.01)

    def test_invalid_samples(self):
        with pytest.raises(InvalidParameterError):
            TimingSampleSet([1.0, -1.0, 2.0])
        with pytest.raises(InsufficientSamplesError):
            TimingSampleSet([])

    @given(durations)
    def test_invariants(self, xs):
        s = summarize(xs, FAST)
        assert s.p95 <= s.p99 <= max(xs) + 1e-9
        assert min(xs) <= s.median <= max(xs)
        assert s.cov == s.std / s.mean * 100.0
        assert s.ci95_lo <= s.ci95_hi

    @given(durations, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, xs, rnd):
        ys = list(xs)
        rnd.shuffle(ys)
        a, b = summarize(xs, FAST), summarize(ys, FAST)
        assert a == b

    def test_as_dict(self):
        d = summarize([1.0, 2.0, 3.0], FAST).as_dict()
        assert set(d) == {"n", "mean", "std", "median", "p95", "p99", "cov", "ci95_lo", "ci95_hi"}


class TestWelch:
    def test_hand_example(self):
        r = welch([1, 2, 3, 4, 5], [2, 4, 6, 8, 10])
        assert round(r.t, 4) == 1.8974
        assert round(r.nu, 3) == 5.882
        assert round(r.d, 4) == 1.2

    def test_identical(self):
        r = welch([1, 2, 3, 4], [1, 2, 3, 4])
        assert r.t == 0 and r.d == 0 and not r.significant_at_001

    def test_equal_variance_equal_n(self):
        r = welch([1, 2, 3, 4, 5], [11, 12, 13, 14, 15])
        assert r.nu == pytest.approx(8.0, rel=1e-12)

    def test_against_reference_50_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            a = rng.normal(rng.uniform(50, 150), rng.uniform(1, 20), rng.integers(5, 300)).tolist()
            b = rng.normal(rng.uniform(50, 150), rng.uniform(1, 20), rng.integers(5, 300)).tolist()
            r = welch(a, b)
            t, nu, d = welch_reference(a, b)
            assert rel_err(r.t, t) < 1e-9 and rel_err(r.nu, nu) < 1e-9 and rel_err(r.d, d) < 1e-9

    def test_from_summaries(self):
        a, b = [1.0, 2, 3, 4, 5], [2.0, 4, 6, 8, 10]
        r = welch(summarize(a, FAST), summarize(b, FAST))
        assert r.t == pytest.approx(welch(a, b).t, rel=1e-12)

    def test_significance(self):
        rng = np.random.default_rng(2)
        assert welch(rng.normal(100, 1, 500), rng.normal(110, 1, 500)).significant_at_001
        assert not welch(rng.normal(100, 1, 50), rng.normal(100, 1, 50)).significant_at_001

    def test_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            welch([5, 5, 5], [7, 7, 7])

    def test_too_few(self):
        with pytest.raises(InsufficientSamplesError):
            welch([1.0], [1.0, 2.0])

    @given(durations, durations)
    def test_antisymmetric_and_nu_bounds(self, a, b):
        assume(statistics.variance(a) > 1e-6 or statistics.variance(b) > 1e-6)
        ab, ba = welch(a, b), welch(b, a)
        assert ab.t == -ba.t and ab.d == -ba.d
        lo, hi = min(len(a), len(b)) - 1, len(a) + len(b) - 2
        assert lo - 1e-9 <= ab.nu <= hi + 1e-9


class TestBootstrap:
    def test_constant(self):
        assert bootstrap_ci_median([3.0] * 50) == (3.0, 3.0)

    def test_deterministic(self):
        x = np.random.default_rng(1).normal(100, 5, 500)
        assert bootstrap_ci_median(x, BootstrapConfig(seed=4)) == bootstrap_ci_median(x, BootstrapConfig(seed=4))
        assert bootstrap_ci_median(x, BootstrapConfig(seed=4)) != bootstrap_ci_median(x, BootstrapConfig(seed=5))

    def test_brackets_sample_median(self):
        x = np.random.default_rng(3).normal(100, 5, 1000)
        lo, hi = bootstrap_ci_median(x)
        assert lo <= np.median(x) <= hi

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            BootstrapConfig(B=99)
        with pytest.raises(InvalidParameterError):
            BootstrapConfig(lo_pct=90, hi_pct=10)

    def test_empty(self):
        with pytest.raises(InsufficientSamplesError):
            bootstrap_ci_median([])

    @pytest.mark.slow
    def test_coverage_small(self):
        hits = 0
        for seed in range(60):
            x = np.random.default_rng(1000 + seed).normal(100, 5, 1000)
            lo, hi = bootstrap_ci_median(x, BootstrapConfig(seed=seed))
            hits += lo <= 100 <= hi
        assert hits >= 50


class TestClassifyCov:
    def test_published_values(self):
        assert classify_cov(3.9, 2.1) is CovClass.TIMING_STABLE
        assert classify_cov(51.5, 2.1) is CovClass.DESIGN_VARIABLE

    def test_boundaries(self):
        assert classify_cov(2.1, 2.1) is CovClass.TIMING_STABLE
        assert classify_cov(4.0, 2.0) is CovClass.TIMING_STABLE
        assert classify_cov(4.01, 2.0) is CovClass.SCHEDULER_NOISE
        assert classify_cov(20.0, 2.0) is CovClass.SCHEDULER_NOISE
        assert classify_cov(20.01, 2.0) is CovClass.DESIGN_VARIABLE

    def test_accepts_summaries(self):
        mk = lambda cov: StatSummary(10, 1, 1, 1, 1, 1, cov, 1, 1)  # noqa: E731
        assert classify_cov(mk(5.0), mk(4.0)) is CovClass.TIMING_STABLE
        assert classify_cov(mk(8.0), mk(1.0)).value == "scheduler_noise"
