import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwdeq.lognum import (
    alternating_limit,
    complex_log_cumsum,
    extrapolate_geometric_levels,
    geometric_tail,
    log_cumsum_positive,
    signed_log_suffix_sums,
    suffix_sums,
)


class TestLogCumsum:
    def test_matches_plain_cumsum(self):
        rng = np.random.default_rng(1)
        vals = rng.uniform(0.1, 5.0, 200)
        got = np.exp(log_cumsum_positive(np.log(vals)))
        assert np.allclose(got, np.cumsum(vals), rtol=1e-13)

    def test_handles_extreme_scales(self):
        logs = np.arange(0.0, 2000.0, 1.0)  # terms e^0 .. e^1999
        out = log_cumsum_positive(logs)
        # S_n = (e^{n+1}-1)/(e-1)
        expect = logs + 1.0 + np.log1p(-np.exp(-(logs + 1.0))) - math.log(math.e - 1)
        assert np.max(np.abs(out - expect)) < 1e-10


class TestSignedSuffix:
    def test_random_complex(self):
        rng = np.random.default_rng(7)
        vals = (rng.normal(size=64) + 1j * rng.normal(size=64)) * np.exp(
            rng.uniform(-8, 8, 64)
        )
        lm, ph = signed_log_suffix_sums(np.log(np.abs(vals)), vals / np.abs(vals))
        got = np.exp(lm) * ph
        assert np.allclose(got, suffix_sums(vals), rtol=1e-12)

    def test_alternating_cancellation(self):
        k = np.arange(1, 4001)
        vals = (-1.0) ** k / k
        lm, ph = signed_log_suffix_sums(np.log(np.abs(vals)), np.sign(vals).astype(complex))
        got = np.exp(lm) * ph
        want = suffix_sums(vals)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_zero_terms_allowed(self):
        vals = np.array([1.0, 0.0, -2.0, 0.0, 3.0], dtype=complex)
        with np.errstate(divide="ignore"):
            lm = np.where(np.abs(vals) > 0, np.log(np.abs(vals)), -np.inf)
        ph = np.where(np.abs(vals) > 0, np.sign(vals.real), 1.0).astype(complex)
        got = np.exp(signed_log_suffix_sums(lm, ph)[0]) * signed_log_suffix_sums(lm, ph)[1]
        assert np.allclose(got, suffix_sums(vals))


class TestComplexLogCumsum:
    def test_matches_plain(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=100) + 1j * rng.normal(size=100)
        lm, ph = complex_log_cumsum(np.log(np.abs(vals)), vals / np.abs(vals))
        got = np.exp(lm) * ph
        assert np.allclose(got, np.cumsum(vals), rtol=1e-11)

    def test_huge_dynamic_range(self):
        # growing positive terms e^{2k}: running sums track the top term
        logs = 2.0 * np.arange(3000.0)
        lm, ph = complex_log_cumsum(logs, np.ones(3000, dtype=complex))
        expect = logs + np.log1p(-np.exp(-2.0 * (np.arange(3000.0) + 1))) - np.log1p(-math.exp(-2.0))
        assert np.max(np.abs(lm - expect)) < 1e-9
        assert np.allclose(ph, 1.0)


class TestAlternatingLimit:
    def test_alternating_harmonic(self):
        k = np.arange(1, 400)
        partial = np.cumsum((-1.0) ** (k + 1) / k)
        value, spread = alternating_limit(partial[-65:])
        assert value.real == pytest.approx(math.log(2.0), abs=1e-12)
        assert spread < 1e-12

    def test_averaging_abel_sums_divergent_series(self):
        # iterated averaging regularises even growing alternating terms, which
        # is why the convergence detector must gate on shrinking increments
        k = np.arange(1, 300)
        partial = np.cumsum((-1.0) ** k * k**0.3)
        _, spread = alternating_limit(partial[-65:])
        assert spread < 1e-6


class TestGeometricTail:
    def test_exact_geometric(self):
        # terms 2^-k, last kept 2^-20; tail = 2^-20
        tail, err = geometric_tail(2.0**-20, math.log(0.5))
        assert tail == pytest.approx(2.0**-20, rel=1e-12)
        assert err <= abs(tail)


class TestExtrapolation:
    def test_removes_geometric_contamination(self):
        rng = np.random.default_rng(11)
        truth = rng.normal(size=50)
        w = rng.normal(size=50)
        levels = [truth + (0.5**i) * 0.1 * w for i in range(5)]
        out = extrapolate_geometric_levels([lvl.astype(complex) for lvl in levels])
        assert np.max(np.abs(out - truth)) < 1e-12

    @given(theta=st.floats(min_value=0.05, max_value=0.8))
    @settings(max_examples=25)
    def test_any_contraction_ratio(self, theta):
        truth = np.linspace(0.0, 1.0, 20)
        w = np.sin(np.arange(20.0))
        levels = [(truth + theta**i * w).astype(complex) for i in range(4)]
        out = extrapolate_geometric_levels(levels)
        assert np.max(np.abs(out - truth)) < 1e-9
