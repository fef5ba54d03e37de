import math

import numpy as np
import pytest

from hwdeq.convergence import (
    CONVERGED,
    DIVERGED,
    INCONCLUSIVE,
    detect_convergence,
    evaluate_series,
    richardson_power_tail,
)
from hwdeq.orders import GrowthOrder, spec_order
from hwdeq.sequences import SequenceSpec


class TestDetect:
    def test_geometric_converges_to_one(self):
        k = np.arange(1, 200)
        rep = detect_convergence(np.cumsum(2.0**-k))
        assert rep.verdict == CONVERGED
        assert rep.value == pytest.approx(1.0, abs=1e-9)

    def test_harmonic_low_growth_bound(self):
        k = np.arange(1, 100_001)
        partial = np.cumsum(1.0 / k)
        rep = detect_convergence(partial, growth_bound=10.0, nonneg=True)
        assert rep.verdict == DIVERGED

    def test_harmonic_high_growth_bound(self):
        k = np.arange(1, 100_001)
        partial = np.cumsum(1.0 / k)
        rep = detect_convergence(partial, growth_bound=50.0, nonneg=True)
        assert rep.verdict in (DIVERGED, INCONCLUSIVE)

    def test_alternating_harmonic_settles_to_log2(self):
        k = np.arange(1, 5_001)
        partial = np.cumsum((-1.0) ** k / k)
        rep = detect_convergence(partial, window=64)
        assert rep.verdict == CONVERGED
        assert rep.value.real == pytest.approx(-math.log(2.0), abs=1e-9)

    def test_clearly_divergent_nonneg(self):
        k = np.arange(1, 5000)
        rep = detect_convergence(np.cumsum(k**-0.5), nonneg=True, growth_bound=None)
        assert rep.verdict == DIVERGED

    def test_slow_but_convergent_is_not_marked_divergent(self):
        k = np.arange(1, 5000)
        rep = detect_convergence(np.cumsum(k**-1.4), nonneg=True, growth_bound=None)
        assert rep.verdict in (CONVERGED, INCONCLUSIVE)

    def test_growing_alternating_terms_not_converged(self):
        k = np.arange(1, 2000)
        partial = np.cumsum((-1.0) ** k * k**0.3)
        rep = detect_convergence(partial, growth_bound=None)
        assert rep.verdict != CONVERGED

    def test_needs_two_sums(self):
        with pytest.raises(ValueError):
            detect_convergence(np.array([1.0]))


class TestRichardson:
    def test_zeta2_tail(self):
        n0, n1 = 10, 5000
        k = np.arange(n0, n1 + 1)
        partial = np.cumsum(1.0 / k**2)
        tail, err = richardson_power_tail(partial, q=-1.0, start_index=n0)
        true_tail = sum(1.0 / j**2 for j in range(n1 + 1, 400_000)) + 1.0 / 400_000
        assert tail.real == pytest.approx(true_tail, rel=1e-4)
        assert abs(tail.real - true_tail) <= 5 * err + 1e-12


class TestEvaluateSeries:
    def test_certified_geometric_value(self):
        spec = SequenceSpec.make_exponential(-1.0)
        k = np.arange(0, 80)
        res = evaluate_series(np.exp(-1.0 * k), spec_order(spec), start_index=0)
        assert res.report.verdict == CONVERGED
        assert res.report.certificate.kind == "geometric"
        assert res.report.value.real == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), rel=1e-9)

    def test_certified_divergent_despite_slow_growth(self):
        # terms ~ 1/n: heuristics cannot settle this, the certificate can
        k = np.arange(2, 3000)
        order = GrowthOrder(0.0, -1.0, 0)
        res = evaluate_series(1.0 / k, order, start_index=2)
        assert res.report.verdict == DIVERGED
        assert res.report.certificate.kind == "integral"

    def test_alternating_certificate_and_value(self):
        k = np.arange(1, 4000)
        order = GrowthOrder(0.0, -1.0, 0, pattern="alternating")
        res = evaluate_series((-1.0) ** k / k, order, start_index=1)
        assert res.report.verdict == CONVERGED
        assert not res.report.certificate.absolute
        assert res.report.value.real == pytest.approx(-math.log(2.0), abs=1e-10)

    def test_uncertified_falls_back_to_heuristic(self):
        k = np.arange(1, 200)
        res = evaluate_series(2.0**-k, None, start_index=1)
        assert res.report.verdict == CONVERGED
        assert res.report.certificate is None

    def test_zero_series(self):
        res = evaluate_series(np.zeros(100), GrowthOrder(zero=True))
        assert res.report.verdict == CONVERGED
        assert res.report.value == 0.0
        assert res.report.error_estimate <= 1e-9
