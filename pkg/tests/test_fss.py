import math

import numpy as np
import pytest

from hwdeq.fss import (
    OscillationError,
    ProblemSpec,
    Tolerances,
    build_fss,
    nonprincipal_from_principal,
    principal_from_nonprincipal,
    recessive_by_backward_recurrence,
    step_unperturbed,
    validate_fss,
)
from hwdeq.orders import spec_order
from hwdeq.sequences import PositivityError, SequenceSpec as S


def make(r, horizon=2000, n0=1, sigma=None, q=None):
    return ProblemSpec(
        r=r,
        q=q if q is not None else S.make_constant(0.0),
        sigma=sigma if sigma is not None else S.make_constant(0.0),
        n0=n0,
        horizon=horizon,
    )


ONE = S.make_constant(1.0)
ZERO = S.make_constant(0.0)


class TestStep:
    def test_constant_solution(self):
        assert step_unperturbed(ONE, ZERO, 1.0, 1.0, 5) == pytest.approx(1.0)

    def test_linear_solution(self):
        assert step_unperturbed(ONE, ZERO, 0.0, 1.0, 1) == pytest.approx(2.0)

    def test_with_potential_matches_hand_recurrence(self):
        # expanded form must reproduce y_{n+1} = (2 + q_n) y_n - y_{n-1} for r = 1
        got = step_unperturbed(ONE, ONE, 1.0, 1.0, 1)
        assert got == pytest.approx((2.0 + 1.0) * 1.0 - 1.0)
        rng = np.random.default_rng(5)
        for _ in range(20):
            yp, yc, qv = rng.normal(size=3)
            q = S.make_constant(qv)
            assert step_unperturbed(ONE, q, yp, yc, 3) == pytest.approx(
                (2.0 + qv) * yc - yp, rel=1e-13
            )


class TestConstructionFormulas:
    def test_sum_of_ones(self):
        # r = 1, u = 1: v_{n+1} = n - n0 + 1
        assert nonprincipal_from_principal(S.make_power(0.0), ONE, 1, 4) == pytest.approx(4.0)

    def test_exponential_sum(self):
        v3 = nonprincipal_from_principal(S.make_exponential(-1.0), ONE, 0, 2)
        assert v3 == pytest.approx(1.0 + math.e + math.e**2, rel=1e-14)

    def test_single_term(self):
        assert nonprincipal_from_principal(ONE, ONE, 1, 1) == pytest.approx(1.0)

    def test_rejects_nonpositive_recessive(self):
        bad = S.make_tabulated([1.0, -1.0, 1.0, 1.0], start=0)
        with pytest.raises(PositivityError):
            nonprincipal_from_principal(ONE, bad, 0, 2)

    def test_principal_power_tail(self):
        # u_10 = sum_{k>=10} k^-2; oracle: brute force to 1e7 plus integral remainder
        rep = principal_from_nonprincipal(
            S.make_power(2.0), ONE, 10, 5000,
            term_order=spec_order(S.make_power(2.0)).reciprocal(),
        )
        ks = np.arange(10, 10_000_000, dtype=float)
        oracle = float(np.sum(1.0 / ks**2)) + 1.0 / (10_000_000 - 0.5)
        assert rep.converged
        assert rep.value.real == pytest.approx(oracle, abs=max(rep.error_estimate, 1e-9))
        assert rep.value.real == pytest.approx(0.105166, abs=1e-6)

    def test_principal_geometric(self):
        rep = principal_from_nonprincipal(
            S.make_exponential(1.0), ONE, 0, 200,
            term_order=spec_order(S.make_exponential(1.0)).reciprocal(),
        )
        assert rep.converged
        assert rep.value.real == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), rel=1e-12)

    def test_inconclusive_without_certificate_on_slow_tail(self):
        rep = principal_from_nonprincipal(S.make_power(1.2), ONE, 2, 2000, term_order=None)
        assert not rep.converged


class TestBackwardOracle:
    def test_constant_recessive(self):
        vals = recessive_by_backward_recurrence(ONE, ZERO, 1, 60)
        assert np.allclose(vals.real, 1.0, atol=1e-9)

    def test_matches_tail_construction_for_strong_separation(self):
        # r = n^2: u_n = sum_{k>=n} k^-2 up to scale, dominant is constant
        n0, top = 1, 100
        vals = recessive_by_backward_recurrence(S.make_power(2.0), ZERO, n0, 200)
        zeta2 = math.pi**2 / 6.0
        exact = np.array(
            [zeta2 - sum(1.0 / j**2 for j in range(1, n)) for n in range(n0, top + 1)]
        )
        exact /= exact[0]
        got = vals[: top - n0 + 1].real
        assert np.max(np.abs(got - exact) / exact) < 1e-8

    def test_oscillation_detected(self):
        with pytest.raises(OscillationError):
            recessive_by_backward_recurrence(ONE, S.make_constant(-3.0), 1, 60)


class TestBuildAndValidate:
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 1.5, 2.0])
    def test_power_weights(self, alpha):
        fss = build_fss(make(S.make_power(alpha), horizon=3000))
        assert fss.wronskian_residual <= 1e-10
        rep = validate_fss(fss)
        assert rep.ok, rep.notes

    def test_exponential_weights(self):
        fss = build_fss(make(S.make_exponential(-1.0), horizon=700))
        assert fss.wronskian_residual <= 1e-12
        assert validate_fss(fss).ok

    def test_constant_equation_table(self):
        # r = 1, q = 0 from n0 = 1: u = 1 and v_n = n - 1
        fss = build_fss(make(S.make_power(0.0), horizon=100))
        assert fss.u.at(7) == pytest.approx(1.0)
        assert fss.v.at(7) == pytest.approx(6.0)
        assert fss.v.at(1) == 0.0

    def test_triple_inequalities(self):
        # u/v strictly decreasing, (u'/u)(v/v') < 1, r u v' > 1
        fss = build_fss(make(S.make_power(0.5), horizon=500))
        s = fss.start_regular
        lu = fss.u.log_range(s, 500)
        lv = fss.v.log_range(s, 500)
        lx = lu - lv
        assert np.all(np.diff(lx) < 0)
        assert np.all(np.exp(lx[1:] - lx[:-1]) < 1.0)
        assert np.all(-fss.log_weight_uv(s, 499) > 0.0)  # log(r u v') > 0

    def test_tail_identity(self):
        # sum_{k=K}^{N} 1/(r v v') + u_{N+1}/v_{N+1} = u_K/v_K to 1e-9 relative
        fss = build_fss(make(S.make_power(0.75), horizon=2000))
        s = fss.start_regular
        w = np.exp(fss.log_weight_vv(s, 2000))
        lx = fss.ratio_uv_log(s, 2001)
        for k in (s, s + 5, 100, 1000):
            i = k - s
            lhs = math.fsum(w[i:]) + math.exp(lx[-1])
            rhs = math.exp(lx[i])
            assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_mixed_remainder_lower_bound(self):
        # partial remainders of sum 1/(r u v') stay above 1 - x_{M+1}/x_n - 1e-9
        for prob in (make(S.make_power(0.5), horizon=2000),
                     make(S.make_exponential(-1.0), horizon=700)):
            fss = build_fss(prob)
            s = fss.start_regular
            w = np.exp(fss.log_weight_uv(s, prob.horizon))
            lx = fss.ratio_uv_log(s, prob.horizon + 1)
            suff = np.cumsum(w[::-1])[::-1]
            for n in (s, s + 10, s + 100):
                i = n - s
                lower = 1.0 - math.exp(lx[-1] - lx[i])
                assert suff[i] >= lower - 1e-9

    def test_swapped_roles_fail_validation(self):
        fss = build_fss(make(S.make_power(0.5), horizon=500))
        fss.u, fss.v = fss.v, fss.u
        rep = validate_fss(fss)
        assert not rep.monotone_uv
        assert not rep.ok

    def test_oracle_equivalence_on_window(self):
        # backward oracle vs tail-sum principal: equal up to scale at 1e-8
        prob = make(S.make_power(2.0), horizon=2000)
        fss = build_fss(prob)
        vals = recessive_by_backward_recurrence(prob.r, prob.q, 1, 200)
        upto = 100
        got = vals[: upto].real
        table = fss.u.plain_range(1, upto)
        table = table / table[0]
        assert np.max(np.abs(got / got[0] - table) / table) < 1e-8

    def test_general_potential_miller_path(self):
        # q = 1, r = 1: non-oscillating with geometric separation
        prob = make(ONE, horizon=120, q=ONE)
        fss = build_fss(prob)
        assert fss.wronskian_residual <= 1e-10
        rep = validate_fss(fss)
        assert rep.ok, rep.notes
        # growth ratio of v approaches the dominant root of z^2 - 3z + 1
        lam = (3.0 + math.sqrt(5.0)) / 2.0
        ratio = fss.v.at(100) / fss.v.at(99)
        assert ratio == pytest.approx(lam, rel=1e-6)


class TestProblemSpecValidation:
    def test_rejects_nonpositive_r(self):
        with pytest.raises(PositivityError):
            make(S.make_tabulated([1.0, 0.0, 1.0] + [1.0] * 200, start=1), horizon=100)

    def test_rejects_short_window(self):
        with pytest.raises(ValueError):
            ProblemSpec(r=ONE, q=ZERO, sigma=ZERO, n0=1, horizon=30,
                        tolerances=Tolerances(convergence_window=64))

    def test_rejects_bad_domain_start(self):
        with pytest.raises(ValueError):
            ProblemSpec(r=S.make_power(1.0), q=ZERO, sigma=ZERO, n0=0, horizon=200)
