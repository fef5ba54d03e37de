import math

import numpy as np
import pytest

from hwdeq.diagnostics import (
    coeff_C,
    compute_diagnostics,
    summation_by_parts_check,
    sup_A,
    tables_to_csv,
    tail_H,
    tail_J,
)
from hwdeq.families import make_problem
from hwdeq.fss import ProblemSpec
from hwdeq.lognum import alternating_limit
from hwdeq.sequences import SequenceSpec as S


@pytest.fixture(scope="module")
def bundle_pow3():
    return compute_diagnostics(make_problem("power", alpha=0.0, beta=3.0))


@pytest.fixture(scope="module")
def bundle_alt12():
    return compute_diagnostics(make_problem("alt-power", alpha=0.0, beta=1.2))


@pytest.fixture(scope="module")
def bundle_exp2():
    return compute_diagnostics(make_problem("exp-weight", gamma=-2.0))


@pytest.fixture(scope="module")
def bundle_zero():
    prob = ProblemSpec(
        r=S.make_power(0.5), q=S.make_constant(0.0), sigma=S.make_constant(0.0),
        n0=1, horizon=300,
    )
    return compute_diagnostics(prob)


class TestZeroPerturbation:
    def test_all_reports_converged_to_zero(self, bundle_zero):
        b = bundle_zero
        for rep in (b.sigma_series, b.J_report, b.H_report, b.G_report,
                    b.L_report, b.P_report, b.B_report, b.I_report):
            assert rep.converged
            assert rep.value == 0.0
            assert rep.error_estimate <= 1e-9
        assert np.all(b.J == 0) and np.all(b.C == 0) and np.all(b.H == 0)
        assert b.C_limit_zero is True


class TestTables:
    def test_identity_h_equals_j_minus_c(self, bundle_pow3, bundle_alt12, bundle_exp2):
        for b in (bundle_pow3, bundle_alt12, bundle_exp2):
            scale = 1.0 + np.abs(b.J)
            err = np.abs(b.H - (b.J - b.C)) / scale
            assert np.max(err) < 1e-8

    def test_assertion_one_bound(self, bundle_pow3, bundle_alt12, bundle_exp2):
        for b in (bundle_pow3, bundle_alt12, bundle_exp2):
            assert b.J_report.converged
            assert np.all(np.abs(b.C) <= 2.0 * b.A + 1e-9)

    def test_suffix_sup_example(self):
        mags = np.array([3.0, 1.0, 2.0, 0.5])
        assert sup_A(mags, 0) == 3.0
        assert sup_A(mags, 2) == 2.0
        assert sup_A(mags, 2, tail_allowance=0.25) == 2.25

    def test_a_decays_for_convergent_alternating(self, bundle_alt12):
        b = bundle_alt12
        third = b.A.size // 3
        assert np.max(b.A[-third:]) < 0.25 * np.max(b.A[:third])

    def test_csv_header(self, bundle_pow3):
        text = tables_to_csv(bundle_pow3)
        assert text.splitlines()[0] == "n,J_re,J_im,A,C_re,C_im,H_re,H_im"
        assert len(text.splitlines()) == bundle_pow3.horizon - bundle_pow3.start + 2


def _brute_alt_tail(m, beta, weights, count=60_000):
    """sum_{k>=m} (-1)^k (k+1)^-beta weights_k by direct partial sums plus
    iterated averaging of the oscillating tail (independent of the library
    suffix-table路 path)."""
    ks = np.arange(m, m + count)
    t = np.where(ks % 2 == 0, 1.0, -1.0) * (ks + 1.0) ** (-beta) * weights(ks)
    partial = np.cumsum(t)
    value, spread = alternating_limit(partial[-81:])
    assert spread < 1e-11
    return value.real


class TestValuesAgainstOracles:
    def test_exp_family_c10(self, bundle_exp2):
        # C_10 = v_10 * sum_{k>=10} k^-2 e^-k; 200 explicit terms suffice since
        # the remainder is below e^-210
        v10 = math.fsum(math.exp(k) for k in range(1, 10))
        tail = math.fsum(k**-2.0 * math.exp(-k) for k in range(10, 210))
        want = v10 * tail
        got = bundle_exp2.C[bundle_exp2.index(10)]
        assert got.real == pytest.approx(want, rel=1e-10)
        assert got.imag == 0.0

    def test_exp_family_j10(self, bundle_exp2):
        # J_10 = sum_{k>=10} k^-2 e^-k v_k with v_k = sum_{j<k} e^j
        def vk(k):
            return (math.exp(k) - math.e) / (math.e - 1.0)

        want = math.fsum(k**-2.0 * math.exp(-k) * vk(k) for k in range(10, 260))
        got = bundle_exp2.J[bundle_exp2.index(10)]
        assert got.real == pytest.approx(want, rel=1e-10)

    def test_alt_family_tables(self, bundle_alt12):
        b = bundle_alt12
        for m in (2, 11, 100):
            want_j = _brute_alt_tail(m, 1.2, lambda k: k - 1.0)
            assert b.J[b.index(m)].real == pytest.approx(want_j, abs=5e-11)
            want_c = (m - 1.0) * _brute_alt_tail(m, 1.2, lambda k: np.ones_like(k, float))
            assert b.C[b.index(m)].real == pytest.approx(want_c, abs=5e-11)

    def test_alt_family_h20_identity_brute(self, bundle_alt12):
        # both sides of H_20 = J_20 - C_20 from independent brute sums
        b = bundle_alt12
        j20 = _brute_alt_tail(20, 1.2, lambda k: k - 1.0)
        c20 = 19.0 * _brute_alt_tail(20, 1.2, lambda k: np.ones_like(k, float))
        h20 = tail_H(b, 20).value.real
        assert h20 == pytest.approx(j20 - c20, abs=1e-8)

    def test_tail_j_report(self, bundle_pow3):
        rep = tail_J(bundle_pow3, 10)
        # J_10 = sum_{k>=10} k^-3 (k-1): split into zeta-type tails
        ks = np.arange(10, 2_000_000, dtype=float)
        want = float(np.sum(ks**-2.0) - np.sum(ks**-3.0)) + 1.0 / 2_000_000
        assert rep.converged
        assert rep.value.real == pytest.approx(want, rel=1e-6)


class TestCoeffCPaths:
    @pytest.mark.parametrize("fixture", ["bundle_pow3", "bundle_alt12", "bundle_exp2"])
    def test_direct_and_stable_agree(self, fixture, request):
        b = request.getfixturevalue(fixture)
        for n in (b.start, b.start + 3, b.start + 50):
            direct = coeff_C(b, n, path="direct")
            stable = coeff_C(b, n, path="stable")
            assert direct.value == pytest.approx(
                stable.value, rel=1e-7, abs=1e-7 * (1 + abs(direct.value))
            )

    def test_unknown_path_rejected(self, bundle_pow3):
        with pytest.raises(ValueError):
            coeff_C(bundle_pow3, 5, path="sideways")


class TestSummationByParts:
    def test_constant(self):
        lhs, rhs = summation_by_parts_check([1.0, 1.0, 1.0, 1.0])
        assert lhs == 0.0 and rhs == 0.0

    def test_simple_sequence(self):
        lhs, rhs = summation_by_parts_check([1.0, 2.0, 3.0])
        assert lhs == pytest.approx(3.0)
        assert rhs == pytest.approx(3.0)

    def test_oscillating_sequence(self):
        n = np.arange(1, 10_001, dtype=float)
        x = np.cos(math.pi * n) / np.sqrt(n)
        lhs, rhs = summation_by_parts_check(x)
        assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))
        # the squared-difference sum keeps growing: this is the divergent side
        dx2 = np.cumsum(np.diff(x) ** 2)
        assert dx2[-1] - dx2[dx2.size // 2] > 0.5

    def test_random_sequences(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            x = rng.normal(size=rng.integers(10, 10_000))
            lhs, rhs = summation_by_parts_check(x)
            assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))


class TestVerdictsOnFamilies:
    def test_power_j_verdicts(self):
        b = compute_diagnostics(make_problem("power", alpha=0.5, beta=1.0))
        assert b.J_report.diverged  # alpha+beta-1 = 0.5 <= 1
        b = compute_diagnostics(make_problem("power", alpha=0.0, beta=1.5))
        assert b.J_report.diverged
        assert b.sigma_series.converged

    def test_alt_conditional_convergence(self, bundle_alt12):
        rep = bundle_alt12.J_report
        assert rep.converged
        assert rep.certificate is not None and not rep.certificate.absolute

    def test_lemma_equivalences_on_selected_instances(self):
        instances = (
            [("exp-weight", {"gamma": g}) for g in (-2.0, -1.5, -1.2, -0.8, -0.6, -0.4, -0.25)]
            + [
                ("power", {"alpha": a, "beta": b})
                for a, b in ((0.0, 3.0), (0.0, 2.5), (0.5, 2.0), (1.0, 1.5), (1.0, 2.0),
                             (1.5, 1.0), (2.0, 0.75), (0.0, 1.8), (0.5, 1.2))
            ]
            + [
                ("alt-power", {"alpha": a, "beta": b})
                for a, b in ((0.0, 1.2), (0.5, 0.8), (0.25, 1.5), (0.0, 0.7),
                             (0.75, 0.5), (0.5, 1.5))
            ]
        )
        assert len(instances) >= 20
        checked = 0
        for family, params in instances:
            b = compute_diagnostics(make_problem(family, **params))
            if b.J_report.converged:
                checked += 1
                g, lr, p, bb, i = (
                    b.G_report, b.L_report, b.P_report, b.B_report, b.I_report
                )
                if not g.verdict == "inconclusive" and not lr.verdict == "inconclusive":
                    assert g.converged == lr.converged, (family, params)
                if all(r.verdict != "inconclusive" for r in (p, g, bb)):
                    assert p.converged == (g.converged and bb.converged), (family, params)
                if i.converged:
                    assert g.converged, (family, params)
        assert checked >= 12
