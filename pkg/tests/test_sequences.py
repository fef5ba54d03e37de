import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwdeq.sequences import (
    DomainError,
    LogScaledValue,
    PositivityError,
    SequenceSpec,
    check_real_positive,
    forward_difference,
    spec_from_json,
    spec_to_json,
)


class TestEval:
    def test_power_half(self):
        assert SequenceSpec.make_power(0.5).eval(4) == pytest.approx(2.0)

    def test_alt_power(self):
        assert SequenceSpec.make_alt_power(1.0).eval(3) == pytest.approx(-0.25)

    def test_exponential(self):
        assert SequenceSpec.make_exponential(-1.0).eval(2) == pytest.approx(
            0.1353352832366127
        )

    def test_constant(self):
        assert SequenceSpec.make_constant(7.0).eval(123) == 7.0

    def test_shifted_power(self):
        assert SequenceSpec.make_shifted_power(-2.0, 1.0).eval(3) == pytest.approx(1 / 16)

    def test_tabulated_and_domain(self):
        t = SequenceSpec.make_tabulated([1.0, 2.0, 3.0], start=5)
        assert t.eval(6) == 2.0
        with pytest.raises(DomainError):
            t.eval(4)
        with pytest.raises(DomainError):
            t.eval(8)

    def test_power_domain_starts_at_one(self):
        with pytest.raises(DomainError):
            SequenceSpec.make_power(-1.0).eval(0)

    def test_real_positive_imag_is_zero(self):
        v = SequenceSpec.make_power(0.25).eval(7)
        assert v.imag == 0.0 and v.real > 0.0

    def test_scaled_complex(self):
        s = SequenceSpec.make_scaled(SequenceSpec.make_power(1.0), 1j)
        assert s.eval(3) == pytest.approx(3j)
        assert s.value_kind == "complex"


class TestEvalLog:
    def test_exponential_large(self):
        lv = SequenceSpec.make_exponential(1.0).eval_log(800)
        assert lv.log_magnitude == pytest.approx(800.0)
        assert lv.phase == pytest.approx(1.0)

    def test_zero_encoding(self):
        lv = SequenceSpec.make_constant(0.0).eval_log(5)
        assert lv.log_magnitude == -math.inf
        assert lv.phase == pytest.approx(1.0)
        assert lv.to_complex() == 0.0

    def test_product_cancellation(self):
        p = SequenceSpec.make_product(
            [SequenceSpec.make_exponential(1.0), SequenceSpec.make_exponential(-1.0)]
        )
        lv = p.eval_log(50)
        assert lv.log_magnitude == pytest.approx(0.0, abs=1e-12)
        assert lv.phase == pytest.approx(1.0)

    def test_multiplication_extreme_exponents(self):
        a = LogScaledValue(1e6, 1.0)
        b = LogScaledValue(-1e6 + 3.0, -1.0)
        c = a * b
        assert c.log_magnitude == pytest.approx(3.0)
        assert c.phase == pytest.approx(-1.0)

    @pytest.mark.parametrize(
        "spec",
        [
            SequenceSpec.make_power(-1.5),
            SequenceSpec.make_alt_power(0.7),
            SequenceSpec.make_exponential(-0.01),
            SequenceSpec.make_shifted_power(2.0, 3.0),
            SequenceSpec.make_product(
                [SequenceSpec.make_power(2.0), SequenceSpec.make_exponential(-0.5)]
            ),
            SequenceSpec.make_scaled(SequenceSpec.make_power(1.0), -2.5 + 1.0j),
        ],
    )
    def test_eval_log_matches_eval(self, spec):
        for n in range(max(1, spec.domain_start), 60, 7):
            plain = spec.eval(n)
            lv = spec.eval_log(n)
            assert lv.to_complex() == pytest.approx(plain, rel=1e-12)

    def test_eval_log_arrays_match_scalar(self):
        spec = SequenceSpec.make_product(
            [SequenceSpec.make_alt_power(1.2), SequenceSpec.make_exponential(0.3)]
        )
        ns = np.arange(1, 40)
        logs, phases = spec.eval_log_arrays(ns)
        for i, n in enumerate(ns):
            lv = spec.eval_log(int(n))
            assert logs[i] == pytest.approx(lv.log_magnitude, rel=1e-13)
            assert phases[i] == pytest.approx(lv.phase)


@given(
    mag=st.floats(min_value=-280.0, max_value=280.0),
    sign=st.sampled_from([1.0, -1.0]),
)
@settings(max_examples=200)
def test_log_roundtrip_property(mag, sign):
    x = sign * math.exp(mag)
    lv = LogScaledValue.from_complex(complex(x))
    back = lv.to_complex()
    assert abs(back - x) <= 1e-12 * abs(x)


class TestForwardDifference:
    def test_constant(self):
        assert forward_difference(SequenceSpec.make_constant(7.0), 11) == 0.0

    def test_linear(self):
        assert forward_difference(SequenceSpec.make_power(1.0), 3) == pytest.approx(1.0)

    def test_square(self):
        assert forward_difference(SequenceSpec.make_power(2.0), 3) == pytest.approx(7.0)

    @given(
        st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=12),
        st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=12),
    )
    def test_linearity_on_tabulated_integers(self, xs, ys):
        m = min(len(xs), len(ys))
        a = SequenceSpec.make_tabulated(xs[:m])
        b = SequenceSpec.make_tabulated(ys[:m])
        s = SequenceSpec.make_tabulated([x + y for x, y in zip(xs[:m], ys[:m])])
        for n in range(m - 1):
            assert forward_difference(s, n) == forward_difference(a, n) + forward_difference(b, n)


class TestPositivity:
    def test_rejects_zero_sample(self):
        r = SequenceSpec.make_tabulated([1.0, 0.0, 2.0], start=0)
        with pytest.raises(PositivityError):
            check_real_positive(r, 0)

    def test_rejects_negative_constant(self):
        with pytest.raises(PositivityError):
            check_real_positive(SequenceSpec.make_constant(-1.0), 0)

    def test_accepts_power(self):
        check_real_positive(SequenceSpec.make_power(-2.0), 1)


class TestJson:
    @pytest.mark.parametrize(
        "spec",
        [
            SequenceSpec.make_power(0.5),
            SequenceSpec.make_alt_power(1.5),
            SequenceSpec.make_exponential(-1.0),
            SequenceSpec.make_constant(0.0),
            SequenceSpec.make_tabulated([1.0, 2.5, -3.0], start=1),
            SequenceSpec.make_shifted_power(-2.0, 1.0),
            SequenceSpec.make_product(
                [SequenceSpec.make_power(1.0), SequenceSpec.make_exponential(0.25)]
            ),
            SequenceSpec.make_scaled(SequenceSpec.make_alt_power(2.0), 0.5 - 0.25j),
        ],
    )
    def test_roundtrip(self, spec):
        data = json.loads(json.dumps(spec_to_json(spec)))
        back = spec_from_json(data)
        for n in range(max(1, back.domain_start), 10):
            if spec.domain_end is not None and n > spec.domain_end:
                break
            assert back.eval(n) == pytest.approx(spec.eval(n))

    def test_keys_match_documented_shape(self):
        assert spec_to_json(SequenceSpec.make_power(0.5)) == {"family": "power", "alpha": 0.5}
        assert spec_to_json(SequenceSpec.make_alt_power(1.5)) == {
            "family": "alt_power",
            "beta": 1.5,
        }
        assert spec_to_json(SequenceSpec.make_exponential(-1.0)) == {
            "family": "exp",
            "rate": -1.0,
        }
        assert spec_to_json(SequenceSpec.make_constant(0.0)) == {"family": "constant", "c": 0.0}

    def test_bad_family_rejected(self):
        with pytest.raises(ValueError):
            spec_from_json({"family": "polynomial"})
        with pytest.raises(ValueError):
            spec_from_json({"no": "family"})
