"""Coefficient-sequence families with plain and log-scaled evaluation.

A SequenceSpec describes one of a small set of closed-form families (powers,
exponentials, alternating powers, tabulated data) and combinators (product,
complex scaling).  Every family evaluates both in the plain domain and as a
LogScaledValue so that exponential-scale data (e.g. weights e^{a n} with n in
the thousands) never overflows inside series machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lognum import LOG_ZERO, safe_exp


class DomainError(ValueError):
    """Index outside the domain of a sequence."""


class PositivityError(ValueError):
    """A sequence flagged real-positive produced a non-positive sample."""


@dataclass(frozen=True)
class LogScaledValue:
    """A number stored as log|x| plus a unit phase (sign for real data).

    log_magnitude = -inf encodes zero; the phase of zero is kept as +1 so that
    multiplication stays total.
    """

    log_magnitude: float
    phase: complex = 1.0 + 0.0j

    def to_complex(self) -> complex:
        if self.log_magnitude == LOG_ZERO:
            return 0.0 + 0.0j
        return complex(safe_exp(self.log_magnitude)) * self.phase

    def __mul__(self, other: "LogScaledValue") -> "LogScaledValue":
        if self.log_magnitude == LOG_ZERO or other.log_magnitude == LOG_ZERO:
            return LogScaledValue(LOG_ZERO, 1.0 + 0.0j)
        return LogScaledValue(
            self.log_magnitude + other.log_magnitude, self.phase * other.phase
        )

    @staticmethod
    def from_complex(z: complex) -> "LogScaledValue":
        mag = abs(z)
        if mag == 0.0:
            return LogScaledValue(LOG_ZERO, 1.0 + 0.0j)
        return LogScaledValue(math.log(mag), z / mag)


_FAMILIES = {
    "constant",
    "power",
    "exp",
    "alt_power",
    "shifted_power",
    "tabulated",
    "product",
    "scaled",
}


@dataclass(frozen=True)
class SequenceSpec:
    """One evaluable coefficient sequence; immutable and hashable by content."""

    family: str
    constant: float = 0.0
    exponent: float = 0.0
    rate: float = 0.0
    offset: float = 0.0
    scale: complex = 1.0 + 0.0j
    values: tuple = ()
    start: int = 0
    factors: tuple = ()
    value_kind: str = "real"  # real-positive | real | complex

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown sequence family: {self.family!r}")

    # --- constructors -----------------------------------------------------

    @staticmethod
    def make_constant(c: float, value_kind: str = "real") -> "SequenceSpec":
        return SequenceSpec(family="constant", constant=c, value_kind=value_kind)

    @staticmethod
    def make_power(alpha: float) -> "SequenceSpec":
        # n**alpha; positive for n >= 1
        return SequenceSpec(family="power", exponent=alpha, value_kind="real-positive")

    @staticmethod
    def make_exponential(rate: float) -> "SequenceSpec":
        # e**(rate*n)
        return SequenceSpec(family="exp", rate=rate, value_kind="real-positive")

    @staticmethod
    def make_alt_power(beta: float) -> "SequenceSpec":
        # (-1)**n * (n+1)**(-beta)
        return SequenceSpec(family="alt_power", exponent=beta, value_kind="real")

    @staticmethod
    def make_shifted_power(exponent: float, offset: float) -> "SequenceSpec":
        # (n+offset)**exponent
        return SequenceSpec(
            family="shifted_power",
            exponent=exponent,
            offset=offset,
            value_kind="real-positive",
        )

    @staticmethod
    def make_tabulated(values: Sequence[complex], start: int = 0) -> "SequenceSpec":
        vals = tuple(complex(v) for v in values)
        kind = "real" if all(abs(v.imag) == 0.0 for v in vals) else "complex"
        return SequenceSpec(family="tabulated", values=vals, start=start, value_kind=kind)

    @staticmethod
    def make_product(factors: Sequence["SequenceSpec"]) -> "SequenceSpec":
        fs = tuple(factors)
        kind = "real-positive"
        if any(f.value_kind == "complex" for f in fs):
            kind = "complex"
        elif any(f.value_kind == "real" for f in fs):
            kind = "real"
        return SequenceSpec(family="product", factors=fs, value_kind=kind)

    @staticmethod
    def make_scaled(inner: "SequenceSpec", factor: complex) -> "SequenceSpec":
        z = complex(factor)
        if z.imag == 0.0:
            kind = "real-positive" if (z.real > 0 and inner.value_kind == "real-positive") else "real"
        else:
            kind = "complex"
        return SequenceSpec(family="scaled", scale=z, factors=(inner,), value_kind=kind)

    # --- domain -----------------------------------------------------------

    @property
    def domain_start(self) -> int:
        if self.family in ("power",):
            return 1
        if self.family == "shifted_power":
            # smallest n >= 0 with n + offset > 0
            return max(0, int(math.floor(-self.offset)) + 1)
        if self.family == "tabulated":
            return self.start
        if self.family in ("product", "scaled"):
            return max(f.domain_start for f in self.factors)
        return 0

    @property
    def domain_end(self) -> int | None:
        """Last valid index, or None when unbounded."""
        if self.family == "tabulated":
            return self.start + len(self.values) - 1
        if self.family in ("product", "scaled"):
            ends = [f.domain_end for f in self.factors if f.domain_end is not None]
            return min(ends) if ends else None
        return None

    def _check_domain(self, n: int) -> None:
        if n < self.domain_start:
            raise DomainError(f"index {n} below domain start {self.domain_start}")
        end = self.domain_end
        if end is not None and n > end:
            raise DomainError(f"index {n} past domain end {end}")

    # --- evaluation ---------------------------------------------------------

    def eval(self, n: int) -> complex:
        """Plain value at index n; real-positive families return positive reals."""
        self._check_domain(n)
        f = self.family
        if f == "constant":
            return complex(self.constant)
        if f == "power":
            return complex(float(n) ** self.exponent)
        if f == "exp":
            return complex(math.exp(self.rate * n))
        if f == "alt_power":
            return complex((-1.0) ** (n & 1) * float(n + 1) ** (-self.exponent))
        if f == "shifted_power":
            return complex(float(n + self.offset) ** self.exponent)
        if f == "tabulated":
            return self.values[n - self.start]
        if f == "product":
            out = 1.0 + 0.0j
            for fac in self.factors:
                out *= fac.eval(n)
            return out
        if f == "scaled":
            return self.scale * self.factors[0].eval(n)
        raise AssertionError(f)

    def eval_log(self, n: int) -> LogScaledValue:
        """Log-scaled value at n; products sum member logs, never plain values."""
        self._check_domain(n)
        f = self.family
        if f == "constant":
            return LogScaledValue.from_complex(complex(self.constant))
        if f == "power":
            if n == 0:
                return LogScaledValue.from_complex(self.eval(n))
            return LogScaledValue(self.exponent * math.log(n), 1.0 + 0.0j)
        if f == "exp":
            return LogScaledValue(self.rate * n, 1.0 + 0.0j)
        if f == "alt_power":
            sign = -1.0 if (n & 1) else 1.0
            return LogScaledValue(-self.exponent * math.log(n + 1), complex(sign))
        if f == "shifted_power":
            return LogScaledValue(self.exponent * math.log(n + self.offset), 1.0 + 0.0j)
        if f == "tabulated":
            return LogScaledValue.from_complex(self.values[n - self.start])
        if f == "product":
            out = LogScaledValue(0.0)
            for fac in self.factors:
                out = out * fac.eval_log(n)
            return out
        if f == "scaled":
            return LogScaledValue.from_complex(self.scale) * self.factors[0].eval_log(n)
        raise AssertionError(f)

    def eval_array(self, ns: np.ndarray) -> np.ndarray:
        return np.array([self.eval(int(n)) for n in np.asarray(ns)], dtype=complex)

    def eval_log_arrays(self, ns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised log-scaled evaluation: (log magnitudes, unit phases)."""
        ns = np.asarray(ns, dtype=int)
        f = self.family
        ones = np.ones(ns.shape, dtype=complex)
        if f == "constant":
            lv = LogScaledValue.from_complex(complex(self.constant))
            return np.full(ns.shape, lv.log_magnitude), ones * lv.phase
        if f == "power":
            with np.errstate(divide="ignore"):
                logs = self.exponent * np.log(ns.astype(float))
            return logs, ones
        if f == "exp":
            return self.rate * ns.astype(float), ones
        if f == "alt_power":
            logs = -self.exponent * np.log(ns.astype(float) + 1.0)
            phases = np.where(ns % 2 == 0, 1.0 + 0.0j, -1.0 + 0.0j)
            return logs, phases
        if f == "shifted_power":
            logs = self.exponent * np.log(ns.astype(float) + self.offset)
            return logs, ones
        if f == "product":
            logs = np.zeros(ns.shape)
            phases = ones.copy()
            for fac in self.factors:
                lg, ph = fac.eval_log_arrays(ns)
                logs = logs + lg
                phases = phases * ph
            return logs, phases
        if f == "scaled":
            lg, ph = self.factors[0].eval_log_arrays(ns)
            sv = LogScaledValue.from_complex(self.scale)
            return lg + sv.log_magnitude, ph * sv.phase
        # tabulated and anything exotic: element-wise fallback
        pairs = [self.eval_log(int(n)) for n in ns]
        return (
            np.array([p.log_magnitude for p in pairs]),
            np.array([p.phase for p in pairs], dtype=complex),
        )

    def is_zero(self) -> bool:
        """True when the sequence is identically zero on its domain."""
        f = self.family
        if f == "constant":
            return self.constant == 0.0
        if f == "tabulated":
            return all(v == 0 for v in self.values)
        if f == "scaled":
            return self.scale == 0 or self.factors[0].is_zero()
        if f == "product":
            return any(fac.is_zero() for fac in self.factors)
        return False


def forward_difference(seq, n: int) -> complex:
    """First difference a_{n+1} - a_n; `seq` is a SequenceSpec or a callable."""
    if isinstance(seq, SequenceSpec):
        return seq.eval(n + 1) - seq.eval(n)
    return seq(n + 1) - seq(n)


def check_real_positive(spec: SequenceSpec, n0: int, count: int = 101) -> None:
    """Reject a real-positive flag if any sample on [n0, n0+count) fails it.

    Tabulated domains shorter than the sample window are checked to their end.
    """
    end = spec.domain_end
    start = max(n0, spec.domain_start)
    last = start + count - 1 if end is None else min(end, start + count - 1)
    for n in range(start, last + 1):
        v = spec.eval(n)
        if v.imag != 0.0 or v.real <= 0.0:
            raise PositivityError(
                f"sequence flagged real-positive is {v} at n={n}"
            )


# --- JSON codec -----------------------------------------------------------


def spec_to_json(spec: SequenceSpec) -> dict:
    f = spec.family
    if f == "constant":
        return {"family": "constant", "c": spec.constant}
    if f == "power":
        return {"family": "power", "alpha": spec.exponent}
    if f == "exp":
        return {"family": "exp", "rate": spec.rate}
    if f == "alt_power":
        return {"family": "alt_power", "beta": spec.exponent}
    if f == "shifted_power":
        return {"family": "shifted_power", "exponent": spec.exponent, "offset": spec.offset}
    if f == "tabulated":
        vals = []
        for v in spec.values:
            vals.append(v.real if v.imag == 0 else {"re": v.real, "im": v.imag})
        return {"family": "tabulated", "start": spec.start, "values": vals}
    if f == "product":
        return {"family": "product", "factors": [spec_to_json(x) for x in spec.factors]}
    if f == "scaled":
        return {
            "family": "scaled",
            "factor": {"re": spec.scale.real, "im": spec.scale.imag},
            "inner": spec_to_json(spec.factors[0]),
        }
    raise AssertionError(f)


def spec_from_json(data: dict) -> SequenceSpec:
    try:
        family = data["family"]
    except (TypeError, KeyError) as exc:
        raise ValueError("sequence spec JSON needs a 'family' key") from exc
    if family == "constant":
        return SequenceSpec.make_constant(float(data["c"]))
    if family == "power":
        return SequenceSpec.make_power(float(data["alpha"]))
    if family == "exp":
        return SequenceSpec.make_exponential(float(data["rate"]))
    if family == "alt_power":
        return SequenceSpec.make_alt_power(float(data["beta"]))
    if family == "shifted_power":
        return SequenceSpec.make_shifted_power(float(data["exponent"]), float(data["offset"]))
    if family == "tabulated":
        vals = [
            complex(v["re"], v.get("im", 0.0)) if isinstance(v, dict) else complex(v)
            for v in data["values"]
        ]
        return SequenceSpec.make_tabulated(vals, int(data.get("start", 0)))
    if family == "product":
        return SequenceSpec.make_product([spec_from_json(x) for x in data["factors"]])
    if family == "scaled":
        fz = data["factor"]
        factor = complex(fz["re"], fz.get("im", 0.0)) if isinstance(fz, dict) else complex(fz)
        return SequenceSpec.make_scaled(spec_from_json(data["inner"]), factor)
    raise ValueError(f"unknown sequence family in JSON: {family!r}")
