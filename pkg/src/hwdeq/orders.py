"""Growth-order algebra for certified tail behaviour of closed-form families.

A GrowthOrder records the two-sided asymptotic size |t_n| ~ e^{a n} n^p (log n)^l
(up to positive constants) together with the sign pattern of t_n: eventually
one-signed with a fixed phase, or strictly alternating times such a magnitude.
The algebra is closed under products, reciprocals, |.|^2, tail sums of
convergent series, running sums of positive series, and suffix suprema, which
is exactly what the diagnostic series need.  Exponents come from family
parameters, so boundary cases (p = -1 etc.) are decided exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

SIGNED = "signed"  # eventually one sign (or one constant phase)
ALTERNATING = "alternating"  # (-1)^n times an eventually one-signed magnitude


@dataclass(frozen=True)
class GrowthOrder:
    exp_rate: float = 0.0
    power: float = 0.0
    log_power: int = 0
    pattern: str = SIGNED
    zero: bool = False  # identically zero sequence

    def __str__(self) -> str:
        if self.zero:
            return "0"
        bits = []
        if self.exp_rate:
            bits.append(f"e^({self.exp_rate:g}n)")
        if self.power:
            bits.append(f"n^{self.power:g}")
        if self.log_power:
            bits.append(f"log(n)^{self.log_power}")
        body = "*".join(bits) if bits else "1"
        return ("(-1)^n " if self.pattern == ALTERNATING else "") + body

    # --- algebra ----------------------------------------------------------

    def mul(self, other: "GrowthOrder") -> "GrowthOrder":
        if self.zero or other.zero:
            return ZERO_ORDER
        pattern = SIGNED if self.pattern == other.pattern else ALTERNATING
        return GrowthOrder(
            self.exp_rate + other.exp_rate,
            self.power + other.power,
            self.log_power + other.log_power,
            pattern,
        )

    def reciprocal(self) -> "GrowthOrder":
        if self.zero:
            raise ZeroDivisionError("reciprocal of the zero sequence")
        return GrowthOrder(-self.exp_rate, -self.power, -self.log_power, self.pattern)

    def abs_square(self) -> "GrowthOrder":
        if self.zero:
            return ZERO_ORDER
        return GrowthOrder(2 * self.exp_rate, 2 * self.power, 2 * self.log_power, SIGNED)

    def magnitude(self) -> "GrowthOrder":
        if self.zero:
            return ZERO_ORDER
        return GrowthOrder(self.exp_rate, self.power, self.log_power, SIGNED)

    # --- limits -----------------------------------------------------------

    def tends_to_zero(self) -> bool:
        """Whether |t_n| -> 0.  A (0,0,0) order means c1 <= |t_n| <= c2 for
        large n, which certifies *not* tending to zero, hence False there.
        """
        if self.zero:
            return True
        if self.exp_rate != 0.0:
            return self.exp_rate < 0.0
        if self.power != 0.0:
            return self.power < 0.0
        return self.log_power < 0

    # --- series -----------------------------------------------------------

    def series_converges(self) -> tuple[bool, bool]:
        """(converges, absolutely) for sum over n of t_n with this order."""
        if self.zero:
            return True, True
        a, p, l = self.exp_rate, self.power, self.log_power
        if a != 0.0:
            conv = a < 0.0
            return conv, conv
        abs_conv = p < -1.0 or (p == -1.0 and l < -1)
        if self.pattern == ALTERNATING:
            return (abs_conv or self.tends_to_zero(), abs_conv)
        return abs_conv, abs_conv

    def tail_sum(self) -> "GrowthOrder | None":
        """Order of R_n = sum_{k>=n} t_k when the series converges, else None.

        Alternating tails pair consecutive terms, which keeps the magnitude of
        the first neglected term (not its integral).
        """
        conv, _ = self.series_converges()
        if not conv:
            return None
        if self.zero:
            return ZERO_ORDER
        a, p, l = self.exp_rate, self.power, self.log_power
        if self.pattern == ALTERNATING:
            return GrowthOrder(a, p, l, ALTERNATING)
        if a < 0.0:
            return GrowthOrder(a, p, l, SIGNED)
        if p < -1.0:
            return GrowthOrder(0.0, p + 1.0, l, SIGNED)
        # p == -1, l < -1
        return GrowthOrder(0.0, 0.0, l + 1, SIGNED)

    def running_sum(self) -> "GrowthOrder | None":
        """Order of the partial sums sum_{k<=n} t_k for one-signed terms."""
        if self.zero:
            return ZERO_ORDER
        if self.pattern == ALTERNATING:
            return None
        conv, _ = self.series_converges()
        if conv:
            return GrowthOrder(0.0, 0.0, 0, SIGNED)  # tends to a nonzero constant
        a, p, l = self.exp_rate, self.power, self.log_power
        if a > 0.0:
            return GrowthOrder(a, p, l, SIGNED)
        if a < 0.0:
            return GrowthOrder(0.0, 0.0, 0, SIGNED)
        if p > -1.0:
            return GrowthOrder(0.0, p + 1.0, l, SIGNED)
        if p == -1.0 and l >= 0:
            return GrowthOrder(0.0, 0.0, l + 1, SIGNED)
        return None  # exotic log boundary; no certificate

    def suffix_sup(self) -> "GrowthOrder | None":
        """Order of sup_{m>=n} |t_m| when the magnitude is eventually monotone."""
        if self.zero:
            return ZERO_ORDER
        mag = self.magnitude()
        z = mag.tends_to_zero()
        if z:
            return mag
        # non-decaying magnitudes: the suffix sup is unbounded or a constant
        if mag.exp_rate == 0.0 and mag.power == 0.0 and mag.log_power == 0:
            return mag
        return None


ZERO_ORDER = GrowthOrder(zero=True)
CONST_ORDER = GrowthOrder()


def spec_order(spec) -> GrowthOrder | None:
    """GrowthOrder of a SequenceSpec, or None when no closed form is known."""
    f = spec.family
    if f == "constant":
        return ZERO_ORDER if spec.constant == 0.0 else CONST_ORDER
    if f == "power":
        return GrowthOrder(0.0, spec.exponent, 0, SIGNED)
    if f == "exp":
        return GrowthOrder(spec.rate, 0.0, 0, SIGNED)
    if f == "alt_power":
        return GrowthOrder(0.0, -spec.exponent, 0, ALTERNATING)
    if f == "shifted_power":
        return GrowthOrder(0.0, spec.exponent, 0, SIGNED)
    if f == "product":
        out = CONST_ORDER
        for fac in spec.factors:
            o = spec_order(fac)
            if o is None:
                return None
            out = out.mul(o)
        return out
    if f == "scaled":
        if spec.scale == 0:
            return ZERO_ORDER
        return spec_order(spec.factors[0])
    return None  # tabulated


@dataclass(frozen=True)
class Certificate:
    """Analytic reason attached to a series verdict."""

    verdict: str  # "converged" | "diverged"
    kind: str  # "zero" | "geometric" | "integral" | "alternating"
    absolute: bool
    detail: str

    @staticmethod
    def from_order(order: GrowthOrder | None) -> "Certificate | None":
        if order is None:
            return None
        if order.zero:
            return Certificate("converged", "zero", True, "all terms vanish")
        conv, absolute = order.series_converges()
        if order.exp_rate != 0.0:
            kind = "geometric"
        elif order.pattern == ALTERNATING and not absolute:
            kind = "alternating"
        else:
            kind = "integral"
        verdict = "converged" if conv else "diverged"
        return Certificate(verdict, kind, absolute, f"terms ~ {order}")
