"""Convergence verdicts for numerically summed series.

Verdicts are evidence-based: a settling-window heuristic on the partial sums,
upgraded to a certified verdict whenever the term sequence has a known growth
order (geometric ratio, integral test, alternating pairing).  Certified
convergent tails also contribute a remainder estimate so reported values
approximate the true limit, not the truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lognum import alternating_limit, geometric_tail
from .orders import Certificate, GrowthOrder

CONVERGED = "converged"
DIVERGED = "diverged"
INCONCLUSIVE = "inconclusive"


@dataclass
class ConvergenceReport:
    verdict: str
    value: complex = 0.0
    error_estimate: float = 0.0
    horizon_used: int = 0
    evidence: str = ""
    certificate: Certificate | None = None

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    @property
    def diverged(self) -> bool:
        return self.verdict == DIVERGED

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict,
            "error_estimate": self.error_estimate,
            "horizon_used": self.horizon_used,
            "evidence": self.evidence,
        }
        if self.converged:
            out["value"] = {"re": self.value.real, "im": self.value.imag}
        if self.certificate is not None:
            out["certificate"] = {
                "kind": self.certificate.kind,
                "absolute": self.certificate.absolute,
                "detail": self.certificate.detail,
            }
        return out


def _window_band(tail: np.ndarray) -> float:
    ref = tail[-1]
    return float(np.max(np.abs(tail - ref)))


def _alternating_increments(diffs: np.ndarray) -> bool:
    """True when successive increments flip direction nearly every step."""
    if diffs.size < 4:
        return False
    mags = np.abs(diffs)
    if np.any(mags == 0.0):
        return False
    dots = np.real(diffs[1:] * np.conj(diffs[:-1]))
    return float(np.mean(dots < 0.0)) >= 0.9


def detect_convergence(
    partial_sums,
    window: int = 64,
    tol: float = 1e-9,
    nonneg: bool = False,
    growth_bound: float | None = None,
) -> ConvergenceReport:
    """Heuristic verdict from a run of partial sums.

    Converged: the last `window` sums sit in a band of width tol (scaled by
    magnitude), or they oscillate alternately and iterated averaging settles.
    Diverged: |sums| pass the growth bound, or (for nonnegative terms) they
    keep climbing by more than tol per step across the window.
    """
    s = np.asarray(partial_sums, dtype=complex)
    if s.size < 2:
        raise ValueError("need at least two partial sums")
    n = s.size
    w = min(window, n - 1)
    scale = max(1.0, float(np.max(np.abs(s))))
    horizon = n

    if growth_bound is not None and np.max(np.abs(s)) > growth_bound:
        return ConvergenceReport(
            DIVERGED,
            horizon_used=horizon,
            evidence=f"|partial sums| exceeded growth bound {growth_bound:g}",
        )

    tail = s[-(w + 1):]
    band = _window_band(tail)
    if band <= tol * scale:
        return ConvergenceReport(
            CONVERGED,
            value=complex(s[-1]),
            error_estimate=band + tol * scale,
            horizon_used=horizon,
            evidence=f"partial-sum window of {w} settled within {band:.2e}",
        )

    diffs = np.diff(tail)
    if _alternating_increments(diffs) and np.abs(diffs[-1]) <= np.abs(diffs[0]):
        # iterated averaging would Abel-sum even a divergent alternating
        # series, so demand Leibniz-style evidence (shrinking increments) too
        value, spread = alternating_limit(tail)
        if spread <= 16.0 * tol * scale:
            return ConvergenceReport(
                CONVERGED,
                value=value,
                error_estimate=spread + tol * scale,
                horizon_used=horizon,
                evidence="alternating partial sums; iterated averaging settled",
            )

    if nonneg:
        inc = np.real(diffs)
        half_growth = float(np.real(s[-1] - s[(n - 1) // 2]))
        if np.all(inc > tol * scale) and half_growth > 0.1 * abs(s[-1]):
            return ConvergenceReport(
                DIVERGED,
                horizon_used=horizon,
                evidence=(
                    "nonnegative terms kept growing by more than tol per step "
                    f"({half_growth:.2e} over the last doubling)"
                ),
            )

    return ConvergenceReport(
        INCONCLUSIVE,
        horizon_used=horizon,
        evidence=f"window band {band:.2e} above tol; no divergence evidence",
    )


def richardson_power_tail(
    partial: np.ndarray, q: float, log_power: int = 0, start_index: int = 0
) -> tuple[complex, float]:
    """Tail S_inf - S(K) for partial sums with S_inf - S(K) ~ c K^q log^l K.

    K is the true index of the last summed term (positions are offset by
    start_index).  Requires q < 0.  Uses increments between dyadic checkpoints
    of the run of partial sums; a third checkpoint cross-validates the model.
    """
    if q >= 0.0:
        raise ValueError("needs q < 0")
    n = partial.size
    if n < 16:
        return 0.0, abs(complex(partial[-1]))

    def model_ratio(pos_small: int, pos_big: int) -> float:
        k_small = start_index + pos_small - 1
        k_big = start_index + pos_big - 1
        r = (k_small / k_big) ** q
        if log_power and k_small > 1 and k_big > 1:
            r *= (math.log(k_small) / math.log(k_big)) ** log_power
        return r

    def estimate(pos_small: int) -> complex | None:
        ratio = model_ratio(pos_small, n)
        if ratio <= 1.0 + 1e-12:
            return None
        inc = complex(partial[-1] - partial[pos_small - 1])
        return inc / (ratio - 1.0)

    half, quarter = n // 2, n // 4
    e_half = estimate(half)
    if e_half is None:
        return 0.0, abs(complex(partial[-1] - partial[half - 1]))
    e_quarter = estimate(quarter) if quarter >= 4 else None
    if e_quarter is None:
        return e_half, abs(e_half) / n
    # both estimates carry a ~k/N relative model error (k the checkpoint
    # ratio); one Richardson step in that parameter removes it
    refined = 2.0 * e_half - e_quarter
    err = 0.5 * abs(e_half - e_quarter) + abs(refined) / n**2
    return refined, err


@dataclass
class SeriesResult:
    """A summed series: report, running partial sums, and tail estimate."""

    report: ConvergenceReport
    partial_sums: np.ndarray
    tail_estimate: complex = 0.0
    tail_error: float = 0.0
    terms: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))


def evaluate_series(
    terms,
    order: GrowthOrder | None,
    window: int = 64,
    tol: float = 1e-9,
    growth_bound: float | None = 1e6,
    start_index: int = 0,
) -> SeriesResult:
    """Sum `terms` (term k of the series, k from start_index) with a verdict.

    When `order` certifies the behaviour, the verdict is certified and -- for
    convergent series -- the value carries a remainder estimate past the last
    term.  Otherwise the settling-window heuristic decides.
    """
    t = np.asarray(terms, dtype=complex)
    partial = np.cumsum(t)
    horizon = start_index + t.size - 1
    cert = Certificate.from_order(order)
    nonneg = bool(
        order is not None
        and not order.zero
        and order.pattern == "signed"
        and np.all(np.real(t) >= 0.0)
        and np.all(np.imag(t) == 0.0)
    )
    heuristic = detect_convergence(
        partial, window=window, tol=tol, nonneg=nonneg, growth_bound=growth_bound
    )

    if cert is None:
        heuristic.horizon_used = horizon
        return SeriesResult(heuristic, partial, terms=t)

    if cert.verdict == DIVERGED:
        report = ConvergenceReport(
            DIVERGED,
            horizon_used=horizon,
            evidence=f"certified:{cert.kind} ({cert.detail}); heuristic:{heuristic.verdict}",
            certificate=cert,
        )
        return SeriesResult(report, partial, terms=t)

    tail, tail_err = _certified_tail(t, partial, order, cert, window, start_index)
    value = complex(partial[-1]) + tail
    report = ConvergenceReport(
        CONVERGED,
        value=value,
        error_estimate=tail_err + tol * max(1.0, abs(value)),
        horizon_used=horizon,
        evidence=f"certified:{cert.kind} ({cert.detail}); heuristic:{heuristic.verdict}",
        certificate=cert,
    )
    return SeriesResult(report, partial, tail_estimate=tail, tail_error=tail_err, terms=t)


def _certified_tail(
    t: np.ndarray,
    partial: np.ndarray,
    order: GrowthOrder,
    cert: Certificate,
    window: int,
    start_index: int,
) -> tuple[complex, float]:
    """Remainder estimate past the final kept term for a certified-convergent series."""
    if cert.kind == "zero" or t.size == 0:
        return 0.0, 0.0
    last = complex(t[-1])
    if last == 0.0 and abs(complex(partial[-1])) == 0.0:
        return 0.0, 0.0
    n_last = start_index + t.size - 1
    if order.pattern == "alternating" and order.exp_rate == 0.0:
        # oscillating partial sums: iterated averaging, not the monotone model
        w = min(window, partial.size - 1)
        value, spread = alternating_limit(partial[-(w + 1):])
        return value - complex(partial[-1]), spread + abs(last) * 1e-12
    if cert.kind == "geometric":
        log_ratio = order.exp_rate + order.power / max(n_last, 1)
        if log_ratio >= -1e-12:
            return 0.0, abs(last)
        return geometric_tail(last, log_ratio)
    # integral-type tail: S_inf - S(K) ~ c K^(p+1) log^l K
    q = order.power + 1.0
    if order.exp_rate != 0.0 or q >= 0.0:
        return 0.0, abs(last)
    return richardson_power_tail(partial, q, order.log_power, start_index)
