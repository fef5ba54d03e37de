"""Overflow-safe numeric kernels shared by the series and solution machinery.

Everything that can reach exponential scale (dominant solutions, weights like
1/(r_n u_n v_{n+1})) is carried as natural-log magnitudes plus unit phases and
only exponentiated once a quantity is known to be representable.
"""

from __future__ import annotations

import math

import numpy as np

LOG_ZERO = -math.inf

# exp() overflows just above this; used to fail loudly instead of returning inf
MAX_SAFE_EXP = 709.0


def safe_exp(log_mag: np.ndarray | float) -> np.ndarray | float:
    """exp() that underflows quietly to 0 but refuses to overflow to inf."""
    if np.any(np.asarray(log_mag) > MAX_SAFE_EXP):
        raise OverflowError("log-scaled value too large for plain evaluation")
    return np.exp(log_mag)


def log_cumsum_positive(log_terms: np.ndarray) -> np.ndarray:
    """Running log of partial sums of positive terms given by their logs.

    Returns L with L[i] = log(sum_{j<=i} exp(log_terms[j])).  When the terms
    fit the plain range the sum runs in extended precision (one rounding per
    entry); otherwise it falls back to a logaddexp chain.
    """
    lt = np.asarray(log_terms, dtype=float)
    finite = lt[np.isfinite(lt)]
    if finite.size == 0:
        return np.full_like(lt, LOG_ZERO)
    if np.max(finite) < 650.0 and np.min(finite) > -650.0:
        terms = np.exp(lt.astype(np.longdouble))
        sums = np.cumsum(terms)
        with np.errstate(divide="ignore"):
            return np.log(sums).astype(float)
    return np.logaddexp.accumulate(lt)


def fsum_complex(values) -> complex:
    """Exactly rounded sum of complex values (fsum on both components)."""
    arr = np.asarray(values, dtype=complex)
    return complex(math.fsum(arr.real), math.fsum(arr.imag))


def suffix_sums(terms: np.ndarray) -> np.ndarray:
    """S[i] = sum_{j>=i} terms[j], computed back to front."""
    return np.cumsum(np.asarray(terms)[::-1])[::-1]


def _log_diff_exp(log_a: np.ndarray, log_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log|e^a - e^b|, sign) elementwise, cancellation-safe."""
    hi = np.maximum(log_a, log_b)
    lo = np.minimum(log_a, log_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hi + np.log1p(-np.exp(np.minimum(lo - hi, 0.0)))
    out = np.where(np.isnan(out), LOG_ZERO, out)
    out = np.where((log_a == LOG_ZERO) & (log_b == LOG_ZERO), LOG_ZERO, out)
    sign = np.where(log_a >= log_b, 1.0, -1.0)
    sign = np.where(out == LOG_ZERO, 1.0, sign)
    return out, sign


def signed_log_suffix_sums(log_mag: np.ndarray, phase: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Suffix sums of complex terms given in log-magnitude/phase form.

    Returns (log|S_i|, unit phase of S_i) with S_i = sum_{j>=i} term_j, keeping
    everything in the log domain (positive and negative parts of the real and
    imaginary components are accumulated separately with logaddexp).
    """
    log_mag = np.asarray(log_mag, dtype=float)
    phase = np.asarray(phase, dtype=complex)

    def suffix_logsum(component_log: np.ndarray) -> np.ndarray:
        return np.logaddexp.accumulate(component_log[::-1])[::-1]

    parts_log = []
    parts_sign = []
    for comp in (phase.real, phase.imag):
        mag = np.abs(comp)
        with np.errstate(divide="ignore"):
            base = log_mag + np.log(np.where(mag > 0.0, mag, 1.0))
        base = np.where(mag > 0.0, base, LOG_ZERO)
        pos = np.where(comp > 0.0, base, LOG_ZERO)
        neg = np.where(comp < 0.0, base, LOG_ZERO)
        comp_log, comp_sign = _log_diff_exp(suffix_logsum(pos), suffix_logsum(neg))
        parts_log.append(comp_log)
        parts_sign.append(comp_sign)

    re_log, re_sign, im_log, im_sign = (
        parts_log[0], parts_sign[0], parts_log[1], parts_sign[1],
    )
    # |S| = hypot of the two components, assembled via the larger one
    hi = np.maximum(re_log, im_log)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mag_log = hi + 0.5 * np.log1p(np.exp(2.0 * (np.minimum(re_log, im_log) - hi)))
        mag_log = np.where(hi == LOG_ZERO, LOG_ZERO, mag_log)
        re_unit = re_sign * np.exp(re_log - mag_log)
        im_unit = im_sign * np.exp(im_log - mag_log)
    unit = np.where(mag_log == LOG_ZERO, 1.0 + 0.0j, re_unit + 1j * im_unit)
    return mag_log, unit


def complex_log_cumsum(log_mag: np.ndarray, phase: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running sums of complex terms given as (log magnitude, unit phase).

    Returns (log|S_n|, unit phase of S_n).  Each step folds the smaller of
    (running sum, next term) into the larger, so sequences spanning thousands
    of orders of magnitude stay representable.
    """
    lm = np.asarray(log_mag, dtype=float)
    ph = np.asarray(phase, dtype=complex)
    out_log = np.empty_like(lm)
    out_phase = np.empty_like(ph)
    ls, ps = LOG_ZERO, 1.0 + 0.0j
    for i in range(lm.size):
        lt, pt = lm[i], ph[i]
        if lt != LOG_ZERO:
            if ls == LOG_ZERO:
                ls, ps = lt, pt
            else:
                if lt > ls:
                    ls, ps, lt, pt = lt, pt, ls, ps
                z = 1.0 + math.exp(lt - ls) * (pt / ps)
                az = abs(z)
                if az == 0.0:
                    ls, ps = LOG_ZERO, 1.0 + 0.0j
                else:
                    ls += math.log(az)
                    ps *= z / az
        out_log[i] = ls
        out_phase[i] = ps
    return out_log, out_phase


def alternating_limit(partial_sums: np.ndarray) -> tuple[complex, float]:
    """Limit of an alternating-tail sequence of partial sums by iterated averaging.

    Repeated pairwise averaging of the partial sums kills one asymptotic order
    of the alternating remainder per pass (Euler-transform style); the spread of
    the final stages bounds the extrapolation error.

    Returns (limit_estimate, error_estimate).
    """
    s = np.asarray(partial_sums, dtype=complex).copy()
    if s.size == 0:
        raise ValueError("need at least one partial sum")
    prev = s[-1]
    spread = abs(s[-1] - s[0])
    while s.size > 1:
        s = 0.5 * (s[1:] + s[:-1])
        spread = abs(s[-1] - prev)
        prev = s[-1]
    return complex(prev), float(spread)


def richardson_tail(partial: np.ndarray, decay_exponent: float) -> tuple[float, float]:
    """Tail estimate sum_{k>N} t_k for one-signed t_k ~ c*k**p with p < -1.

    `partial` holds cumulative sums S_m indexed so that partial[-1] = S_N and
    partial[m] = S over the first m+1 terms.  Uses the two-point model
    S_inf - S_M = c * M**(p+1): the increment S(N) - S(N/2) fixes c.

    Returns (tail_estimate, error_estimate).
    """
    p = float(decay_exponent)
    if p >= -1.0:
        raise ValueError("tail model needs decay exponent < -1")
    n = partial.size
    if n < 8:
        return 0.0, abs(float(partial[-1])) if n else 0.0
    half = n // 2
    q = p + 1.0
    increment = float(partial[-1] - partial[half - 1])
    ratio = (half / n) ** q  # T(N/2)/T(N) under the power model
    if ratio <= 1.0:  # degenerate; give up on the model
        return 0.0, abs(increment)
    tail = increment / (ratio - 1.0)
    # model error is O(1/N) relative; widen by the quarter-point discrepancy
    quarter = n // 4
    if quarter >= 2:
        inc2 = float(partial[half - 1] - partial[quarter - 1])
        ratio2 = (quarter / half) ** q
        tail2 = inc2 / (ratio2 - 1.0) * (half / n) ** (-q)
        err = abs(tail - tail2) + abs(tail) / n
    else:
        err = abs(tail) / max(n, 1)
    return tail, err


def geometric_tail(last_term: complex, log_ratio: float) -> tuple[complex, float]:
    """Tail estimate sum_{k>N} t_k for |t_{k+1}/t_k| -> r = exp(log_ratio) < 1.

    Estimates the tail as a geometric series seeded by the last kept term.
    """
    if log_ratio >= 0.0:
        raise ValueError("geometric tail needs ratio < 1")
    r = math.exp(log_ratio)
    tail = last_term * r / (1.0 - r)
    return tail, abs(tail) * 0.5


def extrapolate_geometric_levels(levels: list[np.ndarray]) -> np.ndarray:
    """Eliminate a geometrically shrinking contamination shared by refinements.

    `levels[i]` are successively better approximations of the same vector whose
    errors shrink roughly geometrically: x_i = x* + kappa_i * w with
    kappa_{i+1} ~ theta * kappa_i.  The ratio theta is measured from the level
    differences themselves, so no model constant is assumed.  Each pass removes
    the leading error component; passes repeat while three levels remain.
    """
    work = [np.asarray(lvl, dtype=complex) for lvl in levels]
    if not work:
        raise ValueError("need at least one level")
    while len(work) >= 3:
        diffs = [work[i + 1] - work[i] for i in range(len(work) - 1)]
        nxt = []
        for i in range(len(diffs) - 1):
            d_hi, d_lo = diffs[i], diffs[i + 1]
            den = np.vdot(d_hi, d_hi)
            theta = complex(np.vdot(d_hi, d_lo) / den) if abs(den) > 0 else 0.0
            if abs(theta) >= 0.95:  # no contraction measurable; keep finer level
                nxt.append(work[i + 2])
            else:
                nxt.append(work[i + 2] + d_lo * (theta / (1.0 - theta)))
        work = nxt
    return work[-1]
