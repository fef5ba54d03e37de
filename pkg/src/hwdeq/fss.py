"""Fundamental system (recessive/dominant pair) of the unperturbed equation.

The unperturbed recurrence is D(r_{n-1} D y_{n-1}) = q_n y_n with D the forward
difference.  A non-oscillating equation has a recessive solution u (unique up
to scale) and dominant solutions v, normalised here by the Casoratian relation
r_n (v_{n+1} u_n - u_{n+1} v_n) = 1.  Everything is tabulated as natural logs
so exponential-scale systems stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convergence import ConvergenceReport, SeriesResult, evaluate_series
from .lognum import LOG_ZERO, log_cumsum_positive, safe_exp
from .orders import GrowthOrder, spec_order
from .sequences import PositivityError, SequenceSpec, check_real_positive


class OscillationError(RuntimeError):
    """Computed trial solution changed sign: the non-oscillation hypothesis fails."""


class ValidationError(RuntimeError):
    """A constructed fundamental system violates its defining relations."""


@dataclass(frozen=True)
class Tolerances:
    wronskian_tol: float = 1e-10
    tail_tol: float = 1e-9
    convergence_window: int = 64
    growth_bound: float = 1e6
    solver_tol: float = 1e-11
    order_margin: float = 0.05

    def __post_init__(self):
        if self.convergence_window < 8:
            raise ValueError("convergence_window must be at least 8")

    def to_json(self) -> dict:
        return {
            "wronskian_tol": self.wronskian_tol,
            "tail_tol": self.tail_tol,
            "convergence_window": self.convergence_window,
            "growth_bound": self.growth_bound,
            "solver_tol": self.solver_tol,
        }


@dataclass(frozen=True)
class ProblemSpec:
    """One perturbed-equation instance: weights r, potential q, perturbation sigma."""

    r: SequenceSpec
    q: SequenceSpec
    sigma: SequenceSpec
    n0: int = 1
    horizon: int = 5000
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        window = self.tolerances.convergence_window
        if self.horizon - self.n0 < window:
            raise ValueError(
                f"horizon {self.horizon} leaves fewer than {window} points past n0={self.n0}"
            )
        needed = max(self.r.domain_start, self.sigma.domain_start, self.q.domain_start)
        if needed > self.n0:
            raise ValueError(
                f"n0={self.n0} below the domain start {needed} of r, q or sigma"
            )
        check_real_positive(self.r, self.n0)

    def to_json(self) -> dict:
        from .sequences import spec_to_json

        return {
            "r": spec_to_json(self.r),
            "q": spec_to_json(self.q),
            "sigma": spec_to_json(self.sigma),
            "n0": self.n0,
            "horizon": self.horizon,
            "tolerances": self.tolerances.to_json(),
        }


class LogSeq:
    """A nonnegative sequence tabulated as natural logs on [start, stop]."""

    def __init__(self, start: int, logs: np.ndarray):
        self.start = int(start)
        self.logs = np.asarray(logs, dtype=float)

    @property
    def stop(self) -> int:
        return self.start + self.logs.size - 1

    def log_at(self, n: int) -> float:
        if not self.start <= n <= self.stop:
            raise IndexError(f"index {n} outside [{self.start}, {self.stop}]")
        return float(self.logs[n - self.start])

    def at(self, n: int) -> float:
        return float(safe_exp(self.log_at(n)))

    def log_range(self, lo: int, hi: int) -> np.ndarray:
        """Logs for n in [lo, hi] inclusive."""
        if not (self.start <= lo and hi <= self.stop and lo <= hi):
            raise IndexError(f"range [{lo}, {hi}] outside [{self.start}, {self.stop}]")
        return self.logs[lo - self.start : hi - self.start + 1]

    def plain_range(self, lo: int, hi: int) -> np.ndarray:
        return safe_exp(self.log_range(lo, hi))


@dataclass
class FundamentalSystem:
    """Recessive u and dominant v on [n0, horizon+1], Casoratian-normalised."""

    u: LogSeq
    v: LogSeq
    r: LogSeq
    n0: int
    horizon: int
    wronskian_residual: float
    u_order: GrowthOrder | None = None
    v_order: GrowthOrder | None = None

    @property
    def start_regular(self) -> int:
        """First index where both u and v are strictly positive."""
        n = self.n0
        while self.u.log_at(n) == LOG_ZERO or self.v.log_at(n) == LOG_ZERO:
            n += 1
        return n

    def ratio_uv_log(self, lo: int, hi: int) -> np.ndarray:
        """log(u_n / v_n) for n in [lo, hi]."""
        return self.u.log_range(lo, hi) - self.v.log_range(lo, hi)

    def log_weight_uv(self, lo: int, hi: int) -> np.ndarray:
        """log of 1/(r_n u_n v_{n+1}) for n in [lo, hi]."""
        return -(
            self.r.log_range(lo, hi)
            + self.u.log_range(lo, hi)
            + self.v.log_range(lo + 1, hi + 1)
        )

    def log_weight_vv(self, lo: int, hi: int) -> np.ndarray:
        """log of 1/(r_n v_n v_{n+1})."""
        return -(
            self.r.log_range(lo, hi)
            + self.v.log_range(lo, hi)
            + self.v.log_range(lo + 1, hi + 1)
        )

    def log_weight_uu(self, lo: int, hi: int) -> np.ndarray:
        """log of 1/(r_n u_n u_{n+1})."""
        return -(
            self.r.log_range(lo, hi)
            + self.u.log_range(lo, hi)
            + self.u.log_range(lo + 1, hi + 1)
        )


# --- single-step recurrences ------------------------------------------------


def step_unperturbed(r, q, y_prev: complex, y_curr: complex, n: int) -> complex:
    """One forward step: y_{n+1} from (y_{n-1}, y_n).

    Expanded recurrence: y_{n+1} = y_n + [r_{n-1} (y_n - y_{n-1}) + q_n y_n] / r_n.
    """
    rn = _eval_at(r, n)
    rp = _eval_at(r, n - 1)
    qn = _eval_at(q, n)
    return y_curr + (rp * (y_curr - y_prev) + qn * y_curr) / rn


def _eval_at(seq, n: int) -> complex:
    if isinstance(seq, SequenceSpec):
        return seq.eval(n)
    return seq(n)


# --- construction formulas ----------------------------------------------------


def nonprincipal_from_principal(r, u, n0: int, n: int) -> float:
    """v_{n+1} = u_{n+1} * sum_{k=n0}^{n} 1/(r_k u_k u_{k+1}).

    The free multiple of u in the dominant solution is fixed to zero, so the
    sum starts exactly at n0 and v_{n0} = 0.
    """
    terms = []
    for k in range(n0, n + 1):
        uk = _eval_at(u, k).real
        uk1 = _eval_at(u, k + 1).real
        if uk <= 0 or uk1 <= 0:
            raise PositivityError(f"recessive solution not positive at k={k}")
        terms.append(1.0 / (_eval_at(r, k).real * uk * uk1))
    return _eval_at(u, n + 1).real * math.fsum(terms)


def principal_from_nonprincipal(
    r,
    v,
    n: int,
    horizon: int,
    tail_tol: float = 1e-9,
    term_order: GrowthOrder | None = None,
    window: int = 64,
) -> ConvergenceReport:
    """u_n = v_n * sum_{k=n}^inf 1/(r_k v_k v_{k+1}), summed to `horizon`.

    Returns a report whose value is u_n itself; inconclusive when the tail has
    not settled and no certificate is available.
    """
    ks = np.arange(n, horizon + 1)
    vk = np.array([_eval_at(v, int(k)).real for k in ks])
    vk1 = np.array([_eval_at(v, int(k) + 1).real for k in ks])
    rk = np.array([_eval_at(r, int(k)).real for k in ks])
    if np.any(vk <= 0) or np.any(vk1 <= 0):
        raise PositivityError("dominant solution not positive on the window")
    terms = 1.0 / (rk * vk * vk1)
    res = evaluate_series(
        terms, term_order, window=window, tol=tail_tol, start_index=n
    )
    report = res.report
    vn = vk[0]
    report.value = complex(report.value) * vn
    report.error_estimate *= vn
    return report


# --- backward-recurrence (minimal-solution) machinery ------------------------


def backward_solution_log(
    r_spec: SequenceSpec, combined_q: SequenceSpec | None, n0: int, n_big: int,
    extra_terms=None,
) -> np.ndarray:
    """Run the three-term recurrence downward from trial data (0, 1) at n_big.

    Works with the ratio form y_{n-1} = y_n - (r_n/r_{n-1})(y_{n+1} - y_n)
    + (q_n/r_{n-1}) y_n so exponential-scale weights never overflow; the state
    is rescaled on the fly.  Returns complex logs log|y_n| + i arg(y_n) on
    [n0, n_big], defined up to one common additive constant.

    `combined_q` multiplies y_n; `extra_terms(ns) -> (log_mag, phase)` may
    supply an additional coefficient sequence (the perturbation) in log form,
    so the ratio q_n / r_{n-1} is assembled without overflow.
    """
    ns = np.arange(n0 - 1, n_big + 1)
    lr, _ = r_spec.eval_log_arrays(ns)
    ratio_r = np.exp(lr[1:] - lr[:-1])  # r_n / r_{n-1} for n = n0 .. n_big
    coef_q = np.zeros(ns.size - 1, dtype=complex)
    if combined_q is not None and not combined_q.is_zero():
        lq, pq = combined_q.eval_log_arrays(ns[1:])
        coef_q = np.exp(lq - lr[:-1]) * pq  # q_n / r_{n-1}
    if extra_terms is not None:
        ls, ps = extra_terms(ns[1:])
        coef_q = coef_q + np.exp(ls - lr[:-1]) * ps

    out = np.empty(n_big - n0 + 1, dtype=complex)
    y_up = 0.0 + 0.0j  # y_{n+1}
    y = 1.0 + 0.0j  # y_n
    log_offset = 0.0
    out[-1] = 0.0  # log of the unit trial value
    for n in range(n_big, n0, -1):
        i = n - n0  # position of n in ratio_r / coef_q
        y_dn = y - ratio_r[i] * (y_up - y) + coef_q[i] * y
        y_up, y = y, y_dn
        mag = abs(y)
        if mag == 0.0:
            raise OscillationError("backward trial solution hit an exact zero")
        if mag > 1e200 or mag < 1e-200:
            y_up /= mag
            y /= mag
            log_offset += math.log(mag)
        out[n - 1 - n0] = math.log(abs(y)) + log_offset + 1j * _arg(y)
    return out


def _arg(z: complex) -> float:
    return math.atan2(z.imag, z.real)


def recessive_by_backward_recurrence(
    r: SequenceSpec,
    q: SequenceSpec | None,
    n0: int,
    n_big: int,
    levels: int = 5,
    extra_terms=None,
    complex_ok: bool = False,
) -> np.ndarray:
    """Minimal-solution oracle: backward runs at growing horizons, extrapolated.

    Trial data (0, 1) at horizon M yields the recessive direction plus an
    O(u_M/v_M) multiple of the dominant one; running at 2M, 4M, 8M, ... and
    removing the geometrically shrinking contamination (ratio measured from
    the level differences themselves) isolates the recessive solution.  The
    sensitivity to the trial horizon is exactly the level-to-level difference.

    Returns complex values on [n0, n_big] normalised to 1 at n0.  Raises
    OscillationError when a trial sequence changes sign on a real problem
    (the non-oscillation hypothesis fails).
    """
    keep = n_big - n0 + 1
    lvl_logs = []
    for i in range(levels):
        m = 2 * n_big * (2**i)
        logs = backward_solution_log(r, q, n0, m, extra_terms=extra_terms)[:keep]
        if not complex_ok:
            phases = np.mod(np.abs(logs.imag), 2 * math.pi)
            flips = np.abs(phases - phases[0]) > 0.5
            if np.any(flips):
                raise OscillationError(
                    "backward trial solution changes sign: equation oscillates"
                )
        lvl_logs.append(logs - logs[0])  # normalise to y_{n0} = 1
    from .lognum import extrapolate_geometric_levels

    span = max(float(np.max(np.abs(lv.real.max() - lv.real.min()))) for lv in lvl_logs)
    if span <= 600.0:
        # plain values are representable: extrapolate them (affine in the
        # contamination coefficient, so the removal is exact to second order)
        vals = extrapolate_geometric_levels([np.exp(lv) for lv in lvl_logs])
    else:
        vals = np.exp(extrapolate_geometric_levels(lvl_logs))
    if not complex_ok:
        vals = vals.real.astype(complex)
        if np.any(vals.real <= 0.0):
            raise OscillationError("extrapolated recessive solution not positive")
    return vals


# --- whole-system construction ------------------------------------------------


def build_fss(problem: ProblemSpec) -> FundamentalSystem:
    """Construct and normalise the fundamental system on [n0, horizon+1]."""
    n0, nmax = problem.n0, problem.horizon + 1
    ns = np.arange(n0, nmax + 1)
    r_logs_arr, r_phase = problem.r.eval_log_arrays(ns)
    if np.any(np.abs(r_phase - 1.0) > 1e-12):
        raise PositivityError("r must be real and positive")
    r_seq = LogSeq(n0, r_logs_arr)

    if problem.q.is_zero():
        u_logs, v_logs, u_ord, v_ord = _fss_zero_potential(problem, r_logs_arr)
    else:
        u_logs, v_logs = _fss_general(problem, r_logs_arr)
        u_ord = v_ord = None

    u_seq = LogSeq(n0, u_logs)
    v_seq = LogSeq(n0, v_logs)
    residual = _wronskian_residual(r_logs_arr, u_logs, v_logs)
    fss = FundamentalSystem(
        u=u_seq,
        v=v_seq,
        r=r_seq,
        n0=n0,
        horizon=problem.horizon,
        wronskian_residual=residual,
        u_order=u_ord,
        v_order=v_ord,
    )
    if residual > problem.tolerances.wronskian_tol:
        raise ValidationError(f"Casoratian residual {residual:.3e} above tolerance")
    return fss


def _fss_zero_potential(problem: ProblemSpec, r_logs: np.ndarray):
    """q = 0: constants solve the equation; which role they play depends on
    whether sum 1/r diverges (constant is recessive) or converges (dominant)."""
    inv_r_logs = -r_logs  # log of 1/r_k for k = n0 .. horizon+1
    r_order = spec_order(problem.r)
    inv_order = r_order.reciprocal() if r_order is not None else None

    diverges = _sum_inv_r_diverges(inv_r_logs, inv_order)
    npts = r_logs.size
    if diverges:
        u_logs = np.zeros(npts)
        # v_{n+1} = sum_{k=n0}^{n} 1/r_k; v_{n0} = 0
        v_logs = np.concatenate(([LOG_ZERO], log_cumsum_positive(inv_r_logs[:-1])))
        u_ord = GrowthOrder()
        v_ord = inv_order.running_sum() if inv_order is not None else None
        return u_logs, v_logs, u_ord, v_ord

    # convergent sum: the constant is dominant, u comes from the tail sums;
    # summing past the tabulated window sharpens the remainder estimate
    v_logs = np.zeros(npts)
    ext = np.arange(problem.n0, 4 * (problem.horizon + 1) + 1)
    inv_ext, _ = problem.r.eval_log_arrays(ext)
    inv_ext = -inv_ext
    suffix = np.logaddexp.accumulate(inv_ext[::-1])[::-1]
    tail_log = _log_tail_estimate(inv_ext, inv_order, problem)
    if tail_log != LOG_ZERO:
        suffix = np.logaddexp(suffix, tail_log)
    u_logs = suffix[:npts]
    u_ord = inv_order.tail_sum() if inv_order is not None else None
    return u_logs, v_logs, u_ord, GrowthOrder()


def _sum_inv_r_diverges(inv_r_logs: np.ndarray, inv_order: GrowthOrder | None) -> bool:
    if inv_order is not None:
        conv, _ = inv_order.series_converges()
        return not conv
    # numeric fallback: compare the two halves of the log partial sums
    cums = log_cumsum_positive(inv_r_logs)
    half = cums.size // 2
    return cums[-1] - cums[half] > math.log(1.0 + 1e-6)


def _log_tail_estimate(
    inv_r_logs: np.ndarray, inv_order: GrowthOrder | None, problem: ProblemSpec
) -> float:
    """log of the estimated tail sum_{k > horizon+1} 1/r_k (LOG_ZERO when unknown)."""
    if inv_order is None:
        return LOG_ZERO
    try:
        terms = safe_exp(inv_r_logs)
    except OverflowError:
        return LOG_ZERO
    res = evaluate_series(
        terms,
        inv_order,
        tol=problem.tolerances.tail_tol,
        start_index=problem.n0,
    )
    tail = res.tail_estimate.real if res.report.converged else 0.0
    return math.log(tail) if tail > 0.0 else LOG_ZERO


def _fss_general(problem: ProblemSpec, r_logs: np.ndarray):
    """Nonzero q: recessive direction from the extrapolated backward oracle."""
    n0, nmax = problem.n0, problem.horizon + 1
    u_vals = recessive_by_backward_recurrence(
        problem.r, problem.q, n0, 2 * nmax
    )[: nmax - n0 + 1]
    u_logs = np.log(u_vals.real)
    inv_ruu = -(r_logs[:-1] + u_logs[:-1] + u_logs[1:])
    # v_{n+1} = u_{n+1} * sum_{k=n0}^{n} 1/(r_k u_k u_{k+1}); v vanishes at n0
    v_logs = np.concatenate(([LOG_ZERO], u_logs[1:] + log_cumsum_positive(inv_ruu)))
    return u_logs, v_logs


def _wronskian_residual(r_logs, u_logs, v_logs) -> float:
    """max |r_n (v_{n+1} u_n - u_{n+1} v_n) - 1| via the multiplicative form

    W_n = r_n u_n v_{n+1} (1 - e^{delta_n}),  delta_n = log((u_{n+1} v_n)/(u_n v_{n+1})),

    which avoids the catastrophic cancellation of the two huge products when
    the solutions are strongly separated (delta_n < 0 on a valid pair)."""
    delta = (v_logs[:-1] + u_logs[1:]) - (v_logs[1:] + u_logs[:-1])
    if np.any(delta >= 0.0):
        # not a valid separated pair; fall back to the direct difference
        a1 = r_logs[:-1] + v_logs[1:] + u_logs[:-1]
        a2 = r_logs[:-1] + u_logs[1:] + v_logs[:-1]
        with np.errstate(over="ignore"):
            w = np.exp(a1) - np.exp(a2)
        return float(np.max(np.abs(w - 1.0)))
    log_w = r_logs[:-1] + u_logs[:-1] + v_logs[1:] + np.log(-np.expm1(delta))
    return float(np.max(np.abs(np.expm1(log_w))))


# --- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    wronskian_residual: float
    monotone_uv: bool
    sum_ruu_divergent: bool
    sum_rvv_convergent: bool
    sum_ruv_divergent: bool
    window: tuple[int, int]
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.monotone_uv
            and self.sum_ruu_divergent
            and self.sum_rvv_convergent
            and self.sum_ruv_divergent
        )

    def to_json(self) -> dict:
        return {
            "wronskian_residual": self.wronskian_residual,
            "monotone_uv": self.monotone_uv,
            "sum_ruu_divergent": self.sum_ruu_divergent,
            "sum_rvv_convergent": self.sum_rvv_convergent,
            "sum_ruv_divergent": self.sum_ruv_divergent,
            "window": list(self.window),
            "notes": self.notes,
        }


def validate_fss(
    fss: FundamentalSystem, horizon: int | None = None, tail_tol: float = 1e-9
) -> ValidationReport:
    """Check the defining relations of the pair (u, v) on the tabulated window.

    Convergence/divergence evidence rests on the exact telescoping identities
    sum_{k=n}^{M} 1/(r_k v_k v_{k+1}) = u_n/v_n - u_{M+1}/v_{M+1} (bounded and
    increasing, hence convergent) and sum 1/(r_k u_k u_{k+1}) = v/u increments
    (unbounded exactly when v/u grows), plus the remainder lower bound
    R_n >= 1 - (u_{M+1} v_n)/(v_{M+1} u_n) for the mixed series.
    """
    n_end = min(horizon if horizon is not None else fss.horizon, fss.horizon)
    s = fss.start_regular
    notes: list[str] = []

    lu = fss.u.log_range(s, n_end + 1)
    lv = fss.v.log_range(s, n_end + 1)
    lx = lu - lv  # log(u/v)
    monotone = bool(np.all(np.diff(lx) < 0.0))

    # divergence evidence for sum 1/(r u u): its partial sums telescope to
    # (v/u)_{M+1} - (v/u)_s, so compare the half- and full-window sums
    half = s + (n_end - s) // 2
    if -lx[-1] > 700.0:  # v/u beyond plain range: growth is overwhelming
        growth = math.inf
    else:
        sums_ruu = np.exp(-lx) - math.exp(-lx[0])
        growth = float(sums_ruu[-1] - sums_ruu[half - s])
    ruu_divergent = growth > 10.0 * tail_tol
    if not ruu_divergent:
        notes.append(
            f"sum 1/(r u u) grew only {growth:.2e} between half and full window"
        )

    # bounded increasing partial sums certify convergence of sum 1/(r v v)
    w_vv = fss.log_weight_vv(s, n_end)
    partial = np.cumsum(np.exp(w_vv - lx[0]))  # scaled by (v/u)(s) for stability
    bound_ok = partial[-1] <= 1.0 + 1e-9
    x_end_ratio = math.exp(lx[-1] - lx[0])
    ident_gap = abs(partial[-1] + x_end_ratio - 1.0)
    rvv_convergent = bound_ok and ident_gap <= 1e-9 * max(1.0, partial[-1])
    if not rvv_convergent:
        notes.append(f"telescoping identity gap {ident_gap:.2e}")

    # remainder bound for the mixed series: R_s >= 1 - x(M+1)/x(s)
    w_uv = fss.log_weight_uv(s, n_end)
    r_mixed = float(np.sum(np.exp(w_uv)))
    lower = 1.0 - x_end_ratio
    ruv_divergent = r_mixed >= lower - 1e-9
    if not ruv_divergent:
        notes.append(f"mixed remainder {r_mixed:.3e} fell below bound {lower:.3e}")

    return ValidationReport(
        wronskian_residual=fss.wronskian_residual,
        monotone_uv=monotone,
        sum_ruu_divergent=ruu_divergent,
        sum_rvv_convergent=rvv_convergent,
        sum_ruv_divergent=ruv_divergent,
        window=(s, n_end),
        notes=notes,
    )
