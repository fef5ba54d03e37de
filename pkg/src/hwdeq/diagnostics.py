"""Diagnostic series and tail tables for one perturbed-equation instance.

Computes, on the tabulated window [start, N]:

  sigma-series  sum sigma_k u_k^2            (admissibility of the perturbation)
  J_m           sum_{k>=m} sigma_k u_k v_k   (tail table + convergence verdict)
  A_n           sup_{m>=n} |J_m|
  C_n           (v_n/u_n) sum_{k>=n} sigma_k u_k^2
  H_n           sum_{k>=n} C_{k+1}/(r_k u_k v_{k+1})   (equals J_n - C_n)
  G, L, P, B, I and the auxiliary sufficiency series.

All infinite sums are truncated at N with a consistent boundary estimate, so
the defining recurrences (and hence identities like H = J - C) hold exactly
for the tabulated data, while the boundary estimates push reported values to
the true limits.  Terms are assembled in the log domain and only then
exponentiated, which keeps exponential-scale systems finite.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .convergence import (
    CONVERGED,
    DIVERGED,
    INCONCLUSIVE,
    ConvergenceReport,
    SeriesResult,
    evaluate_series,
)
from .fss import FundamentalSystem, ProblemSpec, build_fss
from .lognum import LOG_ZERO, signed_log_suffix_sums, suffix_sums
from .orders import GrowthOrder, spec_order
from .sequences import LogScaledValue


@dataclass
class DiagnosticsBundle:
    problem: ProblemSpec
    fss: FundamentalSystem
    start: int
    horizon: int

    sigma_series: ConvergenceReport = None
    J_report: ConvergenceReport = None
    H_report: ConvergenceReport = None
    G_report: ConvergenceReport = None
    L_report: ConvergenceReport = None
    P_report: ConvergenceReport = None
    B_report: ConvergenceReport = None
    I_report: ConvergenceReport = None
    criteria_reports: dict = field(default_factory=dict)

    # tables; index m runs over [start, horizon+1] unless noted
    J: np.ndarray = None
    J_log: tuple = None
    A: np.ndarray = None
    C: np.ndarray = None
    C_log: tuple = None
    H: np.ndarray = None
    G_tail: np.ndarray = None  # [start, horizon]
    sup_C: np.ndarray = None
    eta: np.ndarray = None  # [start, horizon]
    w_uv_log: np.ndarray = None
    w_vv_log: np.ndarray = None

    c_defined: bool = False
    c_source: str = ""
    C_limit_zero: bool | None = None
    C_limit_evidence: str = ""
    orders: dict = field(default_factory=dict)
    j_tail_error: float = 0.0
    a_certified: bool = False
    notes: list = field(default_factory=list)

    def index(self, n: int) -> int:
        if not self.start <= n <= self.horizon + 1:
            raise IndexError(f"n={n} outside table range [{self.start}, {self.horizon + 1}]")
        return n - self.start

    def to_json(self) -> dict:
        def rep(r):
            return None if r is None else r.to_json()

        return {
            "window": [self.start, self.horizon],
            "sigma_series": rep(self.sigma_series),
            "J": rep(self.J_report),
            "H": rep(self.H_report),
            "G": rep(self.G_report),
            "L": rep(self.L_report),
            "P": rep(self.P_report),
            "B": rep(self.B_report),
            "I": rep(self.I_report),
            "criteria": {k: rep(v) for k, v in self.criteria_reports.items()},
            "c_defined": self.c_defined,
            "c_source": self.c_source,
            "C_limit_zero": self.C_limit_zero,
            "C_limit_evidence": self.C_limit_evidence,
            "orders": {k: (str(v) if v is not None else None) for k, v in self.orders.items()},
            "notes": self.notes,
        }


def _plain(log_mag: np.ndarray, phase: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(log_mag) * phase


def _report_precondition_failed(reason: str, horizon: int) -> ConvergenceReport:
    return ConvergenceReport(INCONCLUSIVE, horizon_used=horizon, evidence=reason)


def compute_diagnostics(
    problem: ProblemSpec, fss: FundamentalSystem | None = None
) -> DiagnosticsBundle:
    """Evaluate every diagnostic series for `problem` on its tabulated window."""
    fss = fss if fss is not None else build_fss(problem)
    s = fss.start_regular
    n_top = problem.horizon
    tol = problem.tolerances.tail_tol
    window = problem.tolerances.convergence_window
    gbound = problem.tolerances.growth_bound
    bundle = DiagnosticsBundle(problem=problem, fss=fss, start=s, horizon=n_top)

    ns = np.arange(s, n_top + 1)
    lu = fss.u.log_range(s, n_top + 1)  # u_n, n in [s, N+1]
    lv = fss.v.log_range(s, n_top + 1)
    lr = fss.r.log_range(s, n_top)
    lsig, psig = problem.sigma.eval_log_arrays(ns)
    npts = ns.size

    lx = lu - lv  # log(u_n / v_n)
    bundle.w_uv_log = -(lr + lu[:-1] + lv[1:])
    bundle.w_vv_log = -(lr + lv[:-1] + lv[1:])

    # growth orders of the ingredients (None disables certificates)
    o_sig = spec_order(problem.sigma)
    o_u, o_v, o_r = fss.u_order, fss.v_order, spec_order(problem.r)
    have = all(o is not None for o in (o_sig, o_u, o_v, o_r))
    o_sig2 = o_sig.mul(o_u).mul(o_u) if have else None
    o_J = o_sig.mul(o_u).mul(o_v) if have else None
    o_wuv = o_r.mul(o_u).mul(o_v).reciprocal() if have else None
    o_wvv = o_r.mul(o_v).mul(o_v).reciprocal() if have else None
    o_Jtail = o_J.tail_sum() if o_J is not None else None
    bundle.orders = {
        "sigma_u2": o_sig2,
        "J_terms": o_J,
        "J_tail": o_Jtail,
        "w_uv": o_wuv,
        "w_vv": o_wvv,
    }

    def run(terms, order) -> SeriesResult:
        return evaluate_series(
            terms, order, window=window, tol=tol, growth_bound=gbound, start_index=s
        )

    # --- sigma-series and J --------------------------------------------------
    t_sig2 = _plain(lsig + 2.0 * lu[:-1], psig)
    res_sig = run(t_sig2, o_sig2)
    bundle.sigma_series = res_sig.report

    t_J = _plain(lsig + lu[:-1] + lv[:-1], psig)
    res_J = run(t_J, o_J)
    bundle.J_report = res_J.report
    bundle.j_tail_error = res_J.tail_error if res_J.report.converged else 0.0
    bundle.a_certified = res_J.report.converged and res_J.report.certificate is not None

    # J_m table on [s, N+1]: suffix sums of the terms plus the boundary tail
    lt_J = lsig + lu[:-1] + lv[:-1]
    bundle.J_log = _suffix_with_boundary(lt_J, psig, res_J.tail_estimate)
    bundle.J = _plain(*bundle.J_log)

    # A_n = sup_{m>=n} |J_m| plus the certified tail allowance
    jmag_log = bundle.J_log[0]
    suffmax = np.maximum.accumulate(jmag_log[::-1])[::-1]
    with np.errstate(over="ignore"):
        bundle.A = np.exp(suffmax) + bundle.j_tail_error
    if not bundle.a_certified:
        bundle.notes.append("A table is a lower bound: no certified J tail")

    # --- C table --------------------------------------------------------------
    if res_sig.report.converged:
        bundle.c_source = "direct"
        lt_sig2 = lsig + 2.0 * lu[:-1]
        r_log, r_phase = _suffix_with_boundary(lt_sig2, psig, res_sig.tail_estimate)
        bundle.C_log = (r_log - lx, r_phase)
        bundle.C = _plain(*bundle.C_log)
    elif res_J.report.converged:
        # stable fallback via the J table (Abel-transformed definition)
        bundle.c_source = "via-J"
        bundle.C = _stable_c_table(bundle, lx)
        bundle.C_log = _to_log(bundle.C)
    else:
        bundle.c_source = "undefined"
    c_defined = bundle.c_source != "undefined"
    bundle.c_defined = c_defined

    if c_defined:
        o_C = _order_C(o_sig2, o_u, o_v)
        bundle.orders["C"] = o_C
        csup_log = np.maximum.accumulate(bundle.C_log[0][::-1])[::-1]
        with np.errstate(over="ignore"):
            bundle.sup_C = np.exp(csup_log)
        bundle.C_limit_zero, bundle.C_limit_evidence = _c_limit(bundle, o_C, tol, window)
    else:
        bundle.orders["C"] = None
        bundle.C = np.full(npts + 1, np.nan, dtype=complex)
        bundle.C_log = (np.full(npts + 1, LOG_ZERO), np.ones(npts + 1, dtype=complex))
        bundle.sup_C = np.full(npts + 1, np.nan)
        bundle.C_limit_zero = None
        bundle.C_limit_evidence = "C undefined: sigma-series not convergent"

    # --- eta, H ----------------------------------------------------------------
    o_C = bundle.orders.get("C")
    o_eta = o_C.mul(o_wuv) if (o_C is not None and o_wuv is not None) else None
    bundle.orders["eta"] = o_eta
    if c_defined:
        eta_log = bundle.C_log[0][1:] + bundle.w_uv_log
        eta_phase = bundle.C_log[1][1:]
        bundle.eta = _plain(eta_log, eta_phase)
        h_boundary = complex(bundle.J[-1] - bundle.C[-1])
        h_log, h_phase = _suffix_with_boundary(eta_log, eta_phase, h_boundary)
        bundle.H = _plain(h_log, h_phase)
        if bundle.J_report.converged:
            res_H = run(bundle.eta, o_eta)
            rep = res_H.report
            rep.value = complex(bundle.H[0])
            bundle.H_report = rep
        else:
            bundle.H_report = _report_precondition_failed(
                "H needs a convergent J (series of C weights unresolved)", n_top
            )
    else:
        bundle.eta = np.full(npts, np.nan, dtype=complex)
        bundle.H = np.full(npts + 1, np.nan, dtype=complex)
        bundle.H_report = _report_precondition_failed("C undefined", n_top)

    # --- G, L, P, B, I ----------------------------------------------------------
    w_uv = np.exp(bundle.w_uv_log)
    if c_defined:
        g_terms = np.exp(2.0 * bundle.C_log[0][1:] + bundle.w_uv_log)
        o_G = o_C.abs_square().mul(o_wuv) if (o_C is not None and o_wuv is not None) else None
        res_G = run(g_terms, o_G)
        bundle.G_report = res_G.report
        g_tail_boundary = res_G.tail_estimate.real if res_G.report.converged else 0.0
        bundle.G_tail = suffix_sums(g_terms) + g_tail_boundary
        bundle.orders["G_terms"] = o_G
    else:
        bundle.G_report = _report_precondition_failed("C undefined", n_top)
        bundle.G_tail = np.full(npts, np.nan)

    if bundle.J_report.converged and c_defined:
        l_terms = np.real(bundle.J[1:] * np.conj(bundle.C[1:])) * w_uv
        o_L = (
            o_Jtail.mul(o_C).mul(o_wuv)
            if all(o is not None for o in (o_Jtail, o_C, o_wuv))
            else None
        )
        bundle.L_report = run(l_terms, o_L).report
        bundle.orders["L_terms"] = o_L
    else:
        bundle.L_report = _report_precondition_failed(
            "L needs J convergent and C defined", n_top
        )

    if c_defined:
        p_terms = np.real(t_J * np.conj(bundle.C[:-1]))
        o_P = (
            o_sig.mul(o_C).mul(o_u).mul(o_v)
            if all(o is not None for o in (o_sig, o_C, o_u, o_v))
            else None
        )
        bundle.P_report = run(p_terms, o_P).report
        bundle.orders["P_terms"] = o_P
    else:
        bundle.P_report = _report_precondition_failed("C undefined", n_top)

    b_terms = np.exp(2.0 * (lsig + lu[:-1] + lv[:-1]))
    o_B = o_J.abs_square() if o_J is not None else None
    bundle.B_report = run(b_terms, o_B).report
    bundle.orders["B_terms"] = o_B

    if bundle.J_report.converged:
        i_terms = np.abs(bundle.J[1:]) ** 2 * w_uv
        o_I = o_Jtail.abs_square().mul(o_wuv) if (o_Jtail and o_wuv) else None
        bundle.I_report = run(i_terms, o_I).report
        bundle.orders["I_terms"] = o_I
    else:
        bundle.I_report = _report_precondition_failed("I needs J convergent", n_top)

    _sufficiency_reports(bundle, lsig, psig, lu, lv, w_uv, o_sig, o_u, o_v, o_wuv, run)
    return bundle


def _suffix_with_boundary(
    log_mag: np.ndarray, phase: np.ndarray, boundary: complex
) -> tuple[np.ndarray, np.ndarray]:
    """Suffix sums of log-domain terms with a final boundary (tail) entry.

    Output index i gives sum_{j>=i} term_j + boundary; the last entry is the
    boundary itself.
    """
    b = LogScaledValue.from_complex(complex(boundary))
    lm = np.concatenate([log_mag, [b.log_magnitude]])
    ph = np.concatenate([phase, [b.phase]])
    return signed_log_suffix_sums(lm, ph)


def _to_log(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mag = np.abs(values)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = np.log(mag)
        ph = np.where(mag > 0, values / np.where(mag > 0, mag, 1.0), 1.0 + 0.0j)
    lm = np.where(mag > 0, lm, LOG_ZERO)
    return lm, ph


def _stable_c_table(bundle: DiagnosticsBundle, lx: np.ndarray) -> np.ndarray:
    """C from the J table by Abel transformation of the defining sum:

    C_n = J_n - (1/x_n) [ sum_{k=n}^{N-1} J_{k+1} w_vv_k + J_{N+1} x_N - R^ ]

    with x = u/v and the sigma-tail boundary approximated as R^ = J_{N+1} x_{N+1}
    (whence C_{N+1} = J_{N+1})."""
    j = bundle.J  # [s, N+1]
    x = np.exp(lx)  # [s, N+1]
    w_vv = np.exp(bundle.w_vv_log)  # [s, N]
    size = j.size
    inner = np.zeros(size, dtype=complex)
    core = j[1 : size - 1] * w_vv[: size - 2]  # J_{k+1} w_vv[k] for k in [s, N-1]
    if core.size:
        inner[: size - 2] = suffix_sums(core)
    boundary = j[-1] * x[-2] - j[-1] * x[-1]  # J_{N+1} x_N - R^
    c = j - (inner + boundary) / x
    c[-1] = j[-1]
    return c


def _order_C(o_sig2, o_u, o_v) -> GrowthOrder | None:
    if o_sig2 is None or o_u is None or o_v is None:
        return None
    tail = o_sig2.tail_sum()
    if tail is None:
        return None
    return tail.mul(o_u.reciprocal()).mul(o_v)


def _c_limit(bundle, o_C, tol, window) -> tuple[bool | None, str]:
    if o_C is not None:
        z = o_C.tends_to_zero()
        return z, f"certified: C ~ {o_C}"
    cmag = np.abs(bundle.C[:-1])
    w = min(window, cmag.size // 2)
    tail_max = float(np.max(cmag[-w:]))
    head_max = float(np.max(cmag))
    if tail_max <= 1e-8 * max(1.0, head_max):
        return True, f"tail window max {tail_max:.2e} vanished numerically"
    half = cmag.size // 2
    if float(np.min(cmag[-w:])) > 0.5 * float(np.median(cmag[half:])) and tail_max > 0.1 * head_max:
        return False, f"tail window stays at {tail_max:.2e} (no decay)"
    return None, "no certificate and no decisive numerical trend"


def _sufficiency_reports(bundle, lsig, psig, lu, lv, w_uv, o_sig, o_u, o_v, o_wuv, run):
    """The four sufficiency criteria: three absolute series, P, the weighted-A
    series, and absolute convergence of J."""
    n_top = bundle.horizon
    o_Jtail = bundle.orders.get("J_tail")
    o_C = bundle.orders.get("C")
    o_A = o_Jtail.suffix_sup() if o_Jtail is not None else None

    reports = {}
    if bundle.c_defined and bundle.J_report.converged:
        jc = np.abs(bundle.J[1:]) * np.abs(bundle.C[1:]) * w_uv
        o_jc = (
            o_Jtail.magnitude().mul(o_C.magnitude()).mul(o_wuv)
            if all(o is not None for o in (o_Jtail, o_C, o_wuv))
            else None
        )
        reports["I.1"] = run(jc, o_jc).report

        ac = bundle.A[1:] * np.abs(bundle.C[1:]) * w_uv
        o_ac = (
            o_A.mul(o_C.magnitude()).mul(o_wuv)
            if all(o is not None for o in (o_A, o_C, o_wuv))
            else None
        )
        reports["I.2"] = run(ac, o_ac).report
    else:
        reports["I.1"] = _report_precondition_failed("needs J convergent and C", n_top)
        reports["I.2"] = _report_precondition_failed("needs J convergent and C", n_top)
    reports["I.3"] = bundle.I_report
    reports["II"] = bundle.P_report

    if bundle.J_report.converged:
        sig_a = np.exp(lsig + lu[:-1] + lv[:-1]) * bundle.A[:-1]
        o_sa = (
            o_sig.magnitude().mul(o_A).mul(o_u).mul(o_v)
            if all(o is not None for o in (o_sig, o_A, o_u, o_v))
            else None
        )
        reports["III"] = run(sig_a, o_sa).report
    else:
        reports["III"] = _report_precondition_failed("needs J convergent", n_top)

    abs_j = np.exp(lsig + lu[:-1] + lv[:-1])
    o_absj = bundle.orders["J_terms"].magnitude() if bundle.orders["J_terms"] else None
    reports["IV"] = run(abs_j, o_absj).report
    bundle.criteria_reports = reports


# --- spec-level operations on a bundle -----------------------------------------


def tail_J(bundle: DiagnosticsBundle, m: int) -> ConvergenceReport:
    """J_m with the global convergence verdict and tail error."""
    rep = bundle.J_report
    out = ConvergenceReport(
        rep.verdict,
        value=complex(bundle.J[bundle.index(m)]),
        error_estimate=bundle.j_tail_error,
        horizon_used=bundle.horizon,
        evidence=rep.evidence,
        certificate=rep.certificate,
    )
    return out


def sup_A(j_magnitudes: np.ndarray, n: int, tail_allowance: float = 0.0) -> float:
    """Suffix supremum of tabulated |J_m| from position n, plus tail allowance."""
    mags = np.asarray(j_magnitudes, dtype=float)
    return float(np.max(mags[n:])) + tail_allowance


def coeff_C(bundle: DiagnosticsBundle, n: int, path: str = "direct") -> ConvergenceReport:
    """C_n by the direct definition or the J-based (numerically stable) route."""
    if not bundle.c_defined:
        return _report_precondition_failed("C undefined", bundle.horizon)
    i = bundle.index(n)
    if path == "direct":
        value = complex(bundle.C[i])
        ev = "direct: (v/u) * suffix sum of sigma u^2"
    elif path == "stable":
        lx = bundle.fss.ratio_uv_log(bundle.start, bundle.horizon + 1)
        c_stable = _stable_c_table(bundle, lx)
        value = complex(c_stable[i])
        ev = "stable: J_n minus weighted J tail"
    else:
        raise ValueError(f"unknown path {path!r}")
    err = bundle.j_tail_error + bundle.problem.tolerances.tail_tol * max(1.0, abs(value))
    return ConvergenceReport(
        CONVERGED if bundle.sigma_series.converged or bundle.J_report.converged else INCONCLUSIVE,
        value=value,
        error_estimate=err,
        horizon_used=bundle.horizon,
        evidence=ev,
    )


def tail_H(bundle: DiagnosticsBundle, n: int) -> ConvergenceReport:
    """H_n, which must reproduce J_n - C_n."""
    rep = bundle.H_report
    if rep is None or not bundle.c_defined:
        return _report_precondition_failed("H undefined", bundle.horizon)
    return ConvergenceReport(
        rep.verdict,
        value=complex(bundle.H[bundle.index(n)]),
        error_estimate=rep.error_estimate,
        horizon_used=bundle.horizon,
        evidence=rep.evidence,
        certificate=rep.certificate,
    )


def summation_by_parts_check(x) -> tuple[float, float]:
    """Finite summation-by-parts identity on a window:

    sum_{n=1}^{N} (Dx_n) x_n = (x_{N+1}^2 - x_1^2)/2 - (1/2) sum (Dx_n)^2.

    Returns (lhs, rhs); they agree up to roundoff for any sequence.
    """
    arr = np.asarray(x, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least two points")
    dx = np.diff(arr)
    lhs = math.fsum(dx * arr[:-1])
    rhs = (arr[-1] ** 2 - arr[0] ** 2) / 2.0 - 0.5 * math.fsum(dx * dx)
    return lhs, rhs


# --- export ---------------------------------------------------------------------


def tables_to_csv(bundle: DiagnosticsBundle) -> str:
    """The (n, J, A, C, H) tables as CSV with the documented header."""
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["n", "J_re", "J_im", "A", "C_re", "C_im", "H_re", "H_im"])
    for n in range(bundle.start, bundle.horizon + 1):
        i = bundle.index(n)
        w.writerow(
            [
                n,
                repr(bundle.J[i].real),
                repr(bundle.J[i].imag),
                repr(float(bundle.A[i])),
                repr(bundle.C[i].real),
                repr(bundle.C[i].imag),
                repr(bundle.H[i].real),
                repr(bundle.H[i].imag),
            ]
        )
    return out.getvalue()
