"""Constructive solution of the perturbed equation on a contraction window.

Once the diagnostics certify the restricted problem solvable, the perturbed
recessive solution is built as u~ = beta * u where beta solves the fixed-point
equation beta = P + T beta:

  eta_n   = C_{n+1} / (r_n u_n v_{n+1})            (small once C decays)
  P_n     = prod_{k>=n} (1 + eta_k)                (infinite product tail)
  g_n     = -(u_{n+1} v_n)/(u_n v_{n+1}) C_{n+1} theta_{n+1}
  (A th)_n = (v_n/u_n) sum_{k>n} C_{k+1} th_k / (r_k v_k v_{k+1})
  f_n     = (1/(r_n v_n u_{n+1})) sum_{s>=1} (-1)^s (A^s g)_n
  (T th)_n = -sum_{k>=n} (P_n/P_k) f_k

T contracts (norm <= measured tau * G_{n0} <= 1/2 on a properly chosen window),
so Picard iteration from P converges; the dominant partner v~ then comes from
the running-sum formula and the Casoratian normalisation is automatic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticsBundle
from .fss import FundamentalSystem, ProblemSpec, recessive_by_backward_recurrence
from .lognum import signed_log_suffix_sums, suffix_sums
from .sequences import SequenceSpec


class ConstructionError(RuntimeError):
    """Constructive scheme not applicable or failed."""


class HorizonTooSmall(ConstructionError):
    """No tabulated index satisfies the contraction-window thresholds."""


class NoContraction(ConstructionError):
    pass


class MaxIterExceeded(ConstructionError):
    pass


class BetaTooSmall(ConstructionError):
    pass


class DegenerateProduct(ConstructionError):
    pass


@dataclass(frozen=True)
class ConstructionWindow:
    n0: int
    horizon: int
    sup_c: float
    a_start: float
    g_tail: float
    tau: float

    def to_json(self) -> dict:
        return {
            "n0": self.n0,
            "horizon": self.horizon,
            "sup_C": self.sup_c,
            "A_start": self.a_start,
            "G_tail": self.g_tail,
            "tau": self.tau,
        }


@dataclass
class BetaSolution:
    window: ConstructionWindow
    ns: np.ndarray  # [n0, horizon]
    beta: np.ndarray
    product: np.ndarray  # P_n on [n0, horizon]
    mu: np.ndarray  # r_n v_n u_{n+1} * (beta_{n+1}-beta_n), recovered operator-side
    iterations: int = 0
    contraction_rates: list = field(default_factory=list)
    residual_beta_eq: float = 0.0
    residual_mu: float = 0.0
    fixed_point_gap: float = 0.0

    def to_json(self) -> dict:
        return {
            "window": self.window.to_json(),
            "iterations": self.iterations,
            "contraction_rates": [float(r) for r in self.contraction_rates],
            "residual_beta_eq": self.residual_beta_eq,
            "residual_mu": self.residual_mu,
            "fixed_point_gap": self.fixed_point_gap,
        }


@dataclass
class PerturbedFSS:
    ns: np.ndarray  # [n0, horizon]
    ratio_u: np.ndarray  # u~_n / u_n  (= beta)
    ratio_v: np.ndarray  # v~_n / v_n, NaN at n0 where v~ vanishes
    u_tilde_log: np.ndarray  # complex logs of u~
    v_tilde_log: np.ndarray
    narrow_partial: np.ndarray  # partial sums of r u v_{+1} |D(u~/u)|^2
    wronskian_residual: float = 0.0


class ConstructorContext:
    """Precomputed window arrays shared by every operator application."""

    def __init__(self, bundle: DiagnosticsBundle, n0: int):
        fss, s = bundle.fss, bundle.start
        if not bundle.c_defined:
            raise ConstructionError("C is undefined; nothing to construct from")
        self.bundle = bundle
        self.n0 = n0
        self.horizon = bundle.horizon
        o = n0 - s
        npts = self.horizon - n0 + 1  # window indices [n0, N]
        self.ns = np.arange(n0, self.horizon + 1)
        self.lam = fss.ratio_uv_log(n0, self.horizon + 1)  # log x_n, n in [n0, N+1]
        self.rho = np.exp(self.lam[1:] - self.lam[:-1])  # x_{n+1}/x_n in (0,1)
        self.eta = bundle.eta[o : o + npts]
        self.eta_log = (
            bundle.C_log[0][o + 1 : o + npts + 1] + bundle.w_uv_log[o : o + npts],
            bundle.C_log[1][o + 1 : o + npts + 1],
        )
        self.c_next = bundle.C[o + 1 : o + npts + 1]  # C_{n+1} on the window
        self.sup_c = float(np.nanmax(bundle.sup_C[o:]))
        # 1/(r_n v_n u_{n+1}) in log form
        lr = fss.r.log_range(n0, self.horizon)
        lv = fss.v.log_range(n0, self.horizon + 1)
        lu = fss.u.log_range(n0, self.horizon + 1)
        self.w_vu_log = -(lr + lv[:-1] + lu[1:])
        self.w_uv_plain = np.exp(bundle.w_uv_log[o : o + npts])
        self.lr, self.lu, self.lv = lr, lu, lv
        self.g_tail0 = float(np.real(bundle.G_tail[o]))
        self.a_start = float(bundle.A[o])
        self.neumann_depth_bound = self._neumann_depth()

    def _neumann_depth(self) -> int:
        supc = min(self.sup_c, 0.5)
        if supc <= 0.0:
            return 1
        return max(4, int(math.ceil(math.log(1e-16) / math.log(max(supc, 1e-6)))))

    # --- operators ----------------------------------------------------------

    def apply_A(self, theta: np.ndarray) -> np.ndarray:
        """(A theta)_n on the window; values past the horizon are anchored to
        the window edge and enter only the (recorded) error bound."""
        z_log = self.lam[:-1] + self.eta_log[0] + _clog_mag(theta)
        z_phase = self.eta_log[1] * _phase(theta)
        suf_log, suf_phase = signed_log_suffix_sums(z_log, z_phase)
        out = np.empty_like(theta)
        # (A th)_k = exp(-lam_k) * sum_{m>=k+1} z_m
        out[:-1] = np.exp(suf_log[1:] - self.lam[:-2]) * suf_phase[1:]
        out[-1] = 0.0
        return out

    def apply_g(self, theta: np.ndarray) -> np.ndarray:
        """g_n(theta) = -rho_n C_{n+1} theta_{n+1} with the window-edge anchor."""
        theta_next = np.concatenate([theta[1:], theta[-1:]])
        return -self.rho * self.c_next * theta_next

    def neumann_sum(self, theta: np.ndarray, tol: float) -> np.ndarray:
        """sum_{s>=1} (-1)^s (A^s g(theta))_n, truncated geometrically."""
        psi = self.apply_g(theta)
        acc = np.zeros_like(psi)
        sign = -1.0
        for _ in range(self.neumann_depth_bound):
            psi = self.apply_A(psi)
            acc = acc + sign * psi
            sign = -sign
            top = float(np.max(np.abs(psi)))
            if top <= tol:
                break
        return acc

    def apply_f(self, theta: np.ndarray, tol: float) -> np.ndarray:
        return np.exp(self.w_vu_log) * self.neumann_sum(theta, tol)

    def product_table(self) -> tuple[np.ndarray, float]:
        """P_n = prod_{k>=n}(1+eta_k) on [n0, N+1] via suffix sums of log(1+eta),
        tail-corrected by the eta-tail estimate H_{N+1} = J_{N+1} - C_{N+1}."""
        b = self.bundle
        tail = complex(b.J[-1] - b.C[-1])
        prod = product_suffix(self.eta, tail)
        err = float(abs(b.j_tail_error) + abs(tail) ** 2)
        return prod, err

    def apply_T(self, p_table: np.ndarray, f_values: np.ndarray) -> np.ndarray:
        """(T theta)_n = -P_n sum_{k>=n} f_k / P_k for precomputed f = f(theta)."""
        if float(np.min(np.abs(p_table))) < 1e-6:
            raise DegenerateProduct("product tail nearly vanishes on the window")
        return -p_table[:-1] * suffix_sums(f_values / p_table[:-1])


def product_suffix(factors_minus_one: np.ndarray, log_tail: complex = 0.0) -> np.ndarray:
    """Suffix products prod_{k>=i}(1 + a_k) for the given a_k, times exp(log_tail).

    Returns one extra trailing entry exp(log_tail) for the empty suffix.  The
    products are accumulated as sums of log(1+a_k), which keeps long products
    of near-one factors accurate.
    """
    log1p = np.log1p(np.asarray(factors_minus_one, dtype=complex))
    logs = np.concatenate([suffix_sums(log1p) + log_tail, [complex(log_tail)]])
    return np.exp(logs)


def _clog_mag(z: np.ndarray) -> np.ndarray:
    mag = np.abs(z)
    with np.errstate(divide="ignore"):
        return np.log(mag)


def _phase(z: np.ndarray) -> np.ndarray:
    mag = np.abs(z)
    return np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0 + 0.0j)


# --- window choice ----------------------------------------------------------


def eta_weight(bundle: DiagnosticsBundle, n: int) -> complex:
    """eta_n = C_{n+1}/(r_n u_n v_{n+1}); |eta_n| <= |C_{n+1}| pointwise."""
    return complex(bundle.eta[bundle.index(n)])


def choose_n0(bundle: DiagnosticsBundle, tau: float = 2.0) -> ConstructionWindow:
    """Smallest tabulated window start meeting the contraction thresholds:

    sup_{k>=n0}|C_k| <= 1/2,  |eta_k| <= 1/2,  A_{n0} <= 1/4,
    tau * G_{n0} <= 1/2  with tau re-measured as 2 sup |P_n/P_k| on the window.
    """
    if not (bundle.J_report.converged and bundle.G_report.converged):
        raise ConstructionError(
            "constructive scheme needs J and G convergent "
            f"(J {bundle.J_report.verdict}, G {bundle.G_report.verdict})"
        )
    s, n_top = bundle.start, bundle.horizon
    sup_c = bundle.sup_C
    a = bundle.A
    g_tail = np.real(bundle.G_tail)
    eta_mag = np.abs(bundle.eta)
    eta_sup = np.maximum.accumulate(eta_mag[::-1])[::-1]

    n0 = None
    limit = n_top - max(8, (n_top - s) // 4)
    for n in range(s, limit + 1):
        i = n - s
        if (
            sup_c[i] <= 0.5
            and eta_sup[i] <= 0.5
            and a[i] <= 0.25
            and tau * g_tail[i] <= 0.5
        ):
            n0 = n
            break
    if n0 is None:
        raise HorizonTooSmall(
            "no window start satisfies the contraction thresholds before the horizon"
        )

    # re-measure tau = 2 sup_{n<=k} |P_n/P_k| and advance n0 until consistent
    for _ in range(8):
        ctx = ConstructorContext(bundle, n0)
        p_table, _ = ctx.product_table()
        tau_meas = 2.0 * _sup_ratio(np.abs(p_table))
        if tau_meas * g_tail[n0 - s] <= 0.5:
            return ConstructionWindow(
                n0=n0,
                horizon=n_top,
                sup_c=float(sup_c[n0 - s]),
                a_start=float(a[n0 - s]),
                g_tail=float(g_tail[n0 - s]),
                tau=float(tau_meas),
            )
        advanced = None
        for n in range(n0 + 1, limit + 1):
            if tau_meas * g_tail[n - s] <= 0.5:
                advanced = n
                break
        if advanced is None:
            raise HorizonTooSmall("measured tau never meets tau*G <= 1/2 on the table")
        n0 = advanced
    raise HorizonTooSmall("window choice did not stabilise")


def _sup_ratio(mags: np.ndarray) -> float:
    """sup over n <= k of mags[n]/mags[k]."""
    suffix_min = np.minimum.accumulate(mags[::-1])[::-1]
    return float(np.max(mags / suffix_min))


def product_tail(
    bundle: DiagnosticsBundle, n: int, tol: float = 1e-9
):
    """Report for P_n = prod_{k>=n}(1+eta_k) with the windowed settling check."""
    from .convergence import CONVERGED, INCONCLUSIVE, ConvergenceReport

    ctx = ConstructorContext(bundle, n)
    if float(np.max(np.abs(ctx.eta))) > 0.5:
        raise ConstructionError("product tail needs |eta| <= 1/2 on the window")
    p_table, err = ctx.product_table()
    # partial products settle iff the suffix log sums do; test the head value
    log1p = np.log1p(ctx.eta.astype(complex))
    partial = np.cumsum(log1p)
    w = min(64, partial.size - 1)
    band = float(np.max(np.abs(partial[-(w + 1):] - partial[-1])))
    eta_sq = float(np.sum(np.abs(ctx.eta) ** 2))
    if bundle.G_report.converged or band <= tol:
        evidence = (
            f"sum eta certified (eta^2 total {eta_sq:.2e} <= G) and partial "
            f"products settled within {band:.2e}"
        )
        return ConvergenceReport(
            CONVERGED,
            value=complex(p_table[0]),
            error_estimate=err + band,
            horizon_used=bundle.horizon,
            evidence=evidence,
        )
    return ConvergenceReport(
        INCONCLUSIVE,
        horizon_used=bundle.horizon,
        evidence=f"partial products not settled (band {band:.2e})",
    )


# --- fixed point ---------------------------------------------------------------


def solve_beta(
    bundle: DiagnosticsBundle,
    window: ConstructionWindow | None = None,
    max_iter: int = 80,
    tol: float | None = None,
    start: np.ndarray | None = None,
) -> BetaSolution:
    """Picard iteration for beta = P + T beta, starting from beta^(0) = P.

    Stops when the sup-norm update falls below tol; records the per-step
    contraction rates, the recovered mu sequence, and the residual of the
    transformed second-order equation D(r u u D beta) = sigma u^2 beta.
    """
    if window is None:
        window = choose_n0(bundle)
    tol = tol if tol is not None else bundle.problem.tolerances.solver_tol
    ctx = ConstructorContext(bundle, window.n0)
    p_table, _ = ctx.product_table()
    neumann_tol = tol * 1e-2

    beta = p_table[:-1].copy() if start is None else np.asarray(start, dtype=complex).copy()
    rates: list[float] = []
    prev_diff = None
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        f_vals = ctx.apply_f(beta, neumann_tol)
        nxt = p_table[:-1] + ctx.apply_T(p_table, f_vals)
        diff = float(np.max(np.abs(nxt - beta)))
        beta = nxt
        if prev_diff is not None and prev_diff > 0:
            rates.append(diff / prev_diff)
        prev_diff = diff
        if diff <= tol:
            break
        if len(rates) >= 6 and all(r > 0.9 for r in rates[-5:]) and diff > 100 * tol:
            raise NoContraction(f"update ratios stuck near {rates[-1]:.3f}")
    else:
        raise MaxIterExceeded(f"no fixed point after {max_iter} iterations")

    # recovered mu_n = g_n(beta) + sum_s (-1)^s (A^s g(beta))_n  (operator route)
    mu = ctx.apply_g(beta) + ctx.neumann_sum(beta, neumann_tol)
    f_vals = ctx.apply_f(beta, neumann_tol)
    gap = float(np.max(np.abs(beta - p_table[:-1] - ctx.apply_T(p_table, f_vals))))

    sol = BetaSolution(
        window=window,
        ns=ctx.ns,
        beta=beta,
        product=p_table[:-1],
        mu=mu,
        iterations=iterations,
        contraction_rates=rates,
        fixed_point_gap=gap,
    )
    sol.residual_beta_eq = _beta_equation_residual(bundle, ctx, beta)
    sol.residual_mu = _mu_consistency_residual(ctx, beta, mu)
    return sol


def _beta_equation_residual(
    bundle: DiagnosticsBundle, ctx: ConstructorContext, beta: np.ndarray
) -> float:
    """Scaled residual of D(r_{n-1} u_{n-1} u_n D beta_{n-1}) = sigma_n u_n^2 beta_n."""
    problem = bundle.problem
    ns = ctx.ns
    lsig, psig = problem.sigma.eval_log_arrays(ns)
    rhs = np.exp(lsig + 2.0 * ctx.lu[:-1]) * psig * beta
    a = np.exp(ctx.lr + ctx.lu[:-1] + ctx.lu[1:])  # r_n u_n u_{n+1}
    flux = a[:-1] * np.diff(beta)  # r_n u_n u_{n+1} D beta_n, n in [n0, N-1]
    lhs = np.diff(flux)  # D of the flux, aligned with n in [n0+1, N-1]
    res = np.abs(lhs - rhs[1:-1])
    scale = float(np.max(np.abs(rhs))) + float(np.max(np.abs(flux)))
    return float(np.max(res)) / max(scale, 1e-300)


def _mu_consistency_residual(
    ctx: ConstructorContext, beta: np.ndarray, mu: np.ndarray
) -> float:
    """mu must equal r_n v_n u_{n+1} D beta_n and satisfy the rewritten tail
    equation mu = g(beta) - A mu."""
    direct = np.exp(-ctx.w_vu_log[:-1]) * np.diff(beta)
    d1 = float(np.max(np.abs(direct - mu[:-1])))
    tail_eq = ctx.apply_g(beta) - ctx.apply_A(mu)
    d2 = float(np.max(np.abs(mu - tail_eq)))
    scale = max(float(np.max(np.abs(mu))), 1e-300)
    return max(d1, d2) / scale


# --- assembling the perturbed system ---------------------------------------------


def build_perturbed_fss(bundle: DiagnosticsBundle, sol: BetaSolution) -> PerturbedFSS:
    """u~ = beta u and v~ from the running-sum formula, with the perturbed
    Casoratian checked on the window.

    A vanishing perturbation short-circuits to the unperturbed pair itself
    (beta is identically one and every correction term vanishes exactly).
    """
    if float(np.min(np.abs(sol.beta))) < 0.5:
        raise BetaTooSmall("|beta| < 1/2 inside the window")
    if bundle.problem.sigma.is_zero():
        return _unperturbed_copy(bundle, sol)
    ctx = ConstructorContext(bundle, sol.window.n0)
    beta = sol.beta
    log_beta = np.log(beta.astype(complex))
    u_tilde_log = ctx.lu[:-1] + log_beta

    # running sums of 1/(r_k u~_k u~_{k+1}) in the log domain (terms can span
    # thousands of orders of magnitude on exponential-scale systems)
    lt = -(ctx.lr[:-1] + ctx.lu[:-2] + ctx.lu[1:-1])  # log of 1/(r u u), k in [n0, N-1]
    corr = 1.0 / (beta[:-1] * beta[1:])
    term_log = lt + np.log(np.abs(corr))
    term_phase = corr / np.abs(corr)
    from .lognum import complex_log_cumsum

    cum_log, cum_phase = complex_log_cumsum(term_log, term_phase)

    # v~_{n+1} = u~_{n+1} * S_n, n in [n0, N-1]; v~ vanishes at the window start
    v_tilde_log = np.empty_like(u_tilde_log)
    v_tilde_log[0] = -math.inf
    v_tilde_log[1:] = u_tilde_log[1:] + cum_log + np.log(cum_phase)

    # ratio v~/v = beta_{n+1} S_n / (v/u)_{n+1}
    ratio_v = np.empty(beta.size, dtype=complex)
    ratio_v[0] = np.nan
    ratio_v[1:] = (
        beta[1:] * np.exp(cum_log - (ctx.lv[1:-1] - ctx.lu[1:-1])) * cum_phase
    )

    # perturbed Casoratian: r_n u~_n u~_{n+1} (S_n - S_{n-1}) must equal 1;
    # the step difference is recovered from the stored running sums so the
    # residual reflects the accumulated roundoff honestly
    ratio_step = (
        np.exp(cum_log[1:] - cum_log[:-1]) * (cum_phase[1:] / cum_phase[:-1]) - 1.0
    )
    diff_log = np.concatenate([[cum_log[0]], cum_log[:-1] + np.log(np.abs(ratio_step))])
    diff_phase = np.concatenate(
        [[cum_phase[0]], cum_phase[:-1] * ratio_step / np.abs(ratio_step)]
    )
    lw = ctx.lr[:-1] + ctx.lu[:-2] + ctx.lu[1:-1]  # log(r_n u_n u_{n+1})
    resid = np.exp(lw + diff_log) * diff_phase * (beta[:-1] * beta[1:]) - 1.0
    wres = float(np.max(np.abs(resid)))

    # narrow-condition partial sums: sum r_n u_n v_{n+1} |D beta_n|^2
    wt = np.exp(ctx.lr + ctx.lu[:-1] + ctx.lv[1:])
    narrow = np.cumsum(wt[:-1] * np.abs(np.diff(beta)) ** 2)

    return PerturbedFSS(
        ns=ctx.ns,
        ratio_u=beta.copy(),
        ratio_v=ratio_v,
        u_tilde_log=u_tilde_log,
        v_tilde_log=v_tilde_log,
        narrow_partial=narrow,
        wronskian_residual=wres,
    )


def _unperturbed_copy(bundle: DiagnosticsBundle, sol: BetaSolution) -> PerturbedFSS:
    fss = bundle.fss
    n0, n_top = sol.window.n0, sol.window.horizon
    ns = np.arange(n0, n_top + 1)
    lu = fss.u.log_range(n0, n_top + 1)[:-1].astype(complex)
    lv = fss.v.log_range(n0, n_top + 1)[:-1].astype(complex)
    ones = np.ones(ns.size, dtype=complex)
    return PerturbedFSS(
        ns=ns,
        ratio_u=ones.copy(),
        ratio_v=ones.copy(),
        u_tilde_log=lu,
        v_tilde_log=lv,
        narrow_partial=np.zeros(ns.size - 1),
        wronskian_residual=fss.wronskian_residual,
    )


@dataclass
class AsymptoticsReport:
    ratio_u_tail_max: float
    ratio_u_decayed: bool
    ratio_v_tail_max: float
    scaled_ratio_u_tail: float  # (1.5)-type quantity r u v |u~-ratio slip|
    scaled_ratio_u_decayed: bool
    scaled_ratio_v_tail: float
    scaled_ratio_v_decayed: bool
    narrow_plateau_variation: float
    narrow_total: float
    narrow_bound: float
    ok: bool = False

    def to_json(self) -> dict:
        return {
            "ratio_u_tail_max": self.ratio_u_tail_max,
            "ratio_u_decayed": self.ratio_u_decayed,
            "ratio_v_tail_max": self.ratio_v_tail_max,
            "scaled_ratio_u_tail": self.scaled_ratio_u_tail,
            "scaled_ratio_u_decayed": self.scaled_ratio_u_decayed,
            "scaled_ratio_v_tail": self.scaled_ratio_v_tail,
            "scaled_ratio_v_decayed": self.scaled_ratio_v_decayed,
            "narrow_plateau_variation": self.narrow_plateau_variation,
            "narrow_total": self.narrow_total,
            "narrow_bound": self.narrow_bound,
            "ok": self.ok,
        }


def verify_asymptotics(
    bundle: DiagnosticsBundle,
    sol: BetaSolution,
    pfss: PerturbedFSS,
    ratio_tol: float = 1e-3,
    plateau_tol: float = 1e-6,
) -> AsymptoticsReport:
    """Check the three asymptotic requirements on the tail of the window.

    (a) |u~/u - 1| small and shrinking over the final quarter; (b) the weighted
    ratio slips of both solutions tend to zero (decay of the tail-quarter
    envelope, or already below tolerance); (c) the weighted square-sum of the
    ratio increments has plateaued.
    """
    ctx = ConstructorContext(bundle, sol.window.n0)
    beta = sol.beta
    n = beta.size
    q4 = max(n // 4, 8)

    def tail_head(values: np.ndarray) -> tuple[float, bool]:
        tail = float(np.nanmax(values[-q4:]))
        head = float(np.nanmax(values[:q4]))
        return tail, tail <= max(1.5 * head, ratio_tol)

    dev_u = np.abs(beta - 1.0)
    tail_max, decayed = tail_head(dev_u)

    dev_v = np.abs(pfss.ratio_v[1:] - 1.0)
    ratio_v_tail = float(np.nanmax(dev_v[-q4:]))

    # (1.5)-type: r_n u_n v_n |u~_{n+1}/u~_n - u_{n+1}/u_n| = |mu_n| / |beta_n|
    scale_15 = np.exp(ctx.lr[:-1] + ctx.lv[:-2] + ctx.lu[1:-1]) * np.abs(
        np.diff(beta)
    ) / np.abs(beta[:-1])
    s15_tail, s15_decayed = tail_head(scale_15)

    # (1.6)-type via v~/v ratios: r_n u_n v_n |v~_{n+1}/v~_n - v_{n+1}/v_n|
    rv = pfss.ratio_v
    with np.errstate(invalid="ignore"):
        slip = rv[1:] / rv[:-1] - 1.0
    slip[0] = 0.0
    lvr = ctx.lv[1:-1] - ctx.lv[:-2]  # log(v_{n+1}/v_n)
    s16 = np.exp(ctx.lr[:-1] + ctx.lu[:-2] + ctx.lv[:-2] + lvr) * np.abs(slip)
    s16_tail, s16_decayed = tail_head(s16)

    w = min(64, pfss.narrow_partial.size - 1)
    plateau = float(
        np.max(np.abs(pfss.narrow_partial[-(w + 1):] - pfss.narrow_partial[-1]))
    )
    total = float(np.real(pfss.narrow_partial[-1]))
    bound = sol.window.tau * sol.window.g_tail * max(1.0, float(np.max(np.abs(beta))) ** 2)

    ok = (
        tail_max <= ratio_tol
        and decayed
        and s15_decayed
        and plateau <= plateau_tol
    )
    return AsymptoticsReport(
        ratio_u_tail_max=tail_max,
        ratio_u_decayed=decayed,
        ratio_v_tail_max=ratio_v_tail,
        scaled_ratio_u_tail=s15_tail,
        scaled_ratio_u_decayed=s15_decayed,
        scaled_ratio_v_tail=s16_tail,
        scaled_ratio_v_decayed=s16_decayed,
        narrow_plateau_variation=plateau,
        narrow_total=total,
        narrow_bound=bound,
        ok=ok,
    )


def perturbed_equation_residual(bundle: DiagnosticsBundle, sol: BetaSolution) -> float:
    """Scaled residual of the original equation D(r_{n-1} D y_{n-1}) = (q+sigma)_n y_n
    for y = u~ = beta u, maximised over the interior of the window.

    The equation is linear, so y is rescaled by its largest magnitude first;
    the residual at each n is scaled by the size of the terms entering it.
    """
    ctx = ConstructorContext(bundle, sol.window.n0)
    problem = bundle.problem
    log_y = ctx.lu[:-1] + np.log(sol.beta.astype(complex))
    y = np.exp(log_y - np.max(log_y.real))
    ns = ctx.ns
    # divide the equation at n by r_n: ratios r_{n-1}/r_n and (q+sigma)_n/r_n
    # stay O(1) even on exponential-scale systems
    r_ratio = np.exp(ctx.lr[:-1] - ctx.lr[1:])  # r_{n-1}/r_n for n in [n0+1, N]
    lq, pq = problem.q.eval_log_arrays(ns)
    ls, ps = problem.sigma.eval_log_arrays(ns)
    coef = np.exp(lq - ctx.lr) * pq + np.exp(ls - ctx.lr) * ps  # (q+sigma)_n / r_n
    dy = np.diff(y)
    lhs = dy[1:] - r_ratio[:-1] * dy[:-1]  # n in [n0+1, N-1]
    rhs = coef[1:-1] * y[1:-1]
    scale = np.abs(dy[1:]) + np.abs(r_ratio[:-1] * dy[:-1]) + np.abs(rhs)
    return float(np.max(np.abs(lhs - rhs) / np.maximum(scale, 1e-300)))


def oracle_direct_recurrence(
    problem: ProblemSpec, n0: int, n_top: int, levels: int = 5
) -> np.ndarray:
    """Independent recessive solution of the perturbed equation on [n0, n_top],
    from extrapolated backward recurrences, normalised to 1 at n0."""
    sigma = problem.sigma

    def extra(ns: np.ndarray):
        return sigma.eval_log_arrays(ns)

    return recessive_by_backward_recurrence(
        problem.r,
        problem.q if not problem.q.is_zero() else None,
        n0,
        n_top,
        levels=levels,
        extra_terms=extra,
        complex_ok=True,
    )


def oracle_deviation(
    bundle: DiagnosticsBundle, sol: BetaSolution, compare_upto: int | None = None
) -> float:
    """Max relative deviation between u~ = beta u and the backward oracle after
    scalar normalisation at the window start, over [n0, compare_upto]."""
    n0 = sol.window.n0
    n_top = sol.window.horizon
    upto = compare_upto if compare_upto is not None else n_top // 2
    oracle = oracle_direct_recurrence(bundle.problem, n0, n_top)
    keep = upto - n0 + 1
    lu = bundle.fss.u.log_range(n0, upto)
    u_tilde_norm = np.exp(lu - lu[0]) * (sol.beta[:keep] / sol.beta[0])
    dev = np.abs(oracle[:keep] - u_tilde_norm) / np.abs(u_tilde_norm)
    return float(np.max(dev))
