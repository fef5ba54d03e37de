"""Verdict logic: from a diagnostics bundle to a solvability classification.

The decision table composes three criteria:

  necessary   - the sigma-series must converge and C_n must vanish at infinity;
                failure (with definite evidence) rules solvability out.
  narrow      - J convergent together with G (or L) convergent characterises
                solvability of the restricted problem exactly.
  equivalence - G < infinity is exactly when the restricted and the full
                problem coincide, so "narrow fails + G finite" also rules the
                full problem out, while "narrow fails + G infinite" is a known
                gap and stays indeterminate.

Inconclusive reports never produce a NotSolvable verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import DiagnosticsBundle

NOT_SOLVABLE = "not_solvable"
NARROW_SOLVABLE = "narrow_solvable"
SOLVABLE_EQUIVALENT = "solvable_and_equivalent"
SUFFICIENT_ONLY = "sufficient_only"
INDETERMINATE = "indeterminate"

REASON_SIGMA = "sigma_diverges"
REASON_C = "c_not_vanishing"
REASON_NARROW_EQ = "narrow_fails_equivalent"

SOLVABLE_STATUSES = {NARROW_SOLVABLE, SOLVABLE_EQUIVALENT, SUFFICIENT_ONLY}


def _tri_name(value: bool | None) -> str:
    return {True: "true", False: "false", None: "unknown"}[value]


@dataclass
class Verdict:
    status: str
    reason: str = ""
    criteria: list = field(default_factory=list)
    necessary: bool | None = None
    narrow: bool | None = None
    equivalence: bool | None = None
    evidence: dict = field(default_factory=dict)
    lemma_violations: list = field(default_factory=list)

    @property
    def solvable(self) -> bool | None:
        if self.status in SOLVABLE_STATUSES:
            return True
        if self.status == NOT_SOLVABLE:
            return False
        return None

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "criteria": list(self.criteria),
            "necessary": _tri_name(self.necessary),
            "narrow": _tri_name(self.narrow),
            "equivalence": _tri_name(self.equivalence),
            "evidence": self.evidence,
            "lemma_violations": list(self.lemma_violations),
        }


def necessary_conditions(bundle: DiagnosticsBundle) -> tuple[bool | None, str]:
    """Tri-state: sigma-series convergent and C_n -> 0."""
    sig = bundle.sigma_series
    if sig.diverged:
        return False, REASON_SIGMA
    if bundle.C_limit_zero is False:
        return False, REASON_C
    if sig.converged and bundle.C_limit_zero is True:
        return True, ""
    return None, ""


def narrow_criterion(bundle: DiagnosticsBundle) -> tuple[bool | None, list]:
    """Tri-state for the restricted problem: J convergent and (G or L) convergent.

    G has nonnegative terms, so its verdict is authoritative; L only decides
    when G is inconclusive.  A definite disagreement between the two is
    impossible in exact arithmetic (given J convergent they converge together)
    and is reported as a violation.
    """
    violations = []
    j, g, lr = bundle.J_report, bundle.G_report, bundle.L_report
    if j.diverged:
        return False, violations
    if not j.converged:
        return None, violations
    if (g.converged and lr.diverged) or (g.diverged and lr.converged):
        violations.append(
            f"L/G equivalence violated numerically: G {g.verdict}, L {lr.verdict}"
        )
    if g.converged:
        return True, violations
    if g.diverged:
        return False, violations
    if lr.converged:
        return True, violations
    if lr.diverged:
        return False, violations
    return None, violations


def equivalence_criterion(bundle: DiagnosticsBundle) -> bool | None:
    """Tri-state: does the full problem coincide with the restricted one (G finite)?"""
    g = bundle.G_report
    if g.converged:
        return True
    if g.diverged:
        return False
    return None


def sufficient_conditions(bundle: DiagnosticsBundle) -> list:
    """The satisfied sufficiency criteria (only meaningful when J converges):

    I   - any of the three absolute comparison series converges,
    II  - P converges,
    III - the A-weighted absolute series converges,
    IV  - J converges absolutely.
    """
    if not bundle.J_report.converged:
        return []
    out = []
    reps = bundle.criteria_reports
    if any(reps[k].converged for k in ("I.1", "I.2", "I.3")):
        out.append("I")
    if reps["II"].converged:
        out.append("II")
    if reps["III"].converged:
        out.append("III")
    if reps["IV"].converged:
        out.append("IV")
    return out


def classify(bundle: DiagnosticsBundle) -> Verdict:
    """Full decision table; see the module docstring."""
    nec, reason = necessary_conditions(bundle)
    narrow, violations = narrow_criterion(bundle)
    equiv = equivalence_criterion(bundle)
    criteria = sufficient_conditions(bundle)
    evidence = {
        "sigma_series": bundle.sigma_series.verdict,
        "C_limit_zero": bundle.C_limit_zero,
        "C_limit_evidence": bundle.C_limit_evidence,
        "J": bundle.J_report.verdict,
        "G": bundle.G_report.verdict,
        "L": bundle.L_report.verdict,
        "P": bundle.P_report.verdict,
        "B": bundle.B_report.verdict,
        "I": bundle.I_report.verdict,
    }

    def verdict(status: str, reason_: str = "") -> Verdict:
        return Verdict(
            status=status,
            reason=reason_,
            criteria=criteria,
            necessary=nec,
            narrow=narrow,
            equivalence=equiv,
            evidence=evidence,
            lemma_violations=violations,
        )

    if nec is False:
        return verdict(NOT_SOLVABLE, reason)
    if narrow is True:
        if equiv is True:
            return verdict(SOLVABLE_EQUIVALENT)
        return verdict(NARROW_SOLVABLE)
    if narrow is False:
        if equiv is True:
            return verdict(NOT_SOLVABLE, REASON_NARROW_EQ)
        return verdict(INDETERMINATE)
    if bundle.J_report.converged and criteria:
        return verdict(SUFFICIENT_ONLY)
    return verdict(INDETERMINATE)
