"""E-value sensitivity analysis for the direct effect.

The E-value of a risk ratio RR (oriented away from the null, reciprocal
taken when RR < 1) is RR + sqrt(RR * (RR - 1)): the weakest pair of equal
confounder associations with treatment and outcome able to explain the
estimate away. The explain-away frontier traces unequal pairs:
y(x) = RR * (x - 1) / (x - RR), whose diagonal point x = y is the E-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError


def rr_from_risk_difference(risk_difference: float, baseline_risk: float) -> float:
    """Convert a risk difference to a risk ratio against a baseline risk."""
    if not 0.0 < baseline_risk < 1.0:
        raise DomainError(f"baseline_risk must lie in (0, 1), got {baseline_risk}")
    exposed = baseline_risk + risk_difference
    if not 0.0 < exposed < 1.0:
        raise DomainError(
            f"baseline + risk_difference = {exposed} must lie in (0, 1)"
        )
    return exposed / baseline_risk


def e_value(rr: float) -> float:
    """Minimum confounder risk-ratio association nullifying the estimate.

    RR below 1 is reoriented by reciprocal first; the null RR = 1 maps to 1.
    """
    if rr <= 0.0:
        raise DomainError(f"risk ratio must be positive, got {rr}")
    oriented = 1.0 / rr if rr < 1.0 else rr
    if oriented == 1.0:
        return 1.0
    return oriented + math.sqrt(oriented * (oriented - 1.0))


def sensitivity_curve(rr_obs: float, grid) -> list[tuple[float, float]]:
    """Explain-away frontier points (x, y(x)) for x > rr_obs.

    Every point satisfies x*y / (x + y - 1) = rr_obs; x -> inf approaches
    y = rr_obs from above; the diagonal point equals e_value(rr_obs).
    """
    if rr_obs <= 1.0:
        raise DomainError(f"rr_obs must exceed 1 after orientation, got {rr_obs}")
    out = []
    for x in grid:
        if x <= rr_obs:
            raise DomainError(f"grid value {x} is not above rr_obs={rr_obs}")
        out.append((float(x), rr_obs * (x - 1.0) / (x - rr_obs)))
    return out


def default_grid(rr_obs: float, n_points: int = 80, x_max: float | None = None) -> list[float]:
    """Log-spaced grid hugging the asymptote near rr_obs."""
    if rr_obs <= 1.0:
        raise DomainError(f"rr_obs must exceed 1, got {rr_obs}")
    if x_max is None:
        x_max = max(4.0, 2.0 * e_value(rr_obs))
    if x_max <= rr_obs:
        raise DomainError(f"x_max={x_max} must exceed rr_obs={rr_obs}")
    lo = 0.02 * (rr_obs - 1.0) + 1e-9
    hi = x_max - rr_obs
    ratio = (hi / lo) ** (1.0 / (n_points - 1))
    return [rr_obs + lo * ratio**i for i in range(n_points)]


def bounds_statement(ide: float, iie: float, monotone_asserted: bool) -> str:
    """Natural-effect bound text, emitted only under the monotone-response
    assumption; otherwise the interventional reading alone."""
    ide_pp = f"{ide * 100:.1f} pp"
    iie_pp = f"{iie * 100:.1f} pp"
    if not monotone_asserted:
        return (
            f"Interventional decomposition: direct effect {ide_pp}, "
            f"indirect effect {iie_pp}. No natural-effect bound is claimed "
            "(monotone indirect treatment response not asserted)."
        )
    return (
        f"Under monotone indirect treatment response (higher financial "
        f"distress weakly increases denial for every applicant) and the "
        f"stochastic dominance of protected-group mediators: "
        f"NDE >= IDE = {ide_pp}; NIE <= IIE = {iie_pp}."
    )


@dataclass
class SensitivityResult:
    rr_point: float
    rr_ci_lo: float | None
    evalue_point: float
    evalue_ci: float | None
    baseline_risk: float
    curve: list[tuple[float, float]] = field(default_factory=list)
    curve_ci: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rr_point": self.rr_point,
            "rr_ci_lo": self.rr_ci_lo,
            "evalue_point": self.evalue_point,
            "evalue_ci": self.evalue_ci,
            "baseline_risk": self.baseline_risk,
        }


def build_sensitivity(ide: float, ci_bound: float | None, baseline_risk: float,
                      grid=None, n_points: int = 80) -> SensitivityResult:
    """Package E-values and frontier series for the point estimate and the
    CI bound closer to the null. Degenerate (null) estimates produce
    E-value 1 and no curve."""
    rr_point = rr_from_risk_difference(ide, baseline_risk)
    ev_point = e_value(rr_point)
    oriented = 1.0 / rr_point if rr_point < 1.0 else rr_point
    curve = []
    if oriented > 1.0:
        pts = grid if grid is not None else default_grid(oriented, n_points)
        curve = sensitivity_curve(oriented, pts)

    rr_ci = ev_ci = None
    curve_ci: list[tuple[float, float]] = []
    if ci_bound is not None and 0.0 < baseline_risk + ci_bound < 1.0:
        rr_ci = rr_from_risk_difference(ci_bound, baseline_risk)
        if (rr_point - 1.0) * (rr_ci - 1.0) <= 0.0:
            ev_ci = 1.0
        else:
            ev_ci = e_value(rr_ci)
            oriented_ci = 1.0 / rr_ci if rr_ci < 1.0 else rr_ci
            if oriented_ci > 1.0:
                pts = grid if grid is not None else default_grid(oriented_ci, n_points)
                curve_ci = sensitivity_curve(oriented_ci, pts)
    return SensitivityResult(
        rr_point=rr_point,
        rr_ci_lo=rr_ci,
        evalue_point=ev_point,
        evalue_ci=ev_ci,
        baseline_risk=baseline_risk,
        curve=curve,
        curve_ci=curve_ci,
    )
