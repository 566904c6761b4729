"""Cross-fitted AIPW estimation of interventional direct/indirect effects.

The direct and indirect contrasts are derived from three jointly estimated
potential-outcome means,

    psi(1, G1), psi(1, G0), psi(0, G0),

so that IDE = psi(1,G0) - psi(0,G0), IIE = psi(1,G1) - psi(1,G0), and
IDE + IIE = psi(1,G1) - psi(0,G0) holds exactly by construction. Each mean
is a per-unit plug-in term (Monte Carlo integral of mu-hat against donor
draws for the requested mediator arm) plus a one-step residual correction:

    psi(0,G0): control units add (1-A)/pi0(W) * (Y - mu(0,M,W))
    psi(1,G0): treated units add A/pi1(W) * r^-1(M,W) * (Y - mu(1,M,W))
    psi(1,G1): treated units add A/pi1(W) * (Y - mu(1,M,W))

The difference of the first two reproduces the IDE influence function term
for term. Standard errors are Wald, from the empirical variance of the
per-unit influence values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from ._rng import substream
from .dag import CreditDag, validate_dag
from .dataset import AuditDataset, FoldAssignment, assign_folds
from .errors import NonFiniteInput
from .nuisance import NuisanceConfig, NuisanceSet, fit_nuisances
from . import sensitivity as sens

_NORMAL = NormalDist()


@dataclass
class PotentialOutcomeMeans:
    """The three potential-outcome means with per-unit contributions."""

    psi_1_g1: float
    psi_1_g0: float
    psi_0_g0: float
    contrib_1_g1: np.ndarray
    contrib_1_g0: np.ndarray
    contrib_0_g0: np.ndarray
    n_clipped_propensity: int = 0
    n_clipped_ratio: int = 0
    augmented: bool = False

    @property
    def ide(self) -> float:
        return self.psi_1_g0 - self.psi_0_g0

    @property
    def iie(self) -> float:
        return self.psi_1_g1 - self.psi_1_g0

    def influence_ide(self) -> np.ndarray:
        return (self.contrib_1_g0 - self.contrib_0_g0) - self.ide

    def influence_iie(self) -> np.ndarray:
        return (self.contrib_1_g1 - self.contrib_1_g0) - self.iie

    def means_in_unit_interval(self) -> bool:
        return all(0.0 <= v <= 1.0 for v in (self.psi_1_g1, self.psi_1_g0, self.psi_0_g0))


def _theta_contributions(dataset: AuditDataset, nuisances: NuisanceSet,
                         folds: FoldAssignment, d_draws: int, seed: int):
    """Per-unit Monte Carlo plug-in terms theta_i(a, arm) for the three
    (outcome arm, mediator arm) pairs, evaluated with fold-complement models.

    The same G0 draws serve both mu(1,.) and mu(0,.), so a constant mu-hat
    yields an exactly zero direct contrast.
    """
    n = dataset.n
    theta_1_g1 = np.empty(n)
    theta_1_g0 = np.empty(n)
    theta_0_g0 = np.empty(n)
    for k in range(1, folds.k + 1):
        idx = folds.eval_index(k)
        if len(idx) == 0:
            continue
        models = nuisances.folds[k]
        w_units = dataset.w[idx]
        for arm in (0, 1):
            keys = np.array([substream(seed, int(i), arm) for i in idx], dtype=np.uint64)
            draws = models.sampler.sample_matrix(w_units, arm, d_draws, keys)
            flat_m = draws.reshape(-1, dataset.n_mediators)
            flat_w = np.repeat(w_units, d_draws, axis=0)
            mu1 = models.mu.predict(1, flat_m, flat_w).reshape(len(idx), d_draws)
            if arm == 0:
                mu0 = models.mu.predict(0, flat_m, flat_w).reshape(len(idx), d_draws)
                theta_1_g0[idx] = mu1.mean(axis=1)
                theta_0_g0[idx] = mu0.mean(axis=1)
            else:
                theta_1_g1[idx] = mu1.mean(axis=1)
    return theta_1_g1, theta_1_g0, theta_0_g0


def plug_in_means(dataset: AuditDataset, nuisances: NuisanceSet, folds: FoldAssignment,
                  d_draws: int, seed: int | None = None) -> PotentialOutcomeMeans:
    """Identification plug-in: average the per-unit Monte Carlo integrals,
    no augmentation terms."""
    if d_draws < 1:
        raise ValueError("d_draws must be >= 1")
    seed = folds.seed if seed is None else seed
    t11, t10, t00 = _theta_contributions(dataset, nuisances, folds, d_draws, seed)
    return PotentialOutcomeMeans(
        psi_1_g1=float(t11.mean()),
        psi_1_g0=float(t10.mean()),
        psi_0_g0=float(t00.mean()),
        contrib_1_g1=t11,
        contrib_1_g0=t10,
        contrib_0_g0=t00,
    )


def aipw_means(dataset: AuditDataset, nuisances: NuisanceSet, folds: FoldAssignment,
               d_draws: int, seed: int | None = None) -> PotentialOutcomeMeans:
    """Plug-in terms plus the one-step residual corrections."""
    if d_draws < 1:
        raise ValueError("d_draws must be >= 1")
    seed = folds.seed if seed is None else seed
    t11, t10, t00 = _theta_contributions(dataset, nuisances, folds, d_draws, seed)
    c11, c10, c00 = t11.copy(), t10.copy(), t00.copy()
    lo, hi = nuisances.config.prob_clip
    n_clip_pi = 0
    n_clip_r = 0
    for k in range(1, folds.k + 1):
        idx = folds.eval_index(k)
        if len(idx) == 0:
            continue
        models = nuisances.folds[k]
        w = dataset.w[idx]
        m = dataset.m[idx]
        a = dataset.a[idx]
        y = dataset.y[idx]
        pi1_raw = models.pi.predict(w)
        n_clip_pi += int(((pi1_raw < lo) | (pi1_raw > hi)).sum())
        pi1 = np.clip(pi1_raw, lo, hi)
        r = models.ratio.ratio(m, w)
        eps = nuisances.config.ratio_clip
        n_clip_r += int(((r <= eps) | (r >= 1.0 / eps)).sum())

        treated = a == 1
        control = ~treated
        mu1_obs = models.mu.predict(1, m[treated], w[treated])
        mu0_obs = models.mu.predict(0, m[control], w[control])
        resid1 = y[treated] - mu1_obs
        resid0 = y[control] - mu0_obs

        gidx = idx[treated]
        c11[gidx] += resid1 / pi1[treated]
        c10[gidx] += resid1 / pi1[treated] / r[treated]
        c00[idx[control]] += resid0 / (1.0 - pi1[control])

    for name, arr in (("psi(1,G1)", c11), ("psi(1,G0)", c10), ("psi(0,G0)", c00)):
        if not np.isfinite(arr).all():
            raise NonFiniteInput(f"non-finite influence contribution in {name}")
    return PotentialOutcomeMeans(
        psi_1_g1=float(c11.mean()),
        psi_1_g0=float(c10.mean()),
        psi_0_g0=float(c00.mean()),
        contrib_1_g1=c11,
        contrib_1_g0=c10,
        contrib_0_g0=c00,
        n_clipped_propensity=n_clip_pi,
        n_clipped_ratio=n_clip_r,
        augmented=True,
    )


def wald_ci(estimate: float, influence_values: np.ndarray,
            level: float = 0.95) -> tuple[float, float, float]:
    """(lo, hi, se) with se = sqrt(Var(psi) / n), interval = estimate +- z*se."""
    psi = np.asarray(influence_values, dtype=np.float64)
    if len(psi) < 2:
        raise ValueError("need at least two influence values")
    if not np.isfinite(psi).all():
        raise NonFiniteInput("influence values contain non-finite entries")
    se = float(np.sqrt(psi.var() / len(psi)))
    z = _NORMAL.inv_cdf(0.5 + level / 2.0)
    return estimate - z * se, estimate + z * se, se


def _p_value(estimate: float, se: float) -> float:
    if se == 0.0:
        return 0.0 if estimate != 0.0 else 1.0
    z = abs(estimate) / se
    return 2.0 * (1.0 - _NORMAL.cdf(z))


@dataclass(frozen=True)
class EstimatorConfig:
    k: int = 5
    d_draws: int = 25
    seed: int = 0
    level: float = 0.95
    nuisance: NuisanceConfig = field(default_factory=NuisanceConfig)
    positivity_warn_share: float = 0.01

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "d_draws": self.d_draws,
            "seed": self.seed,
            "level": self.level,
            "nuisance": self.nuisance.to_dict(),
            "positivity_warn_share": self.positivity_warn_share,
        }


@dataclass
class MediationEstimate:
    """Point estimates, Wald inference, E-values, and run diagnostics."""

    ide: float
    iie: float
    total_contrast: float
    se_ide: float
    se_iie: float
    ci_ide: tuple[float, float]
    ci_iie: tuple[float, float]
    p_ide: float
    p_iie: float
    level: float
    n_used: int
    k_folds: int
    seed: int
    learner_config: dict
    influence_ide: np.ndarray
    influence_iie: np.ndarray
    psi_1_g1: float
    psi_1_g0: float
    psi_0_g0: float
    raw_gap: float
    baseline_risk: float
    evalue_point: float | None
    evalue_ci: float | None
    rr_point: float | None
    n_clipped_propensity: int
    n_clipped_ratio: int
    positivity_warning: bool
    means_in_unit_interval: bool
    assumptions: dict | None = None

    def to_dict(self) -> dict:
        """Audit record without the per-unit arrays."""
        return {
            "estimates": {
                "ide": self.ide,
                "iie": self.iie,
                "total_contrast": self.total_contrast,
                "raw_gap": self.raw_gap,
                "se_ide": self.se_ide,
                "se_iie": self.se_iie,
                "ci_ide": list(self.ci_ide),
                "ci_iie": list(self.ci_iie),
                "p_ide": self.p_ide,
                "p_iie": self.p_iie,
                "level": self.level,
                "psi_1_g1": self.psi_1_g1,
                "psi_1_g0": self.psi_1_g0,
                "psi_0_g0": self.psi_0_g0,
            },
            "sensitivity": {
                "baseline_risk": self.baseline_risk,
                "rr_point": self.rr_point,
                "evalue_point": self.evalue_point,
                "evalue_ci": self.evalue_ci,
            },
            "diagnostics": {
                "n_used": self.n_used,
                "k_folds": self.k_folds,
                "seed": self.seed,
                "n_clipped_propensity": self.n_clipped_propensity,
                "n_clipped_ratio": self.n_clipped_ratio,
                "positivity_warning": self.positivity_warning,
                "means_in_unit_interval": self.means_in_unit_interval,
            },
            "learner_config": dict(self.learner_config),
            "assumptions": dict(self.assumptions) if self.assumptions else None,
        }


def cross_fit_estimate(dataset: AuditDataset, dag: CreditDag | None = None,
                       config: EstimatorConfig | None = None) -> MediationEstimate:
    """Full cross-fitting pipeline: fold partition, per-fold nuisance
    training on complements, per-unit plug-in plus augmentation, Wald CIs
    from the influence-value variance, and E-values for the direct effect.
    """
    config = config or EstimatorConfig()
    assumptions = validate_dag(dag).to_dict() if dag is not None else None
    folds = assign_folds(dataset, config.k, config.seed)
    nuisances = fit_nuisances(dataset, folds, config.nuisance)
    means = aipw_means(dataset, nuisances, folds, config.d_draws, seed=config.seed)

    ide, iie = means.ide, means.iie
    inf_ide = means.influence_ide()
    inf_iie = means.influence_iie()
    lo_d, hi_d, se_ide = wald_ci(ide, inf_ide, config.level)
    lo_i, hi_i, se_iie = wald_ci(iie, inf_iie, config.level)

    baseline = means.psi_0_g0
    rr_point = evalue_point = evalue_ci = None
    if 0.0 < baseline < 1.0 and 0.0 < baseline + ide < 1.0:
        rr_point = sens.rr_from_risk_difference(ide, baseline)
        evalue_point = sens.e_value(rr_point)
        bound = lo_d if ide >= 0 else hi_d
        if 0.0 < baseline + bound < 1.0:
            rr_bound = sens.rr_from_risk_difference(bound, baseline)
            crosses_null = (rr_point - 1.0) * (rr_bound - 1.0) <= 0.0
            evalue_ci = 1.0 if crosses_null else sens.e_value(rr_bound)

    n = dataset.n
    n_clipped = means.n_clipped_propensity + means.n_clipped_ratio
    a = dataset.a
    raw_gap = float(dataset.y[a == 1].mean() - dataset.y[a == 0].mean())
    return MediationEstimate(
        ide=ide,
        iie=iie,
        total_contrast=ide + iie,
        se_ide=se_ide,
        se_iie=se_iie,
        ci_ide=(lo_d, hi_d),
        ci_iie=(lo_i, hi_i),
        p_ide=_p_value(ide, se_ide),
        p_iie=_p_value(iie, se_iie),
        level=config.level,
        n_used=n,
        k_folds=config.k,
        seed=config.seed,
        learner_config=config.to_dict(),
        influence_ide=inf_ide,
        influence_iie=inf_iie,
        psi_1_g1=means.psi_1_g1,
        psi_1_g0=means.psi_1_g0,
        psi_0_g0=means.psi_0_g0,
        raw_gap=raw_gap,
        baseline_risk=baseline,
        evalue_point=evalue_point,
        evalue_ci=evalue_ci,
        rr_point=rr_point,
        n_clipped_propensity=means.n_clipped_propensity,
        n_clipped_ratio=means.n_clipped_ratio,
        positivity_warning=n_clipped > config.positivity_warn_share * n,
        means_in_unit_interval=means.means_in_unit_interval(),
        assumptions=assumptions,
    )
