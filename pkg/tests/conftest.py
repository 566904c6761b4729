"""Shared fixtures: exact-population nuisance stand-ins and deliberately
broken ones for the double-robustness scenarios."""

from __future__ import annotations

import numpy as np
import pytest

from fairdecomp import oracle
from fairdecomp._rng import index_draw_matrix
from fairdecomp.dataset import AuditDataset, FoldAssignment
from fairdecomp.nuisance import (
    NuisanceConfig,
    NuisanceSet,
    fit_fold_models,
    fit_logistic,
)


@pytest.fixture(scope="session")
def preset_truth():
    scm = oracle.preset_scm("monotone-small")
    return scm, oracle.oracle_effects(scm)


def _m_strides(m_cards):
    strides = [1] * len(m_cards)
    for j in range(len(m_cards) - 2, -1, -1):
        strides[j] = strides[j + 1] * m_cards[j + 1]
    return np.array(strides, dtype=np.int64)


def m_state_index(m: np.ndarray, m_cards) -> np.ndarray:
    return (np.asarray(m, dtype=np.int64) @ _m_strides(m_cards)).astype(np.int64)


class TrueOutcome:
    """Exact observable regression mu(a, m, w) read off the SCM tables."""

    def __init__(self, scm: oracle.ScmSpec):
        self.table = oracle.outcome_regression(scm)  # (2, W, M)
        self.m_cards = scm.m_cards

    def predict(self, a, m, w):
        midx = m_state_index(m, self.m_cards)
        widx = np.asarray(w, dtype=np.int64).ravel() if np.ndim(w) == 1 else np.asarray(
            w[:, 0], dtype=np.int64
        )
        if np.isscalar(a):
            return self.table[int(a), widx, midx]
        aidx = np.asarray(a, dtype=np.int64)
        return self.table[aidx, widx, midx]


class TruePropensity:
    def __init__(self, scm: oracle.ScmSpec):
        self.p = np.asarray(scm.p_a1_w)

    def predict(self, w):
        return self.p[np.asarray(w[:, 0], dtype=np.int64)]


class TrueRatio:
    def __init__(self, scm: oracle.ScmSpec):
        self.table = oracle.true_density_ratio(scm)  # (W, M)
        self.m_cards = scm.m_cards

    def ratio(self, m, w):
        midx = m_state_index(m, self.m_cards)
        widx = np.asarray(w[:, 0], dtype=np.int64)
        return self.table[widx, midx]


class TrueSampler:
    """Exact conditional sampler from G_a(m | w) with counter-based draws."""

    def __init__(self, scm: oracle.ScmSpec):
        self.cdf = np.cumsum(oracle.mediator_law(scm), axis=-1)  # (2, W, M)
        self.states = scm.states().astype(np.float64)

    def sample_matrix(self, w, arm, d, keys):
        widx = np.asarray(w[:, 0], dtype=np.int64)
        uniforms = index_draw_matrix(keys, d, 2**53) / float(2**53)
        rows = self.cdf[arm, widx]  # (n, M)
        idx = (uniforms[:, :, None] > rows[:, None, :]).sum(axis=2)
        idx = np.minimum(idx, rows.shape[1] - 1)
        return self.states[idx]


def true_nuisances(scm: oracle.ScmSpec, folds: FoldAssignment,
                   config: NuisanceConfig | None = None) -> NuisanceSet:
    config = config or NuisanceConfig()
    models = {}
    for k in range(1, folds.k + 1):
        models[k] = _FoldStub(
            mu=TrueOutcome(scm),
            pi=TruePropensity(scm),
            ratio=TrueRatio(scm),
            sampler=TrueSampler(scm),
            train_index=folds.train_index(k),
        )
    return NuisanceSet(folds=models, config=config)


class _FoldStub:
    def __init__(self, mu, pi, ratio, sampler, train_index):
        self.mu = mu
        self.pi = pi
        self.ratio = ratio
        self.sampler = sampler
        self.train_index = np.asarray(train_index, dtype=np.int64)


class WOnlyOutcome:
    """Deliberately misspecified mu-hat: fitted on W only, blind to (a, m)."""

    def __init__(self, model):
        self.model = model

    def predict(self, a, m, w):
        return self.model.predict_proba(np.asarray(w, dtype=np.float64))


class ConstantPropensity:
    def __init__(self, rate: float):
        self.rate = float(rate)

    def predict(self, w):
        return np.full(len(w), self.rate)


class UnitRatio:
    def ratio(self, m, w):
        return np.ones(len(m))


def broken_mu_nuisances(dataset: AuditDataset, folds: FoldAssignment,
                        config: NuisanceConfig | None = None) -> NuisanceSet:
    """Scenario: outcome model broken, propensity and ratio standard."""
    config = config or NuisanceConfig()
    models = {}
    for k in range(1, folds.k + 1):
        idx = folds.train_index(k)
        fm = fit_fold_models(dataset, idx, config)
        fm.mu = WOnlyOutcome(fit_logistic(dataset.w[idx], dataset.y[idx]))
        models[k] = fm
    return NuisanceSet(folds=models, config=config)


def broken_pi_r_nuisances(dataset: AuditDataset, folds: FoldAssignment,
                          config: NuisanceConfig | None = None) -> NuisanceSet:
    """Scenario: propensity and ratio broken, outcome model standard."""
    config = config or NuisanceConfig()
    models = {}
    for k in range(1, folds.k + 1):
        idx = folds.train_index(k)
        fm = fit_fold_models(dataset, idx, config)
        fm.pi = ConstantPropensity(dataset.a[idx].mean())
        fm.ratio = UnitRatio()
        models[k] = fm
    return NuisanceSet(folds=models, config=config)


def ipw_only_ide(dataset: AuditDataset, nuisances: NuisanceSet,
                 folds: FoldAssignment) -> float:
    """Weighting-only direct-effect estimate (no outcome model)."""
    lo, hi = nuisances.config.prob_clip
    psi10 = np.zeros(dataset.n)
    psi00 = np.zeros(dataset.n)
    for k in range(1, folds.k + 1):
        idx = folds.eval_index(k)
        models = nuisances.folds[k]
        w = dataset.w[idx]
        m = dataset.m[idx]
        a = dataset.a[idx]
        y = dataset.y[idx]
        pi1 = np.clip(models.pi.predict(w), lo, hi)
        r = models.ratio.ratio(m, w)
        psi10[idx] = a * y / pi1 / r
        psi00[idx] = (1.0 - a) * y / (1.0 - pi1)
    return float(psi10.mean() - psi00.mean())
