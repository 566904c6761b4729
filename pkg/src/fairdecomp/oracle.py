"""Exact discrete structural-model oracle for validating the estimators.

An `ScmSpec` fully enumerates a discrete model over (W, U, A, M, Y) with U
unmeasured and independent of A given W by construction. `oracle_effects`
computes everything by summation over states. Natural effects couple the
mediator draw and the outcome response through shared (W, U); cross-world
joints of (M(0), M(1)), when needed conceptually, are comonotone through a
shared uniform, which leaves all reported means unchanged by linearity.
Interventional effects draw the mediator from the U-marginal law
G_a(m | w) independently of the unit's own U, and average the outcome
response over the U prior.

The identification integrals (observable mu integrated against G_a) agree
with these causal values only when the unmeasured tilt P(u | a, m, w)
cancels out of both integrals. The random generators below construct
models inside that identifiable subclass, with U -> M and U -> Y edges
still active: the arm-1 mediator law does not load on U, and the arm-0
outcome table is additive in U. `effects_from_observable_law` then
reproduces the oracle exactly, which is the executable form of the
identification result, while arbitrary hand-built tables can and do fall
outside the subclass.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import AuditDataset

_TABLE_TOL = 1e-12


def m_state_table(m_cards: tuple[int, ...]) -> np.ndarray:
    """All joint mediator states as an (n_states, p) integer matrix."""
    return np.array(list(itertools.product(*[range(c) for c in m_cards])), dtype=np.int64)


@dataclass(frozen=True)
class ScmSpec:
    """Fully enumerable discrete structural causal model.

    Table axes: p_w (W,), p_u (U,), p_a1_w (W,), p_m_awu (2, W, U, M) over
    joint mediator states, p_y1_amwu (2, M, W, U). U has no parents and no
    edge into A, so the treatment-vs-mediator and treatment-vs-outcome
    ignorability conditions hold by construction while U -> M and U -> Y
    edges may still be present.
    """

    w_card: int
    u_card: int
    m_cards: tuple[int, ...]
    p_w: np.ndarray
    p_u: np.ndarray
    p_a1_w: np.ndarray
    p_m_awu: np.ndarray
    p_y1_amwu: np.ndarray
    monotone_in_m: bool = False
    stochastic_dominance: bool = False
    name: str = "scm"

    def __post_init__(self):
        object.__setattr__(self, "m_cards", tuple(int(c) for c in self.m_cards))
        for attr in ("p_w", "p_u", "p_a1_w", "p_m_awu", "p_y1_amwu"):
            arr = np.asarray(getattr(self, attr), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def n_m_states(self) -> int:
        return int(np.prod(self.m_cards))

    @property
    def n_mediators(self) -> int:
        return len(self.m_cards)

    def states(self) -> np.ndarray:
        return m_state_table(self.m_cards)

    def validate(self) -> None:
        """Check table shapes, normalization, and the declared flags."""
        W, U, M = self.w_card, self.u_card, self.n_m_states
        if self.p_w.shape != (W,) or self.p_u.shape != (U,) or self.p_a1_w.shape != (W,):
            raise ValueError("marginal table shapes do not match cardinalities")
        if self.p_m_awu.shape != (2, W, U, M):
            raise ValueError(f"p_m_awu must have shape (2, {W}, {U}, {M})")
        if self.p_y1_amwu.shape != (2, M, W, U):
            raise ValueError(f"p_y1_amwu must have shape (2, {M}, {W}, {U})")
        for name, arr in (("p_w", self.p_w), ("p_u", self.p_u)):
            if abs(arr.sum() - 1.0) > _TABLE_TOL or (arr < 0).any():
                raise ValueError(f"{name} is not a probability vector")
        if ((self.p_a1_w <= 0) | (self.p_a1_w >= 1)).any():
            raise ValueError("p_a1_w must lie strictly inside (0, 1) (positivity)")
        sums = self.p_m_awu.sum(axis=-1)
        if (np.abs(sums - 1.0) > _TABLE_TOL).any() or (self.p_m_awu < 0).any():
            raise ValueError("p_m_awu rows must sum to 1 with nonnegative entries")
        if ((self.p_y1_amwu < 0) | (self.p_y1_amwu > 1)).any():
            raise ValueError("p_y1_amwu entries must lie in [0, 1]")
        if self.monotone_in_m:
            self._scan_monotone()
        if self.stochastic_dominance:
            self._scan_dominance()

    def _scan_monotone(self) -> None:
        """Exhaustive scan: P(Y=1 | a, m, w, u) non-decreasing in each
        mediator component."""
        states = self.states()
        strides = _strides(self.m_cards)
        for j, card in enumerate(self.m_cards):
            movable = states[:, j] < card - 1
            idx = np.flatnonzero(movable)
            nbr = idx + strides[j]
            diff = self.p_y1_amwu[:, nbr, :, :] - self.p_y1_amwu[:, idx, :, :]
            if (diff < -_TABLE_TOL).any():
                raise ValueError(f"outcome table not monotone in mediator component {j}")

    def _scan_dominance(self) -> None:
        """Per (w, u, component): marginal CDF under a=1 lies at or below the
        CDF under a=0 (sufficient for joint dominance of the product /
        mixture laws this package generates)."""
        states = self.states()
        for j, card in enumerate(self.m_cards):
            onehot = np.zeros((self.n_m_states, card))
            onehot[np.arange(self.n_m_states), states[:, j]] = 1.0
            marg = np.einsum("awum,mc->awuc", self.p_m_awu, onehot)
            cdf = np.cumsum(marg, axis=-1)
            if (cdf[1] - cdf[0] > _TABLE_TOL).any():
                raise ValueError(f"arm-1 law does not dominate arm-0 in component {j}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "w_card": self.w_card,
            "u_card": self.u_card,
            "m_cards": list(self.m_cards),
            "p_w": self.p_w.tolist(),
            "p_u": self.p_u.tolist(),
            "p_a1_w": self.p_a1_w.tolist(),
            "p_m_awu": self.p_m_awu.tolist(),
            "p_y1_amwu": self.p_y1_amwu.tolist(),
            "monotone_in_m": self.monotone_in_m,
            "stochastic_dominance": self.stochastic_dominance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "ScmSpec":
        return cls(
            w_card=int(obj["w_card"]),
            u_card=int(obj["u_card"]),
            m_cards=tuple(obj["m_cards"]),
            p_w=np.array(obj["p_w"]),
            p_u=np.array(obj["p_u"]),
            p_a1_w=np.array(obj["p_a1_w"]),
            p_m_awu=np.array(obj["p_m_awu"]),
            p_y1_amwu=np.array(obj["p_y1_amwu"]),
            monotone_in_m=bool(obj.get("monotone_in_m", False)),
            stochastic_dominance=bool(obj.get("stochastic_dominance", False)),
            name=obj.get("name", "scm"),
        )

    @classmethod
    def load(cls, path) -> "ScmSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _strides(m_cards: tuple[int, ...]) -> list[int]:
    strides = [1] * len(m_cards)
    for j in range(len(m_cards) - 2, -1, -1):
        strides[j] = strides[j + 1] * m_cards[j + 1]
    return strides


@dataclass(frozen=True)
class OracleEffects:
    """Exact effect values plus the intermediate potential-outcome means."""

    te: float
    nde: float
    nie: float
    ide: float
    iie: float
    mean_y_natural: dict[str, float] = field(default_factory=dict)
    mean_y_interventional: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "te": self.te,
            "nde": self.nde,
            "nie": self.nie,
            "ide": self.ide,
            "iie": self.iie,
            "mean_y_natural": dict(self.mean_y_natural),
            "mean_y_interventional": dict(self.mean_y_interventional),
        }


def mediator_law(scm: ScmSpec) -> np.ndarray:
    """G_a(m | w) = sum_u P(u) P(m | a, w, u); shape (2, W, M)."""
    return np.einsum("u,awum->awm", scm.p_u, scm.p_m_awu)


def outcome_regression(scm: ScmSpec) -> np.ndarray:
    """Observable mu(a, m, w) = P(Y=1 | A=a, M=m, W=w); shape (2, W, M).

    This marginalizes U against its conditional law given (A, M, W), which
    is what any regression fit to observed data converges to.
    """
    g = mediator_law(scm)
    num = np.einsum("u,awum,amwu->awm", scm.p_u, scm.p_m_awu, scm.p_y1_amwu)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(g > 0, num / np.where(g > 0, g, 1.0), 0.0)
    return mu


def true_density_ratio(scm: ScmSpec) -> np.ndarray:
    """r(m, w) = G_1(m|w) / G_0(m|w); shape (W, M)."""
    g = mediator_law(scm)
    with np.errstate(divide="ignore"):
        return np.where(g[0] > 0, g[1] / np.where(g[0] > 0, g[0], 1.0), np.inf)


def _natural_mean(scm: ScmSpec, a_outcome: int, a_mediator: int) -> float:
    """E[Y(a, M(a'))]: mediator draw and outcome response share (W, U)."""
    return float(
        np.einsum(
            "w,u,wum,mwu->",
            scm.p_w,
            scm.p_u,
            scm.p_m_awu[a_mediator],
            scm.p_y1_amwu[a_outcome],
        )
    )


def oracle_effects(scm: ScmSpec) -> OracleEffects:
    """All five effects by exhaustive summation over (W, U, M) states.

    For the interventional means E[Y(a, M*)], the mediator M* is drawn
    from the marginal G_g(m | w) independently of the unit's own U, and
    the outcome response averages over the U prior.
    """
    g = mediator_law(scm)
    # U-prior outcome response: qbar(a, w, m) = sum_u P(u) P(Y=1 | a,m,w,u).
    qbar = np.einsum("u,amwu->awm", scm.p_u, scm.p_y1_amwu)

    y11 = _natural_mean(scm, 1, 1)
    y10 = _natural_mean(scm, 1, 0)
    y00 = _natural_mean(scm, 0, 0)
    nde = y10 - y00
    nie = y11 - y10
    te = y11 - y00

    psi = {
        (a, garm): float(np.einsum("w,wm,wm->", scm.p_w, g[garm], qbar[a]))
        for a, garm in ((1, 1), (1, 0), (0, 0))
    }
    ide = psi[(1, 0)] - psi[(0, 0)]
    iie = psi[(1, 1)] - psi[(1, 0)]

    return OracleEffects(
        te=te,
        nde=nde,
        nie=nie,
        ide=ide,
        iie=iie,
        mean_y_natural={"y(1,m(1))": y11, "y(1,m(0))": y10, "y(0,m(0))": y00},
        mean_y_interventional={
            "y(1,g1)": psi[(1, 1)],
            "y(1,g0)": psi[(1, 0)],
            "y(0,g0)": psi[(0, 0)],
        },
    )


def observable_law(scm: ScmSpec) -> np.ndarray:
    """Joint P(W, A, M, Y) with U marginalized out; shape (W, 2, M, 2)."""
    g = mediator_law(scm)  # (2, W, M)
    joint_y1 = np.einsum("u,awum,amwu->awm", scm.p_u, scm.p_m_awu, scm.p_y1_amwu)
    p_a = np.stack([1.0 - scm.p_a1_w, scm.p_a1_w])  # (2, W)
    law = np.empty((scm.w_card, 2, scm.n_m_states, 2))
    for a in (0, 1):
        base = scm.p_w[:, None] * p_a[a][:, None]
        law[:, a, :, 1] = base * joint_y1[a]
        law[:, a, :, 0] = base * (g[a] - joint_y1[a])
    return law


def effects_from_observable_law(law: np.ndarray) -> tuple[float, float]:
    """IDE and IIE computed from P(W, A, M, Y) alone.

    The three identification steps on the coarsened law: regress
    mu(a,m,w) = P(Y=1 | a,m,w), read off F(m | a,w), then integrate. Must
    reproduce `oracle_effects` exactly; this is the executable form of the
    identification result.
    """
    p_amw = law.sum(axis=-1)  # (W, 2, M)
    p_aw = p_amw.sum(axis=-1)  # (W, 2)
    p_w = p_aw.sum(axis=-1)  # (W,)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(p_amw > 0, law[..., 1] / np.where(p_amw > 0, p_amw, 1.0), 0.0)
        f = p_amw / np.where(p_aw > 0, p_aw, 1.0)[:, :, None]
    ide = float(np.einsum("w,wm,wm->", p_w, f[:, 0, :], mu[:, 1, :] - mu[:, 0, :]))
    iie = float(np.einsum("w,wm,wm->", p_w, f[:, 1, :] - f[:, 0, :], mu[:, 1, :]))
    return ide, iie


def generate_dataset(scm: ScmSpec, n: int, seed: int) -> AuditDataset:
    """Draw n i.i.d. units by ancestral sampling. U is drawn but not
    emitted (it is unmeasured by construction)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    w_idx = rng.choice(scm.w_card, size=n, p=scm.p_w)
    u_idx = rng.choice(scm.u_card, size=n, p=scm.p_u)
    a = (rng.random(n) < scm.p_a1_w[w_idx]).astype(np.float64)
    a_idx = a.astype(np.int64)

    cdf_m = np.cumsum(scm.p_m_awu, axis=-1)
    m_idx = np.empty(n, dtype=np.int64)
    r = rng.random(n)
    chunk = 200_000
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        rows = cdf_m[a_idx[lo:hi], w_idx[lo:hi], u_idx[lo:hi]]
        m_idx[lo:hi] = (r[lo:hi, None] > rows).sum(axis=1)
    m_idx = np.minimum(m_idx, scm.n_m_states - 1)

    p_y = scm.p_y1_amwu[a_idx, m_idx, w_idx, u_idx]
    y = (rng.random(n) < p_y).astype(np.float64)
    states = scm.states()
    return AuditDataset(
        w=w_idx[:, None].astype(np.float64),
        a=a,
        m=states[m_idx].astype(np.float64),
        y=y,
        w_names=("w1",),
        m_names=tuple(f"m{j + 1}" for j in range(scm.n_mediators)),
        group_labels=("reference", "protected"),
    )


def _floored_dirichlet(rng: np.random.Generator, size: int, floor: float = 5e-3) -> np.ndarray:
    p = rng.dirichlet(np.ones(size))
    p = p + floor
    return p / p.sum()


def random_scm(
    seed: int,
    w_card: int = 2,
    u_card: int = 2,
    m_cards: tuple[int, ...] = (2, 3),
) -> ScmSpec:
    """Random tables from the identifiable subclass (full support).

    U -> M is active under arm 0 (per-u mediator tables) and U -> Y under
    both arms, so the sequential-ignorability mediator condition is
    genuinely violated. Two structural restrictions keep the mediator-swap
    functionals identified: the arm-1 mediator law does not load on U, and
    the arm-0 outcome table is additive in U (arm 1 is unrestricted).
    """
    rng = np.random.default_rng(seed)
    M = int(np.prod(m_cards))
    p_m = np.empty((2, w_card, u_card, M))
    for w in range(w_card):
        arm1 = _floored_dirichlet(rng, M)
        for u in range(u_card):
            p_m[0, w, u] = _floored_dirichlet(rng, M)
            p_m[1, w, u] = arm1
    p_y = np.empty((2, M, w_card, u_card))
    f0 = rng.uniform(0.05, 0.55, size=(M, w_card))
    s = rng.uniform(0.0, 0.4, size=(w_card, u_card))
    p_y[0] = f0[:, :, None] + s[None, :, :]
    p_y[1] = rng.uniform(0.02, 0.98, size=(M, w_card, u_card))
    spec = ScmSpec(
        w_card=w_card,
        u_card=u_card,
        m_cards=tuple(m_cards),
        p_w=_floored_dirichlet(rng, w_card),
        p_u=_floored_dirichlet(rng, u_card),
        p_a1_w=rng.uniform(0.1, 0.9, size=w_card),
        p_m_awu=p_m,
        p_y1_amwu=p_y,
        name=f"random-{seed}",
    )
    spec.validate()
    return spec


def random_monotone_scm(
    seed: int,
    w_card: int = 2,
    u_card: int = 3,
    m_cards: tuple[int, ...] = (3, 3),
) -> ScmSpec:
    """Random model satisfying the monotone-response and dominance flags.

    Construction (all pieces drawn from the seed):
      * d(u): sorted increasing values in [0, 1] orders the unmeasured
        states by severity.
      * Mediators are conditionally independent given (a, w, u). Arm-0
        component CDFs are F**(1 + s*d(u)) (stochastically increasing in
        u); arm-1 uses F**(1 + s + t) with t > 0, so it dominates every
        arm-0 law and does not depend on u.
      * P(Y=1 | a, m, w, u) = c + g*d(u) + (b + a*k*d(u))*Phi_w(m)
        + a*e*Psi_w(m) with k, e >= 0 and Phi, Psi nonnegative
        nondecreasing index functions of m.

    Under this structure both bound gaps equal
    sum_w P(w) * k_w * Cov_u(d(u), E[Phi_w(M) | a=0, w, u]) >= 0, so the
    interventional effects bound the natural ones on every draw: the
    direct-effect bound is conservative from below, and the indirect bound
    from above. Because the arm-0 outcome is additive in U and the arm-1
    mediator law does not load on U, the family also sits inside the
    identifiable subclass (the observable-law integrals reproduce the
    oracle exactly).
    """
    if max(m_cards) > 5 or w_card > 5 or u_card > 5:
        raise ValueError("cardinalities are capped at 5 per variable")
    rng = np.random.default_rng(seed)
    M = int(np.prod(m_cards))
    states = m_state_table(tuple(m_cards))
    delta = np.sort(rng.uniform(0.0, 1.0, size=u_card))
    if u_card > 1:
        delta = (delta - delta[0]) / max(delta[-1] - delta[0], 1e-9)

    p_m = np.empty((2, w_card, u_card, M))
    for w in range(w_card):
        pmf0 = np.ones((u_card, M))
        pmf1 = np.ones(M)
        for j, card in enumerate(m_cards):
            base = _floored_dirichlet(rng, card, floor=0.05)
            cdf = np.cumsum(base)
            cdf[-1] = 1.0
            s = rng.uniform(0.5, 2.0)
            t = rng.uniform(0.5, 2.0)
            comp1 = np.diff(np.concatenate([[0.0], cdf ** (1.0 + s + t)]))
            pmf1 *= comp1[states[:, j]]
            for u in range(u_card):
                comp0 = np.diff(np.concatenate([[0.0], cdf ** (1.0 + s * delta[u])]))
                pmf0[u] *= comp0[states[:, j]]
        p_m[0, w] = pmf0
        p_m[1, w] = pmf1[None, :]

    p_y = np.empty((2, M, w_card, u_card))
    for w in range(w_card):
        weights = rng.uniform(0.2, 1.0, size=len(m_cards))
        phi = states @ weights
        phi = phi / max(phi.max(), 1e-12)
        weights2 = rng.uniform(0.2, 1.0, size=len(m_cards))
        psi = states @ weights2
        psi = psi / max(psi.max(), 1e-12)
        raw = rng.uniform(0.1, 1.0, size=5)  # c, g, b, k, e
        raw *= rng.uniform(0.75, 0.95) / raw.sum()
        c, gcoef, bcoef, kcoef, ecoef = raw
        for a in (0, 1):
            # (M, U) table: c + g*d(u) + (b + a*k*d(u))*phi(m) + a*e*psi(m).
            # The m-by-u interaction lives on arm 1 only; arm 0 stays
            # additive in u, which keeps the family identifiable.
            q = (
                c
                + gcoef * delta[None, :]
                + (bcoef + a * kcoef * delta[None, :]) * phi[:, None]
                + a * ecoef * psi[:, None]
            )
            p_y[a, :, w, :] = q

    spec = ScmSpec(
        w_card=w_card,
        u_card=u_card,
        m_cards=tuple(m_cards),
        p_w=_floored_dirichlet(rng, w_card, floor=0.05),
        p_u=_floored_dirichlet(rng, u_card, floor=0.05),
        p_a1_w=rng.uniform(0.15, 0.85, size=w_card),
        p_m_awu=p_m,
        p_y1_amwu=p_y,
        monotone_in_m=True,
        stochastic_dominance=True,
        name=f"monotone-{seed}",
    )
    spec.validate()
    return spec


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def preset_scm(name: str) -> ScmSpec:
    """Named simulation presets used by the CLI and the validation suite."""
    if name == "monotone-small":
        # Binary W, two conditionally independent binary mediators, U
        # degenerate, every structural link exactly logistic with main
        # effects only: logistic nuisance models are well-specified.
        w_card, m_cards = 2, (2, 2)
        states = m_state_table(m_cards)
        M = len(states)
        p_a1_w = _sigmoid([-2.0, -0.8])
        med_coef = ((-0.8, 1.0, 0.5), (-0.3, 0.8, -0.4))  # (b0, b_a, b_w) per mediator
        p_m = np.empty((2, w_card, 1, M))
        for a in (0, 1):
            for w in range(w_card):
                probs1 = [_sigmoid(b0 + ba * a + bw * w) for b0, ba, bw in med_coef]
                joint = np.ones(M)
                for j, p1 in enumerate(probs1):
                    joint *= np.where(states[:, j] == 1, p1, 1.0 - p1)
                p_m[a, w, 0] = joint
        c0, ca, c1, c2, cw = -2.2, 0.35, 0.9, 0.7, 0.5
        p_y = np.empty((2, M, w_card, 1))
        for a in (0, 1):
            for w in range(w_card):
                p_y[a, :, w, 0] = _sigmoid(
                    c0 + ca * a + c1 * states[:, 0] + c2 * states[:, 1] + cw * w
                )
        spec = ScmSpec(
            w_card=w_card,
            u_card=1,
            m_cards=m_cards,
            p_w=np.array([0.5, 0.5]),
            p_u=np.array([1.0]),
            p_a1_w=np.asarray(p_a1_w),
            p_m_awu=p_m,
            p_y1_amwu=p_y,
            monotone_in_m=True,
            stochastic_dominance=True,
            name="monotone-small",
        )
        spec.validate()
        return spec
    if name == "confounded-small":
        return random_monotone_scm(seed=7)
    raise ValueError(f"unknown preset {name!r}; available: monotone-small, confounded-small")
