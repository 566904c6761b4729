"""Nuisance learners: outcome regression, propensity score, classifier-based
mediator density ratio, and the donor-pool conditional mediator sampler.

All learners are numpy-only and deterministic. Fitted objects are immutable
in use and safe for concurrent scoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import index_draw_matrix, substream
from .dataset import AuditDataset, FoldAssignment
from .errors import EmptyPool, NonFiniteInput


def _check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteInput(f"{name} contains NaN or infinite values")
    return arr


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# Logistic regression (ridge-penalized IRLS)
# ---------------------------------------------------------------------------


def logistic_penalized_nll(params: np.ndarray, features: np.ndarray, labels: np.ndarray,
                           l2_penalty: float) -> float:
    """Mean negative log-likelihood plus 0.5 * l2 * ||params||^2.

    params[0] is the intercept; the penalty covers it too, which keeps the
    objective coercive under separation.
    """
    s = params[0] + features @ params[1:]
    nll = float(np.mean(np.logaddexp(0.0, s) - labels * s))
    return nll + 0.5 * l2_penalty * float(params @ params)


def logistic_penalized_grad(params: np.ndarray, features: np.ndarray, labels: np.ndarray,
                            l2_penalty: float) -> np.ndarray:
    s = params[0] + features @ params[1:]
    resid = _sigmoid(s) - labels
    grad = np.empty_like(params)
    grad[0] = resid.mean()
    grad[1:] = features.T @ resid / len(labels)
    return grad + l2_penalty * params


@dataclass
class LogisticModel:
    """Ridge-penalized logistic fit on internally standardized features."""

    coefficients: np.ndarray  # original feature scale
    intercept: float
    l2_penalty: float
    converged: bool
    iterations: int
    feature_mean: np.ndarray
    feature_std: np.ndarray
    z_params: np.ndarray  # (intercept, coefs) in standardized space

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        features = _check_finite("features", features)
        z = (features - self.feature_mean) / self.feature_std
        p = _sigmoid(self.z_params[0] + z @ self.z_params[1:])
        return np.clip(p, 1e-12, 1.0 - 1e-12)

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.feature_mean) / self.feature_std

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "l2_penalty": self.l2_penalty,
            "converged": self.converged,
            "iterations": self.iterations,
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
        }


def fit_logistic(features: np.ndarray, labels: np.ndarray, l2_penalty: float = 1e-4,
                 tol: float = 1e-8, max_iter: int = 100) -> LogisticModel:
    """Newton/IRLS fit of the ridge-penalized logistic objective.

    Stops when the gradient norm drops to `tol`; reports converged=False
    instead of raising if max_iter is exhausted.
    """
    X = _check_finite("features", features)
    y = _check_finite("labels", labels).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if l2_penalty < 0:
        raise ValueError("l2_penalty must be nonnegative")
    n, d = X.shape
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    Z = (X - mean) / std

    params = np.zeros(d + 1)
    nll = logistic_penalized_nll(params, Z, y, l2_penalty)
    converged = False
    iterations = 0
    eye = np.eye(d + 1)
    Z1 = np.hstack([np.ones((n, 1)), Z])
    for iterations in range(1, max_iter + 1):
        grad = logistic_penalized_grad(params, Z, y, l2_penalty)
        if float(np.linalg.norm(grad)) <= tol:
            converged = True
            iterations -= 1
            break
        p = _sigmoid(Z1 @ params)
        wdiag = np.maximum(p * (1.0 - p), 1e-10)
        hess = (Z1.T * wdiag) @ Z1 / n + l2_penalty * eye
        step = np.linalg.solve(hess, grad)
        # Backtrack if a full Newton step overshoots.
        scale = 1.0
        for _ in range(30):
            candidate = params - scale * step
            new_nll = logistic_penalized_nll(candidate, Z, y, l2_penalty)
            if new_nll <= nll + 1e-14:
                break
            scale *= 0.5
        params = params - scale * step
        nll = logistic_penalized_nll(params, Z, y, l2_penalty)
    else:
        iterations = max_iter
    if not converged:
        grad = logistic_penalized_grad(params, Z, y, l2_penalty)
        converged = float(np.linalg.norm(grad)) <= tol

    coef = params[1:] / std
    intercept = float(params[0] - (params[1:] * mean / std).sum())
    return LogisticModel(
        coefficients=coef,
        intercept=intercept,
        l2_penalty=l2_penalty,
        converged=converged,
        iterations=iterations,
        feature_mean=mean,
        feature_std=std,
        z_params=params,
    )


# ---------------------------------------------------------------------------
# Gradient-boosted trees (binned greedy splits, Newton leaf values)
# ---------------------------------------------------------------------------


@dataclass
class RegressionTree:
    """Axis-aligned binary tree stored as flat arrays (preorder)."""

    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray  # go left when x[feature] < threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.flatnonzero(active)
            goes_left = X[rows, feat[rows]] < self.threshold[node[rows]]
            node[rows] = np.where(goes_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]

    @property
    def max_path_splits(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        out = 0
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
            else:
                out = max(out, int(depth[i]))
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }


def _bin_columns(X: np.ndarray, max_bins: int) -> tuple[np.ndarray, list[np.ndarray]]:
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.int64)
    edges_list: list[np.ndarray] = []
    grid = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    for j in range(d):
        col = X[:, j]
        uniq = np.unique(col)
        if len(uniq) <= max_bins:
            edges = (uniq[1:] + uniq[:-1]) / 2.0 if len(uniq) > 1 else np.empty(0)
        else:
            edges = np.unique(np.quantile(col, grid))
        codes[:, j] = np.searchsorted(edges, col, side="right")
        edges_list.append(edges)
    return codes, edges_list


def _grow_tree(codes: np.ndarray, edges_list: list[np.ndarray], g: np.ndarray, h: np.ndarray,
               max_depth: int, min_samples_leaf: int, reg_lambda: float) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def leaf(idx: np.ndarray) -> int:
        node = len(feature)
        gsum, hsum = g[idx].sum(), h[idx].sum()
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.clip(gsum / (hsum + reg_lambda), -4.0, 4.0)))
        return node

    def grow(idx: np.ndarray, depth: int) -> int:
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf:
            return leaf(idx)
        gsum, hsum = g[idx].sum(), h[idx].sum()
        parent_score = gsum * gsum / (hsum + reg_lambda)
        best_gain, best_j, best_bin = 1e-12, -1, -1
        for j in range(codes.shape[1]):
            nbins = len(edges_list[j]) + 1
            if nbins < 2:
                continue
            cj = codes[idx, j]
            cnt = np.bincount(cj, minlength=nbins)
            gh = np.bincount(cj, weights=g[idx], minlength=nbins)
            hh = np.bincount(cj, weights=h[idx], minlength=nbins)
            cl = np.cumsum(cnt)[:-1]
            gl = np.cumsum(gh)[:-1]
            hl = np.cumsum(hh)[:-1]
            cr = len(idx) - cl
            ok = (cl >= min_samples_leaf) & (cr >= min_samples_leaf)
            if not ok.any():
                continue
            gr = gsum - gl
            hr = hsum - hl
            gains = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_score
            gains = np.where(ok, gains, -np.inf)
            b = int(np.argmax(gains))
            if gains[b] > best_gain:
                best_gain, best_j, best_bin = float(gains[b]), j, b
        if best_j < 0:
            return leaf(idx)
        node = len(feature)
        feature.append(best_j)
        threshold.append(float(edges_list[best_j][best_bin]))
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        mask = codes[idx, best_j] <= best_bin
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(g)), 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
    )


@dataclass
class BoostedTreesModel:
    """Logit-space additive trees: p = sigmoid(base + lr * sum tree(x))."""

    trees: list[RegressionTree]
    learning_rate: float
    n_estimators: int
    max_depth: int
    base_score: float
    train_loss: np.ndarray  # mean log-loss after each boosting round

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = _check_finite("features", X)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        f = np.full(len(X), self.base_score)
        for tree in self.trees:
            f += self.learning_rate * tree.predict(X)
        return f

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.clip(_sigmoid(self.decision_function(X)), 1e-12, 1.0 - 1e-12)

    def to_dict(self) -> dict:
        return {
            "kind": "boosted_trees",
            "learning_rate": self.learning_rate,
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }


def fit_boosted_trees(features: np.ndarray, labels: np.ndarray, n_estimators: int = 200,
                      max_depth: int = 4, learning_rate: float = 0.1,
                      min_samples_leaf: int = 5, reg_lambda: float = 1.0,
                      max_bins: int = 64) -> BoostedTreesModel:
    """Gradient boosting for a binary target under log-loss.

    Trees are grown greedily on quantile-binned features; leaf values are
    damped Newton steps, so the training loss is non-increasing round over
    round.
    """
    if n_estimators < 1 or max_depth < 1:
        raise ValueError("n_estimators and max_depth must be >= 1")
    X = _check_finite("features", features)
    y = _check_finite("labels", labels).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    codes, edges_list = _bin_columns(X, max_bins)
    ybar = float(np.clip(y.mean(), 1e-4, 1.0 - 1e-4))
    base = float(np.log(ybar / (1.0 - ybar)))
    f = np.full(len(y), base)
    trees: list[RegressionTree] = []
    losses = []
    for _ in range(n_estimators):
        p = _sigmoid(f)
        g = y - p
        h = p * (1.0 - p)
        tree = _grow_tree(codes, edges_list, g, h, max_depth, min_samples_leaf, reg_lambda)
        f += learning_rate * tree.predict(X)
        trees.append(tree)
        pfit = np.clip(_sigmoid(f), 1e-12, 1 - 1e-12)
        losses.append(float(-np.mean(y * np.log(pfit) + (1 - y) * np.log(1 - pfit))))
    return BoostedTreesModel(
        trees=trees,
        learning_rate=learning_rate,
        n_estimators=n_estimators,
        max_depth=max_depth,
        base_score=base,
        train_loss=np.array(losses),
    )


# ---------------------------------------------------------------------------
# Classifier-based mediator density ratio
# ---------------------------------------------------------------------------


@dataclass
class DensityRatioModel:
    """Two-classifier odds ratio for r(m, w) = f(m | A=1, w) / f(m | A=0, w)."""

    joint_classifier: object
    marginal_classifier: object
    clip_epsilon: float
    prob_clip: tuple[float, float] = (0.01, 0.99)

    def ratio(self, m: np.ndarray, w: np.ndarray) -> np.ndarray:
        lo, hi = self.prob_clip
        pj = np.clip(self.joint_classifier.predict_proba(np.hstack([m, w])), lo, hi)
        pm = np.clip(self.marginal_classifier.predict_proba(w), lo, hi)
        raw = (pj / (1.0 - pj)) / (pm / (1.0 - pm))
        return np.clip(raw, self.clip_epsilon, 1.0 / self.clip_epsilon)

    def to_dict(self) -> dict:
        return {
            "kind": "density_ratio",
            "clip_epsilon": self.clip_epsilon,
            "prob_clip": list(self.prob_clip),
            "joint_classifier": self.joint_classifier.to_dict(),
            "marginal_classifier": self.marginal_classifier.to_dict(),
        }


def fit_density_ratio(m: np.ndarray, w: np.ndarray, a: np.ndarray, learner: str = "logistic",
                      clip_epsilon: float = 0.01, prob_clip: tuple[float, float] = (0.01, 0.99),
                      **learner_kwargs) -> DensityRatioModel:
    """Fit P(A=1 | M, W) and P(A=1 | W) and form the ratio of odds."""
    m = _check_finite("m", m)
    w = _check_finite("w", w)
    a = _check_finite("a", a).ravel()
    if not 0.0 < clip_epsilon < 0.5:
        raise ValueError("clip_epsilon must lie in (0, 0.5)")
    joint = _fit_classifier(np.hstack([m, w]), a, learner, **learner_kwargs)
    marginal = _fit_classifier(w, a, learner, **learner_kwargs)
    return DensityRatioModel(
        joint_classifier=joint,
        marginal_classifier=marginal,
        clip_epsilon=clip_epsilon,
        prob_clip=prob_clip,
    )


def _fit_classifier(X: np.ndarray, y: np.ndarray, learner: str, **kwargs):
    if learner == "logistic":
        return fit_logistic(X, y, **kwargs)
    if learner == "gbt":
        return fit_boosted_trees(X, y, **kwargs)
    raise ValueError(f"unknown learner {learner!r}; expected 'logistic' or 'gbt'")


# ---------------------------------------------------------------------------
# Donor-pool conditional mediator sampler
# ---------------------------------------------------------------------------


@dataclass
class MediatorSampler:
    """Cell-empirical sampler for P(M | A=a, W in cell).

    W is cut into per-column quantile cells; cells whose donor pools fall
    below `min_donors` in either arm are merged with the nearest cell by
    standardized centroid distance. Sampling is deterministic given a key.
    """

    column_edges: list[np.ndarray]
    cell_to_pool: dict[int, int]
    centroids: np.ndarray  # (n_pools, q), standardized W space
    pools: tuple[list[np.ndarray], list[np.ndarray]]  # arm -> pool id -> (k, p)
    w_mean: np.ndarray
    w_std: np.ndarray
    min_donors: int
    strategy: str = "cell-empirical"

    def cell_ids(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        ids = np.zeros(len(w), dtype=np.int64)
        for j, edges in enumerate(self.column_edges):
            ids = ids * (len(edges) + 1) + np.searchsorted(edges, w[:, j], side="right")
        return ids

    def pool_assignments(self, w: np.ndarray) -> np.ndarray:
        """Pool id per row; unseen cells fall back to the nearest centroid."""
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        ids = self.cell_ids(w)
        out = np.array([self.cell_to_pool.get(int(c), -1) for c in ids], dtype=np.int64)
        missing = out == -1
        if missing.any():
            z = (w[missing] - self.w_mean) / self.w_std
            d2 = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
            out[missing] = np.argmin(d2, axis=1)
        return out

    def sample_matrix(self, w: np.ndarray, arm: int, d: int, keys: np.ndarray) -> np.ndarray:
        """Draw d mediator vectors per row; shape (len(w), d, p)."""
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        pools = self.pools[arm]
        p = pools[0].shape[1] if pools else 0
        out = np.empty((len(w), d, p))
        if d == 0:
            return out
        assignment = self.pool_assignments(w)
        keys = np.asarray(keys, dtype=np.uint64)
        for pid in np.unique(assignment):
            pool = pools[pid]
            if len(pool) == 0:
                raise EmptyPool(
                    f"donor pool for arm={arm} is empty after merging "
                    f"({len(pools)} pools, min_donors={self.min_donors})"
                )
            rows = np.flatnonzero(assignment == pid)
            idx = index_draw_matrix(keys[rows], d, len(pool))
            out[rows] = pool[idx]
        return out

    def pool_sizes(self) -> list[dict]:
        return [
            {"pool": i, "n_arm0": len(self.pools[0][i]), "n_arm1": len(self.pools[1][i])}
            for i in range(len(self.pools[0]))
        ]

    def to_dict(self) -> dict:
        return {
            "kind": "mediator_sampler",
            "strategy": self.strategy,
            "column_edges": [e.tolist() for e in self.column_edges],
            "min_donors": self.min_donors,
            "n_pools": len(self.pools[0]),
            "pool_sizes": self.pool_sizes(),
        }


def fit_mediator_sampler(m: np.ndarray, w: np.ndarray, a: np.ndarray, n_bins: int = 5,
                         min_donors: int = 50) -> MediatorSampler:
    """Build donor pools on quantile cells of W with small-cell merging."""
    m = _check_finite("m", m)
    w = _check_finite("w", w)
    a = _check_finite("a", a).ravel().astype(np.int64)
    n, q = w.shape
    grid = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    column_edges = []
    for j in range(q):
        col = w[:, j]
        uniq = np.unique(col)
        if len(uniq) <= n_bins:
            edges = (uniq[1:] + uniq[:-1]) / 2.0 if len(uniq) > 1 else np.empty(0)
        else:
            edges = np.unique(np.quantile(col, grid))
        column_edges.append(edges)

    w_mean = w.mean(axis=0)
    w_std = np.where(w.std(axis=0) > 1e-12, w.std(axis=0), 1.0)
    z = (w - w_mean) / w_std

    ids = np.zeros(n, dtype=np.int64)
    for j, edges in enumerate(column_edges):
        ids = ids * (len(edges) + 1) + np.searchsorted(edges, w[:, j], side="right")
    occupied, inverse = np.unique(ids, return_inverse=True)

    # Merge deficient cells into the nearest surviving cell by centroid.
    groups: dict[int, list[int]] = {i: [i] for i in range(len(occupied))}
    members = {i: np.flatnonzero(inverse == i) for i in range(len(occupied))}
    centroid = {i: z[members[i]].mean(axis=0) for i in groups}
    counts = {
        i: (int((a[members[i]] == 0).sum()), int((a[members[i]] == 1).sum())) for i in groups
    }

    def deficient(i: int) -> bool:
        c0, c1 = counts[i]
        return c0 < min_donors or c1 < min_donors

    while len(groups) > 1:
        bad = [i for i in groups if deficient(i)]
        if not bad:
            break
        i = min(bad, key=lambda k: sum(counts[k]))
        others = [k for k in groups if k != i]
        dists = [float(((centroid[i] - centroid[k]) ** 2).sum()) for k in others]
        target = others[int(np.argmin(dists))]
        ni, nt = len(members[i]), len(members[target])
        centroid[target] = (centroid[target] * nt + centroid[i] * ni) / (nt + ni)
        members[target] = np.concatenate([members[target], members[i]])
        counts[target] = (
            counts[target][0] + counts[i][0],
            counts[target][1] + counts[i][1],
        )
        groups[target].extend(groups[i])
        del groups[i], members[i], centroid[i], counts[i]

    pool_ids = sorted(groups)
    cell_to_pool: dict[int, int] = {}
    pools0, pools1, cents = [], [], []
    for new_id, gid in enumerate(pool_ids):
        for original in groups[gid]:
            cell_to_pool[int(occupied[original])] = new_id
        rows = members[gid]
        pools0.append(m[rows[a[rows] == 0]])
        pools1.append(m[rows[a[rows] == 1]])
        cents.append(centroid[gid])
    return MediatorSampler(
        column_edges=column_edges,
        cell_to_pool=cell_to_pool,
        centroids=np.array(cents),
        pools=(pools0, pools1),
        w_mean=w_mean,
        w_std=w_std,
        min_donors=min_donors,
    )


def sample_mediators(sampler: MediatorSampler, unit_w: np.ndarray, arm: int, d: int,
                     seed: int) -> np.ndarray:
    """d mediator vectors for one unit, uniform with replacement from its
    (cell, arm) donor pool; deterministic given seed."""
    key = substream(seed, arm)
    out = sampler.sample_matrix(np.asarray(unit_w, dtype=np.float64).reshape(1, -1), arm, d,
                                np.array([key], dtype=np.uint64))
    return out[0]


# ---------------------------------------------------------------------------
# Fold-indexed nuisance sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NuisanceConfig:
    outcome_learner: str = "logistic"
    propensity_learner: str = "logistic"
    ratio_learner: str = "logistic"
    l2_penalty: float = 1e-4
    gbt_n_estimators: int = 200
    gbt_max_depth: int = 4
    gbt_learning_rate: float = 0.1
    prob_clip: tuple[float, float] = (0.01, 0.99)
    ratio_clip: float = 0.01
    mediator_bins: int = 5
    min_donors: int = 50

    def to_dict(self) -> dict:
        return {
            "outcome_learner": self.outcome_learner,
            "propensity_learner": self.propensity_learner,
            "ratio_learner": self.ratio_learner,
            "l2_penalty": self.l2_penalty,
            "gbt_n_estimators": self.gbt_n_estimators,
            "gbt_max_depth": self.gbt_max_depth,
            "gbt_learning_rate": self.gbt_learning_rate,
            "prob_clip": list(self.prob_clip),
            "ratio_clip": self.ratio_clip,
            "mediator_bins": self.mediator_bins,
            "min_donors": self.min_donors,
        }


@dataclass
class OutcomeRegression:
    """mu-hat(a, m, w) scoring on stacked [a | m | w] features."""

    model: object

    def predict(self, a, m: np.ndarray, w: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        if np.isscalar(a):
            a_col = np.full((len(m), 1), float(a))
        else:
            a_col = np.asarray(a, dtype=np.float64).reshape(-1, 1)
        return self.model.predict_proba(np.hstack([a_col, m, w]))

    def to_dict(self) -> dict:
        return {"kind": "outcome_regression", "model": self.model.to_dict()}


@dataclass
class PropensityScore:
    """pi-hat_1(w) = P(A=1 | W=w)."""

    model: object

    def predict(self, w: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(np.asarray(w, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"kind": "propensity", "model": self.model.to_dict()}


@dataclass
class FoldModels:
    mu: object
    pi: object
    ratio: DensityRatioModel
    sampler: MediatorSampler
    train_index: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.to_dict(),
            "pi": self.pi.to_dict(),
            "ratio": self.ratio.to_dict(),
            "sampler": self.sampler.to_dict(),
            "n_train": int(len(self.train_index)),
        }


@dataclass
class NuisanceSet:
    """Per-fold nuisance models, each trained on that fold's complement."""

    folds: dict[int, FoldModels]
    config: NuisanceConfig

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "folds": {str(k): fm.to_dict() for k, fm in sorted(self.folds.items())},
        }


def _learner_kwargs(config: NuisanceConfig, learner: str) -> dict:
    if learner == "logistic":
        return {"l2_penalty": config.l2_penalty}
    return {
        "n_estimators": config.gbt_n_estimators,
        "max_depth": config.gbt_max_depth,
        "learning_rate": config.gbt_learning_rate,
    }


def fit_fold_models(dataset: AuditDataset, train_index: np.ndarray,
                    config: NuisanceConfig) -> FoldModels:
    """Fit mu, pi, the density ratio, and the sampler on one training slice."""
    w = dataset.w[train_index]
    a = dataset.a[train_index]
    m = dataset.m[train_index]
    y = dataset.y[train_index]
    mu_features = np.hstack([a.reshape(-1, 1), m, w])
    mu = OutcomeRegression(
        _fit_classifier(mu_features, y, config.outcome_learner,
                        **_learner_kwargs(config, config.outcome_learner))
    )
    pi = PropensityScore(
        _fit_classifier(w, a, config.propensity_learner,
                        **_learner_kwargs(config, config.propensity_learner))
    )
    ratio = fit_density_ratio(
        m, w, a,
        learner=config.ratio_learner,
        clip_epsilon=config.ratio_clip,
        prob_clip=config.prob_clip,
        **_learner_kwargs(config, config.ratio_learner),
    )
    sampler = fit_mediator_sampler(
        m, w, a, n_bins=config.mediator_bins, min_donors=config.min_donors
    )
    return FoldModels(mu=mu, pi=pi, ratio=ratio, sampler=sampler,
                      train_index=np.asarray(train_index, dtype=np.int64))


def fit_nuisances(dataset: AuditDataset, folds: FoldAssignment,
                  config: NuisanceConfig | None = None) -> NuisanceSet:
    """Cross-fitting setup: train each fold's models on its complement."""
    config = config or NuisanceConfig()
    out = {}
    for k in range(1, folds.k + 1):
        out[k] = fit_fold_models(dataset, folds.train_index(k), config)
    return NuisanceSet(folds=out, config=config)
