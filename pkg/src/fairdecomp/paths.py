"""Path-specific indirect effects by products of coefficients.

For each mediator j, alpha_j is the treatment coefficient in the linear
regression of M_j on (A, W) and beta_j is the M_j coefficient in a
linear-probability regression of Y on (A, all M, W). The products
alpha_j * beta_j are allocated proportionally to the total indirect effect.
This block is a descriptive decomposition on the same additive risk scale
as the indirect effect, not a fully identified path analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import AuditDataset
from .errors import DegenerateAllocation


@dataclass
class PathCoefficients:
    mediators: tuple[str, ...]
    alpha: np.ndarray
    beta: np.ndarray
    products: np.ndarray
    allocated: np.ndarray
    iie: float
    mixed_sign: bool

    def to_rows(self) -> list[dict]:
        return [
            {
                "mediator": name,
                "alpha": float(self.alpha[j]),
                "beta": float(self.beta[j]),
                "product": float(self.products[j]),
                "allocated": float(self.allocated[j]),
            }
            for j, name in enumerate(self.mediators)
        ]


def _ols(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return coef


def path_specific_effects(dataset: AuditDataset, iie: float) -> PathCoefficients:
    """Fit the p mediator regressions and the outcome regression, then
    allocate `iie` proportionally to the coefficient products.

    Raises DegenerateAllocation (carrying the raw products) when the
    products sum to approximately zero; mixed-sign products are allocated
    with signs retained and flagged as not interpretable as shares.
    """
    n, p = dataset.m.shape
    ones = np.ones((n, 1))
    a = dataset.a.reshape(-1, 1)
    design_m = np.hstack([ones, a, dataset.w])
    alpha = np.empty(p)
    for j in range(p):
        alpha[j] = _ols(design_m, dataset.m[:, j])[1]
    design_y = np.hstack([ones, a, dataset.m, dataset.w])
    coef_y = _ols(design_y, dataset.y.astype(np.float64))
    beta = coef_y[2 : 2 + p]
    products = alpha * beta
    total = float(products.sum())
    scale = float(np.abs(products).sum())
    if abs(total) < max(1e-10 * scale, 1e-12) or not np.isfinite(total):
        exc = DegenerateAllocation(
            f"coefficient products sum to {total:.3e}; reporting raw products only"
        )
        exc.products = products
        exc.alpha = alpha
        exc.beta = beta
        raise exc
    allocated = iie * products / total
    return PathCoefficients(
        mediators=dataset.m_names,
        alpha=alpha,
        beta=beta,
        products=products,
        allocated=allocated,
        iie=iie,
        mixed_sign=bool((products > 0).any() and (products < 0).any()),
    )
