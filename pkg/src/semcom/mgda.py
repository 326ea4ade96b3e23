"""Min-norm weighting for the two-objective descent direction.

Given the utility gradient U and the (sign-flipped, channel-damped)
privacy gradient P, the adaptive weight is

    lam* = argmin_{lam in [0,1]} || lam*U + (1-lam)*P ||^2

solved in closed form by branch logic, with a projection-free Frank-Wolfe
loop for the general n-objective case.  The minimizer is the point of the
gradients' convex hull closest to the origin; the combined vector at lam*
is a common descent direction (or zero at a Pareto-stationary point).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ParameterSet
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class GradientPair:
    """Utility-direction and privacy-direction gradients over the encoder."""

    theta: np.ndarray
    theta_bar: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        theta_bar = np.asarray(self.theta_bar, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "theta_bar", theta_bar)
        if theta.ndim != 1 or theta_bar.ndim != 1:
            raise ValueError("gradients must be flat vectors")
        if theta.shape != theta_bar.shape:
            raise ValueError(f"length mismatch: {theta.shape} vs {theta_bar.shape}")
        if theta.size == 0:
            raise ValueError("gradients must be nonempty")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(theta_bar))):
            raise ValueError("gradients must be finite")


@dataclass(frozen=True)
class SimplexWeights:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if np.any(values < 0):
            raise ValueError("simplex weights must be nonnegative")
        if abs(values.sum() - 1.0) > 1e-12:
            raise ValueError(f"simplex weights must sum to 1, got {values.sum()}")


def _min_norm_from_dots(uv: float, uu: float, vv: float) -> float:
    """argmin_{lam in [0,1]} ||lam*u + (1-lam)*v||^2 from the three dot products.

    Ties fall to the first branch (lam = 1), so identical vectors give 1.
    """
    if uv >= uu:
        return 1.0
    if uv >= vv:
        return 0.0
    lam = (vv - uv) / (uu - 2.0 * uv + vv)
    return min(1.0, max(0.0, lam))


def min_norm_lambda(pair: GradientPair) -> float:
    """Closed-form weight for the two-gradient min-norm problem."""
    theta, theta_bar = pair.theta, pair.theta_bar
    return _min_norm_from_dots(
        float(theta @ theta_bar), float(theta @ theta), float(theta_bar @ theta_bar)
    )


def frank_wolfe(
    gradients: list[np.ndarray], max_iters: int = 100, tol: float = 1e-6
) -> SimplexWeights:
    """Min-norm point in the convex hull of n gradients.

    Each iteration jumps toward the vertex of steepest descent with an
    exact 1-D line search (the closed form above on the Gram matrix);
    stops when the step size falls to `tol` or the iteration cap.
    """
    if len(gradients) < 2:
        raise ValueError("need at least two gradient vectors")
    g = np.asarray(gradients, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("gradients must be equal-length flat vectors")
    n = g.shape[0]
    gram = g @ g.T
    weights = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        gw = gram @ weights
        vertex = int(np.argmin(gw))  # ties break to the lowest index
        current = float(weights @ gw)
        gap = current - float(gw[vertex])  # Frank-Wolfe duality gap, 0 at the optimum
        if gap <= tol * max(1.0, abs(current)):
            break
        step = _min_norm_from_dots(
            float(gw[vertex]), float(gram[vertex, vertex]), current
        )
        if step <= tol:
            break
        weights = (1.0 - step) * weights
        weights[vertex] += step
    return SimplexWeights(weights)


def mgda_weighted_step(
    params: ParameterSet,
    state: AdamState,
    pair: GradientPair,
    lam_star: float,
) -> tuple[AdamState, ParameterSet]:
    """Feed the convex combination lam*theta + (1-lam)*theta_bar to the
    optimizer (theta_bar already carries its sign and channel damping)."""
    if not 0.0 <= lam_star <= 1.0:
        raise ValueError(f"lambda* must lie in [0, 1], got {lam_star}")
    combined = lam_star * pair.theta + (1.0 - lam_star) * pair.theta_bar
    return adam_step(state, params, combined)
