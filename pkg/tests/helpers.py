"""Shared test oracles: finite differences, grid searches, canned RNG streams.

These stay deliberately independent of the library's differentiation and
solver code paths: finite differences only evaluate the loss, the grid
oracle only evaluates the squared norm.
"""

import numpy as np


def central_differences(loss_fn, flat: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of loss_fn (a function of the flat parameter vector) by
    central finite differences, one coordinate at a time."""
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += h
        up = loss_fn(bumped)
        bumped[i] -= 2 * h
        down = loss_fn(bumped)
        grad[i] = (up - down) / (2 * h)
    return grad


def max_relative_error(analytic: np.ndarray, reference: np.ndarray, floor: float = 1e-6) -> float:
    """Per-coordinate |a - r| / max(|r|, floor), maximized."""
    denom = np.maximum(np.abs(reference), floor)
    return float(np.max(np.abs(analytic - reference) / denom))


def grid_min_norm_objective(theta: np.ndarray, theta_bar: np.ndarray, points: int = 1001):
    """Brute-force sweep of ||lam*theta + (1-lam)*theta_bar||^2 over a grid.

    Returns (best_lambda, best_value)."""
    lams = np.linspace(0.0, 1.0, points)
    combos = np.outer(lams, theta) + np.outer(1.0 - lams, theta_bar)
    values = np.sum(combos * combos, axis=1)
    i = int(np.argmin(values))
    return float(lams[i]), float(values[i])


def min_norm_objective(theta: np.ndarray, theta_bar: np.ndarray, lam: float) -> float:
    v = lam * theta + (1.0 - lam) * theta_bar
    return float(v @ v)


class PresetNormals:
    """Duck-typed stand-in for numpy Generator: returns queued arrays from
    standard_normal in order (shape-checked)."""

    def __init__(self, arrays):
        self.queue = list(arrays)

    def standard_normal(self, size):
        arr = np.asarray(self.queue.pop(0), dtype=np.float64)
        expected = size if isinstance(size, tuple) else (size,)
        assert arr.shape == tuple(expected), f"queued {arr.shape}, asked {expected}"
        return arr
