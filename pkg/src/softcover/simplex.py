"""Probability-simplex search utilities: grid enumeration, exponentiated
gradient, and projected descent with numeric gradients."""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from .errors import ValidationError


def simplex_grid(k: int, resolution: float) -> np.ndarray:
    """All points of the k-simplex with coordinates on a grid of the given
    resolution (denominators m = round(1/resolution)). Rows sum to 1."""
    if k < 1:
        raise ValidationError("k must be positive")
    if resolution <= 0 or resolution > 1:
        raise ValidationError("resolution must lie in (0, 1]")
    m = max(1, int(round(1.0 / resolution)))
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        a = np.arange(m + 1) / m
        return np.stack([a, 1.0 - a], axis=1)
    if k == 3:
        i = np.repeat(np.arange(m + 1), np.arange(m + 1, 0, -1))
        j = np.concatenate([np.arange(m + 1 - v) for v in range(m + 1)])
        pts = np.stack([i, j, m - i - j], axis=1) / m
        return pts
    # generic fallback for small m only
    if (m + 1) ** (k - 1) > 2_000_000:
        raise ValidationError(f"simplex grid too large for k={k} at {resolution}")
    rows = []
    for comp in itertools.product(range(m + 1), repeat=k - 1):
        s = sum(comp)
        if s <= m:
            rows.append(comp + (m - s,))
    return np.asarray(rows, dtype=float) / m


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / (np.arange(v.size) + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def exponentiated_gradient(
    grad: Callable[[np.ndarray], np.ndarray],
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    steps: int,
    step0: float,
) -> tuple[np.ndarray, float]:
    """Minimize a convex objective over the simplex by multiplicative
    updates x <- x * exp(-eta_t g) with eta_t = step0 / sqrt(t).

    Returns the best iterate seen and its objective value. Iterates stay in
    the relative interior, so log-domain gradients remain finite.
    """
    x = np.clip(np.asarray(x0, dtype=float), 1e-300, None)
    x = x / x.sum()
    best_x = x.copy()
    best_f = objective(x)
    for t in range(1, steps + 1):
        g = grad(x)
        g = g - g.max()  # shift-invariant on the simplex; avoids overflow
        eta = step0 / np.sqrt(t)
        x = x * np.exp(-eta * g)
        total = x.sum()
        if not np.isfinite(total) or total <= 0:
            x = best_x.copy()
            continue
        x = np.clip(x / total, 1e-300, None)
        x = x / x.sum()
        f = objective(x)
        if f < best_f:
            best_f = f
            best_x = x.copy()
    return best_x, best_f


def projected_descent(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    steps: int = 80,
    fd_step: float = 1e-6,
    init_step: float = 0.25,
    improve_tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Projected gradient descent with forward-difference gradients and
    backtracking line search. Suited to piecewise-smooth objectives such as
    penalized brackets; not guaranteed beyond a local minimum."""
    x = project_to_simplex(np.asarray(x0, dtype=float))
    f = objective(x)
    k = x.size
    for _ in range(steps):
        g = np.empty(k)
        for i in range(k):
            e = np.zeros(k)
            e[i] = fd_step
            g[i] = (objective(project_to_simplex(x + e)) - f) / fd_step
        step = init_step
        improved = False
        for _ in range(25):
            cand = project_to_simplex(x - step * g)
            fc = objective(cand)
            if fc < f - improve_tol:
                x, f = cand, fc
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return x, f
