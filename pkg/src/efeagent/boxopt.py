"""Deterministic box-constrained minimization of smooth objectives.

Projected Newton with Levenberg damping and Armijo backtracking along the
projection arc. Objectives supply value, gradient and Hessian in one call;
all problems in this package are tiny (2 to 6 dimensions), so robustness and
reproducibility matter more than per-iteration cost. Unbounded coordinates
are expressed with infinite box limits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class OptimizerWarning(UserWarning):
    """Budget exhausted before the convergence test was met."""


@dataclass
class BoxResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int


def _damped_newton_step(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve (H + tau I) d = -g with the smallest damping that makes H PD."""
    n = h.shape[0]
    tau = 0.0
    scale = max(float(np.max(np.abs(h))), 1e-12)
    for _ in range(60):
        try:
            chol = np.linalg.cholesky(h + tau * np.eye(n))
        except np.linalg.LinAlgError:
            tau = max(4.0 * tau, 1e-10 * scale)
            continue
        z = np.linalg.solve(chol, -g)
        return np.linalg.solve(chol.T, z)
    # Pathologically scaled Hessian: fall back to steepest descent.
    return -g / scale


def minimize_box(
    value_grad_hess: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    x0: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: int = 60,
    gtol: float = 1e-10,
) -> BoxResult:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    f, g, h = value_grad_hess(x)
    span = np.where(np.isfinite(hi - lo), hi - lo, 1.0)
    edge = 1e-12 * span
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pinned = ((x <= lo + edge) & (g > 0)) | ((x >= hi - edge) & (g < 0))
        proj_grad = np.where(pinned, 0.0, g)
        if float(np.max(np.abs(proj_grad), initial=0.0)) <= gtol * (1.0 + abs(f)):
            converged = True
            break
        free = ~pinned
        d = np.zeros_like(x)
        d[free] = _damped_newton_step(h[np.ix_(free, free)], g[free])
        # Backtrack along the projection arc.
        t = 1.0
        accepted = False
        while t >= 1e-12:
            x_new = np.clip(x + t * d, lo, hi)
            step = x_new - x
            slope = float(g @ step)
            if np.all(step == 0.0):
                break
            f_new, g_new, h_new = value_grad_hess(x_new)
            if f_new <= f + 1e-4 * min(slope, 0.0) and f_new < f + 1e-16 * (1 + abs(f)):
                x, f, g, h = x_new, f_new, g_new, h_new
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # No feasible descent along the damped Newton arc: stationary
            # for practical purposes.
            converged = True
            break
    return BoxResult(x=x, fun=f, converged=converged, iterations=it)


def maximize_unbounded(
    value_grad_hess: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    x0: np.ndarray,
    max_iter: int = 80,
    gtol: float = 1e-10,
) -> BoxResult:
    """Maximize a smooth function by minimizing its negation without bounds."""

    def negated(x):
        v, g, h = value_grad_hess(x)
        return -v, -g, -h

    n = np.asarray(x0, dtype=float).shape[0]
    res = minimize_box(
        negated, x0, np.full(n, -np.inf), np.full(n, np.inf), max_iter=max_iter, gtol=gtol
    )
    return BoxResult(x=res.x, fun=-res.fun, converged=res.converged, iterations=res.iterations)


def grid_points(lo: np.ndarray, hi: np.ndarray, n: int) -> np.ndarray:
    """Regular n-per-axis grid over the box, shape (n**d, d)."""
    axes = [np.linspace(l, h, n) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
