"""Certainty-equivalent MPC baseline sharing the ARX filter.

The cost penalizes control effort and squared distance of rolled-out
predictive means to the goal; predictive uncertainty never enters. Rolling
the means through the buffers is affine in the control sequence, so the
cost is an exact convex quadratic that the selector probes once and then
minimizes over the control box.
"""

from __future__ import annotations

import warnings

import numpy as np

from .boxopt import OptimizerWarning, minimize_box
from .filtering import ArxBeliefs, Buffers, make_regressor, push_buffers
from .planning import ControlBox, ControlPrior


def _rolled_means(b: ArxBeliefs, buf: Buffers, u_seq: np.ndarray) -> np.ndarray:
    """Predictive means over the horizon, feeding each mean back in place of
    the unobserved output."""
    coeff = b.posterior.mean
    vb = buf
    means = np.empty((u_seq.shape[0], b.d_y))
    for t, u in enumerate(u_seq):
        mu = coeff.T @ make_regressor(u, vb)
        means[t] = mu
        vb = push_buffers(vb, u, mu)
    return means


def mpc_cost(
    b: ArxBeliefs,
    buf: Buffers,
    u_seq: np.ndarray,
    cp: ControlPrior,
    goal_mean: np.ndarray,
) -> float:
    """sum_t u_t' Y u_t + ||mean_t(u) - goal||^2 over the horizon."""
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    goal_mean = np.atleast_1d(np.asarray(goal_mean, dtype=float))
    if u_seq.shape[1] != b.d_u:
        raise ValueError(f"controls have dim {u_seq.shape[1]}, expected {b.d_u}")
    if goal_mean.shape[0] != b.d_y:
        raise ValueError(f"goal has dim {goal_mean.shape[0]}, expected {b.d_y}")
    means = _rolled_means(b, buf, u_seq)
    effort = float(np.einsum("ti,ij,tj->", u_seq, cp.precision, u_seq))
    resid = means - goal_mean
    return effort + float(np.sum(resid * resid))


def mpc_select_sequence(
    b: ArxBeliefs,
    buf: Buffers,
    cp: ControlPrior,
    box: ControlBox,
    goal_mean: np.ndarray,
    horizon: int,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """Minimizing control sequence, shape ``(horizon, d_u)``.

    The mean roll is affine in the stacked controls, so probing it with unit
    controls yields the exact quadratic cost; minimization then runs the same
    projected-Newton policy as the expected-free-energy selector.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    goal_mean = np.atleast_1d(np.asarray(goal_mean, dtype=float))
    d_u = b.d_u
    n = horizon * d_u
    base = _rolled_means(b, buf, np.zeros((horizon, d_u))).ravel()
    gain = np.empty((base.shape[0], n))
    for j in range(n):
        probe = np.zeros(n)
        probe[j] = 1.0
        gain[:, j] = _rolled_means(b, buf, probe.reshape(horizon, d_u)).ravel() - base
    shift = base - np.tile(goal_mean, horizon)
    effort_block = np.kron(np.eye(horizon), cp.precision)
    hess = 2.0 * (effort_block + gain.T @ gain)
    lin = 2.0 * gain.T @ shift
    const = float(shift @ shift)

    def vgh(v):
        hv = hess @ v
        return float(0.5 * v @ hv + lin @ v + const), hv + lin, hess

    lo = np.tile(box.lo, horizon)
    hi = np.tile(box.hi, horizon)
    starts = [np.zeros(n)]
    try:
        starts.append(np.clip(np.linalg.solve(hess, -lin), lo, hi))
    except np.linalg.LinAlgError:
        pass
    if warm_start is not None:
        ws = np.asarray(warm_start, dtype=float).reshape(horizon, d_u)
        starts.append(np.clip(ws.ravel(), lo, hi))
    best = None
    any_converged = False
    for x0 in starts:
        res = minimize_box(vgh, x0, lo, hi)
        any_converged = any_converged or res.converged
        if best is None or res.fun < best.fun:
            best = res
    if not any_converged:
        warnings.warn(
            "MPC optimizer exhausted its budget; returning best iterate",
            OptimizerWarning,
        )
    return np.clip(best.x.reshape(horizon, d_u), box.lo, box.hi)


def mpc_select(
    b: ArxBeliefs,
    buf: Buffers,
    cp: ControlPrior,
    box: ControlBox,
    goal_mean: np.ndarray,
    horizon: int,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """First control of the cost-minimizing sequence (receding horizon)."""
    return mpc_select_sequence(b, buf, cp, box, goal_mean, horizon, warm_start)[0]
