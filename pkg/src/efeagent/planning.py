"""Expected-free-energy control selection and receding-horizon planning.

One-step control selection minimizes a quadratic control penalty plus the
expected free energy of the predictive, which trades off goal-seeking
(cross-entropy to a Gaussian goal prior) against information-seeking (the
log-volume of the predictive scale). Multi-step planning chains one-step
nodes: a forward pass rolls predicted means through virtual buffers, a
backward pass scores earlier outputs by how well they explain later goals
and condenses each product into a Gaussian intermediate goal by Laplace
approximation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import gammaln

from .boxopt import BoxResult, OptimizerWarning, grid_points, minimize_box
from .distributions import (
    DistributionError,
    Gaussian,
    LocationScaleT,
    MomentUndefinedError,
    symmetrize,
    t_log_pdf,
    t_log_pdf_grad,
    t_log_pdf_hess,
)
from .filtering import ArxBeliefs, Buffers, posterior_predictive, push_buffers

GRID_SEED_PER_AXIS = 17
FD_STEP = 1e-5


@dataclass(frozen=True)
class GoalPrior:
    """Gaussian target over a future output."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        g = Gaussian(self.mean, self.cov)
        object.__setattr__(self, "mean", g.mean)
        object.__setattr__(self, "cov", g.cov)
        object.__setattr__(self, "_chol", g.chol)

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    def as_gaussian(self) -> Gaussian:
        return Gaussian(self.mean, self.cov)


@dataclass(frozen=True)
class ControlPrior:
    """Zero-mean Gaussian prior over controls, stored as a precision matrix."""

    precision: np.ndarray

    def __post_init__(self):
        g = Gaussian(np.zeros(np.atleast_2d(self.precision).shape[0]), self.precision)
        object.__setattr__(self, "precision", g.cov)


@dataclass(frozen=True)
class ControlBox:
    """Per-coordinate control bounds."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError(f"invalid control box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, u: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lo, self.hi)


@dataclass
class Plan:
    """Receding-horizon plan; only ``controls[0]`` is meant to be executed."""

    controls: np.ndarray
    intermediate_goals: list[GoalPrior]
    predicted: list[LocationScaleT]
    efe_values: np.ndarray


def efe(b: ArxBeliefs, buf: Buffers, u: np.ndarray, goal: GoalPrior) -> float:
    """Expected free energy of control ``u`` (additive constants dropped).

    ``-0.5 ln|S(u)| + 0.5 Tr[G^{-1} (S(u) eta/(eta-2) + (m(u)-g)(m(u)-g)')]``
    for predictive (eta, m(u), S(u)) and goal (g, G). Logged values are
    therefore only comparable within a run.
    """
    pred = posterior_predictive(b, u, buf)
    if pred.dof <= 2:
        raise MomentUndefinedError(
            f"expected free energy needs predictive dof > 2, got {pred.dof}"
        )
    log_det_sigma = 2.0 * float(np.sum(np.log(np.diag(pred.chol))))
    spread = pred.scale * (pred.dof / (pred.dof - 2.0))
    resid = pred.loc - goal.mean
    inner = spread + np.outer(resid, resid)
    trace_term = float(np.trace(cho_solve((goal.chol, True), inner)))
    return -0.5 * log_det_sigma + 0.5 * trace_term


def standard_fe(b: ArxBeliefs, buf: Buffers, u: np.ndarray, goal: GoalPrior) -> float:
    """Plain free-energy objective: predictive negentropy plus goal cross-entropy.

    Differs from :func:`efe` by a control-independent constant, so both give
    the same minimizer.
    """
    from .distributions import gaussian_cross_entropy_from_t, t_entropy

    pred = posterior_predictive(b, u, buf)
    return -t_entropy(pred) + gaussian_cross_entropy_from_t(pred, goal.as_gaussian())


class _PlanContext:
    """Per-beliefs quantities reused across planning nodes (the coefficient
    posterior does not change while planning)."""

    def __init__(self, b: ArxBeliefs):
        post = b.posterior
        self.d_u = b.d_u
        self.d_y = b.d_y
        self.beliefs = b
        self.eta = post.dof - b.d_y + 1.0
        self.coeff_u = post.mean[: b.d_u]
        self.coeff_tail = post.mean[b.d_u :]
        p_full = symmetrize(cho_solve((post.chol_row_precision, True), np.eye(post.d_x)))
        self.p_uu = p_full[: b.d_u, : b.d_u]
        self.p_ut = p_full[: b.d_u, b.d_u :]
        self.p_tt = p_full[b.d_u :, b.d_u :]
        self.scatter = post.scatter
        self.log_det_scatter = 2.0 * float(np.sum(np.log(np.diag(post.chol_scatter))))


class _NodeObjective:
    """J(u) = 0.5 u' Y u + EFE(u) reduced to closed form in the control.

    With the regressor split as [u; tail], the predictive mean is affine in
    u and the leverage term is a positive quadratic, so values, gradients
    and Hessians are exact and cheap.
    """

    def __init__(self, ctx: _PlanContext, tail: np.ndarray, goal: GoalPrior, cp: ControlPrior):
        if ctx.eta <= 2:
            raise MomentUndefinedError(
                f"expected free energy needs predictive dof > 2, got {ctx.eta}"
            )
        self.ctx = ctx
        d_y = ctx.d_y
        self.upsilon = cp.precision
        self.mu0 = ctx.coeff_tail.T @ tail - goal.mean
        self.q_lin = ctx.p_ut @ tail
        self.q_const = float(tail @ ctx.p_tt @ tail)
        self.goal_prec = symmetrize(cho_solve((goal.chol, True), np.eye(d_y)))
        self.kappa = float(np.trace(self.goal_prec @ ctx.scatter)) / (2.0 * (ctx.eta - 2.0))
        self.c0 = -0.5 * ctx.log_det_scatter + 0.5 * d_y * np.log(ctx.eta)
        self.coeff_goal = ctx.coeff_u @ self.goal_prec
        self.h_resid = self.coeff_goal @ ctx.coeff_u.T

    def efe_value(self, u: np.ndarray) -> float:
        q = float(u @ self.ctx.p_uu @ u + 2.0 * self.q_lin @ u + self.q_const)
        r = self.ctx.coeff_u.T @ u + self.mu0
        return (
            self.c0
            - 0.5 * self.ctx.d_y * np.log1p(q)
            + self.kappa * (1.0 + q)
            + 0.5 * float(r @ self.goal_prec @ r)
        )

    def value(self, u: np.ndarray) -> float:
        return 0.5 * float(u @ self.upsilon @ u) + self.efe_value(u)

    def value_grad_hess(self, u: np.ndarray):
        ctx = self.ctx
        q = float(u @ ctx.p_uu @ u + 2.0 * self.q_lin @ u + self.q_const)
        r = ctx.coeff_u.T @ u + self.mu0
        prec_r = self.goal_prec @ r
        val = (
            0.5 * float(u @ self.upsilon @ u)
            + self.c0
            - 0.5 * ctx.d_y * np.log1p(q)
            + self.kappa * (1.0 + q)
            + 0.5 * float(r @ prec_r)
        )
        grad_q = 2.0 * (ctx.p_uu @ u + self.q_lin)
        gamma = self.kappa - 0.5 * ctx.d_y / (1.0 + q)
        grad = self.upsilon @ u + gamma * grad_q + ctx.coeff_u @ prec_r
        hess = (
            self.upsilon
            + 2.0 * gamma * ctx.p_uu
            + (0.5 * ctx.d_y / (1.0 + q) ** 2) * np.outer(grad_q, grad_q)
            + self.h_resid
        )
        return val, grad, hess

    def batch_values(self, u_batch: np.ndarray) -> np.ndarray:
        ctx = self.ctx
        q = (
            np.einsum("ni,ij,nj->n", u_batch, ctx.p_uu, u_batch)
            + 2.0 * u_batch @ self.q_lin
            + self.q_const
        )
        r = u_batch @ ctx.coeff_u + self.mu0
        quad_goal = np.einsum("ni,ij,nj->n", r, self.goal_prec, r)
        ctrl = np.einsum("ni,ij,nj->n", u_batch, self.upsilon, u_batch)
        return (
            0.5 * ctrl
            + self.c0
            - 0.5 * ctx.d_y * np.log1p(q)
            + self.kappa * (1.0 + q)
            + 0.5 * quad_goal
        )


def _seed_starts(obj: _NodeObjective, box: ControlBox, extra: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Deterministic start set: best coarse-grid cells (de-duplicated) plus
    any caller-provided warm starts."""
    pts = grid_points(box.lo, box.hi, GRID_SEED_PER_AXIS)
    vals = obj.batch_values(pts)
    order = np.argsort(vals)
    min_sep = 0.15 * float(np.min(box.hi - box.lo))
    starts: list[np.ndarray] = []
    for idx in order:
        cand = pts[idx]
        if all(float(np.max(np.abs(cand - s))) > min_sep for s in starts):
            starts.append(cand)
        if len(starts) >= 3:
            break
    for s in extra:
        if s is not None:
            starts.append(box.clip(np.asarray(s, dtype=float)))
    return starts


def _select(
    ctx: _PlanContext,
    tail: np.ndarray,
    goal: GoalPrior,
    cp: ControlPrior,
    box: ControlBox,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    obj = _NodeObjective(ctx, tail, goal, cp)
    best: BoxResult | None = None
    any_converged = False
    for x0 in _seed_starts(obj, box, [warm_start]):
        res = minimize_box(obj.value_grad_hess, x0, box.lo, box.hi)
        any_converged = any_converged or res.converged
        if best is None or res.fun < best.fun:
            best = res
    if not any_converged:
        warnings.warn(
            "control optimizer exhausted its budget; returning best iterate",
            OptimizerWarning,
        )
    u = box.clip(best.x)
    return u, obj.efe_value(u)


def select_control(
    b: ArxBeliefs,
    buf: Buffers,
    goal: GoalPrior,
    cp: ControlPrior,
    box: ControlBox,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize ``0.5 u' Y u + efe(u)`` over the control box."""
    ctx = _PlanContext(b)
    u, _ = _select(ctx, buf.tail(), goal, cp, box, warm_start)
    return u


def forward_message(b: ArxBeliefs, buf: Buffers, u: np.ndarray) -> LocationScaleT:
    """Predictive T over the next output given a chosen control; its mean
    doubles as the pseudo-observation for the next planning node."""
    return posterior_predictive(b, u, buf)


class TCompatibility:
    """Log-density over a free past output, scoring how well it would explain
    a later pseudo-observation under the current coefficient beliefs.

    Callable; also exposes analytic ``grad``/``hess`` and a least-squares
    ``suggest_start`` for downstream optimization.
    """

    def __init__(
        self,
        eta_bar: float,
        x_base: np.ndarray,
        offset: int,
        d_y: int,
        post_mean: np.ndarray,
        p_full: np.ndarray,
        scatter_chol: np.ndarray,
        future_mean: np.ndarray,
        log_det_scatter: float,
    ):
        self.eta_bar = eta_bar
        self.d_y = d_y
        sl = slice(offset, offset + d_y)
        self.p_ee = p_full[sl, sl]
        self.p_e = p_full[sl, :] @ x_base
        self.q_base = float(x_base @ p_full @ x_base)
        self.b_map = post_mean[sl].T
        self.mu_base = post_mean.T @ x_base
        self.d0 = future_mean - self.mu_base
        self.scatter_inv = symmetrize(cho_solve((scatter_chol, True), np.eye(d_y)))
        self.const = float(
            gammaln(0.5 * (eta_bar + d_y))
            - gammaln(0.5 * eta_bar)
            - 0.5 * d_y * np.log(eta_bar * np.pi)
            - 0.5 * log_det_scatter
            + 0.5 * d_y * np.log(eta_bar)
        )

    def _parts(self, y: np.ndarray):
        a = 1.0 + float(y @ self.p_ee @ y + 2.0 * self.p_e @ y + self.q_base)
        delta = self.d0 - self.b_map @ y
        r = float(delta @ self.scatter_inv @ delta)
        return a, delta, r

    def __call__(self, y: np.ndarray) -> float:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        a, _, r = self._parts(y)
        return self.const + 0.5 * self.eta_bar * np.log(a) - 0.5 * (
            self.eta_bar + self.d_y
        ) * np.log(a + r)

    def grad(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        a, delta, r = self._parts(y)
        grad_a = 2.0 * (self.p_ee @ y + self.p_e)
        grad_r = -2.0 * self.b_map.T @ (self.scatter_inv @ delta)
        return 0.5 * self.eta_bar * grad_a / a - 0.5 * (self.eta_bar + self.d_y) * (
            grad_a + grad_r
        ) / (a + r)

    def hess(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        a, delta, r = self._parts(y)
        b_total = a + r
        grad_a = 2.0 * (self.p_ee @ y + self.p_e)
        grad_r = -2.0 * self.b_map.T @ (self.scatter_inv @ delta)
        grad_b = grad_a + grad_r
        hess_a = 2.0 * self.p_ee
        hess_b = hess_a + 2.0 * self.b_map.T @ self.scatter_inv @ self.b_map
        return 0.5 * self.eta_bar * (hess_a / a - np.outer(grad_a, grad_a) / a**2) - 0.5 * (
            self.eta_bar + self.d_y
        ) * (hess_b / b_total - np.outer(grad_b, grad_b) / b_total**2)

    def suggest_start(self) -> np.ndarray:
        """Free output that pulls the implied prediction onto the target."""
        sol, *_ = np.linalg.lstsq(self.b_map, self.d0, rcond=None)
        return sol


def backward_message(
    b: ArxBeliefs,
    future_mean: np.ndarray,
    u_next: np.ndarray,
    buf_next: Buffers,
    hole: int = 0,
) -> TCompatibility:
    """Backward predictive-likelihood over the output occupying output-lag
    slot ``hole`` of the successor node's buffers.

    The successor's goal mean acts as a pseudo-observation; the returned
    log-density scores candidate values of the free output.
    """
    future_mean = np.atleast_1d(np.asarray(future_mean, dtype=float))
    u_next = np.atleast_1d(np.asarray(u_next, dtype=float))
    if future_mean.shape[0] != b.d_y:
        raise DistributionError(
            f"future mean has dim {future_mean.shape[0]}, expected {b.d_y}"
        )
    if u_next.shape[0] != b.d_u:
        raise DistributionError(f"control has dim {u_next.shape[0]}, expected {b.d_u}")
    if not 0 <= hole < buf_next.m_y:
        raise DistributionError(
            f"hole index {hole} outside output buffer of length {buf_next.m_y}"
        )
    post = b.posterior
    eta_bar = post.dof - b.d_y + 1.0
    if eta_bar <= 0:
        raise DistributionError(f"backward message dof {eta_bar} is not positive")
    y_hist = buf_next.y_hist.copy()
    y_hist[hole] = 0.0
    x_base = np.concatenate([u_next, buf_next.u_hist.ravel(), y_hist.ravel()])
    offset = b.d_u * (b.m_u + 1) + hole * b.d_y
    p_full = symmetrize(cho_solve((post.chol_row_precision, True), np.eye(post.d_x)))
    log_det_scatter = 2.0 * float(np.sum(np.log(np.diag(post.chol_scatter))))
    return TCompatibility(
        eta_bar=eta_bar,
        x_base=x_base,
        offset=offset,
        d_y=b.d_y,
        post_mean=post.mean,
        p_full=p_full,
        scatter_chol=post.chol_scatter,
        future_mean=future_mean,
        log_det_scatter=log_det_scatter,
    )


def _fd_grad(f: Callable[[np.ndarray], float], y: np.ndarray) -> np.ndarray:
    g = np.zeros_like(y)
    for i in range(y.shape[0]):
        h = FD_STEP * (1.0 + abs(y[i]))
        e = np.zeros_like(y)
        e[i] = h
        g[i] = (f(y + e) - f(y - e)) / (2.0 * h)
    return g


def _fd_hess(f: Callable[[np.ndarray], float], y: np.ndarray) -> np.ndarray:
    n = y.shape[0]
    hess = np.zeros((n, n))
    f0 = f(y)
    steps = [FD_STEP * 10.0 * (1.0 + abs(y[i])) for i in range(n)]
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        hess[i, i] = (f(y + ei) - 2.0 * f0 + f(y - ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            hess[i, j] = hess[j, i] = (
                f(y + ei + ej) - f(y + ei - ej) - f(y - ei + ej) + f(y - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    return hess


def _newton_stationary(
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    step_cap: float,
    max_iter: int = 50,
    gtol: float = 1e-9,
) -> tuple[np.ndarray, bool]:
    """Newton iteration for a stationary point of a smooth log-density.

    Deliberately not forced uphill: when the start sits in a trough of a
    multimodal product the iteration settles on the nearby stationary point
    instead of wandering to a distant mode, and the caller's curvature test
    decides what to do with it.
    """
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = grad(x)
        if float(np.max(np.abs(g))) <= gtol:
            return x, True
        h = hess(x)
        try:
            delta = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(h, -g, rcond=None)[0]
        norm = float(np.linalg.norm(delta))
        if norm > step_cap:
            delta *= step_cap / norm
        x = x + delta
        if norm <= 1e-14 * (1.0 + float(np.linalg.norm(x))):
            return x, True
    return x, False


def laplace_goal(fwd: LocationScaleT, bwd: Callable[[np.ndarray], float]) -> GoalPrior:
    """Gaussian intermediate goal from the forward/backward message product.

    Mean is the product mode located by Newton iteration from the forward
    mean; covariance is the inverse negative Hessian there. When the
    iteration terminates where the curvature is not negative definite (the
    product has no usable local mode near the predictive, e.g. the backward
    message only rewards variance inflation), the forward message's
    moment-matched Gaussian is returned instead, with a warning.
    """
    bwd_grad = getattr(bwd, "grad", None) or (lambda y: _fd_grad(bwd, y))
    bwd_hess = getattr(bwd, "hess", None) or (lambda y: _fd_hess(bwd, y))

    def total_grad(y):
        return t_log_pdf_grad(fwd, y) + bwd_grad(y)

    def total_hess(y):
        return t_log_pdf_hess(fwd, y) + bwd_hess(y)

    step_cap = 10.0 * float(np.sqrt(np.max(np.diag(fwd.scale))))
    mode, _ = _newton_stationary(total_grad, total_hess, fwd.loc, step_cap)
    neg_hess = symmetrize(-total_hess(mode))
    if float(np.linalg.eigvalsh(neg_hess)[0]) <= 0.0:
        warnings.warn(
            "indefinite curvature at the product's stationary point; falling "
            "back to the forward message's moment-matched Gaussian",
            OptimizerWarning,
        )
        spread = fwd.mean_covariance() if fwd.dof > 2 else fwd.scale
        return GoalPrior(fwd.loc, spread)
    cov = symmetrize(np.linalg.inv(neg_hess))
    return GoalPrior(mode, cov)


def plan(
    b: ArxBeliefs,
    buf: Buffers,
    final_goal: GoalPrior,
    cp: ControlPrior,
    box: ControlBox,
    horizon: int,
    sweeps: int = 1,
) -> Plan:
    """Assemble an H-step plan by alternating forward and backward passes.

    Intermediate goals start at the final goal; each backward pass replaces
    them (successor-first) with Laplace-condensed products of the stored
    forward message and the backward compatibility message. One extra
    forward pass fixes the controls. Only the last step keeps the final
    goal throughout.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    ctx = _PlanContext(b)
    goals: list[GoalPrior] = [final_goal] * horizon
    controls: list[np.ndarray] | None = None

    def forward_pass(current_goals, prev_controls):
        vb = buf
        us, fwds, node_bufs, efes = [], [], [], []
        for s in range(horizon):
            node_bufs.append(vb)
            warm = prev_controls[s] if prev_controls is not None else None
            u, g_val = _select(ctx, vb.tail(), current_goals[s], cp, box, warm)
            fwd = posterior_predictive(b, u, vb)
            us.append(u)
            fwds.append(fwd)
            efes.append(g_val)
            vb = push_buffers(vb, u, fwd.loc)
        return us, fwds, node_bufs, efes

    for _ in range(sweeps):
        controls, fwds, node_bufs, _ = forward_pass(goals, controls)
        if b.m_y == 0:
            continue  # outputs never feed back: no backward coupling to exploit
        for s in range(horizon - 2, -1, -1):
            bwd = backward_message(b, goals[s + 1].mean, controls[s + 1], node_bufs[s + 1], hole=0)
            goals[s] = laplace_goal(fwds[s], bwd)

    controls, fwds, _, efes = forward_pass(goals, controls)
    controls = np.asarray(controls)
    assert all(box.contains(u) for u in controls)
    return Plan(
        controls=controls,
        intermediate_goals=list(goals),
        predicted=fwds,
        efe_values=np.asarray(efes),
    )
