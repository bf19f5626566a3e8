"""Online conjugate identification of a multivariate ARX model.

The regression target is the next output; the regressor stacks the current
control, the last ``m_u`` controls and the last ``m_y`` outputs, in that
order. Beliefs over the coefficient matrix and noise precision stay in the
matrix-normal-Wishart family, so each observation is an exact closed-form
update and the one-step-ahead predictive is a location-scale T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .distributions import (
    DistributionError,
    LocationScaleT,
    MatrixNormalWishart,
    symmetrize,
)

OMEGA_JITTER = 1e-10


class NumericalBreakdownError(RuntimeError):
    """Posterior update lost positive definiteness beyond jitter repair."""


@dataclass(frozen=True)
class Buffers:
    """Sliding control/output memories, most recent entry first.

    ``u_hist`` has shape ``(m_u, d_u)`` and ``y_hist`` shape ``(m_y, d_y)``;
    rows are ordered newest to oldest so that raveling reproduces the
    stacked-lag layout of the regressor.
    """

    u_hist: np.ndarray
    y_hist: np.ndarray

    def __post_init__(self):
        u_hist = np.atleast_2d(np.asarray(self.u_hist, dtype=float))
        y_hist = np.atleast_2d(np.asarray(self.y_hist, dtype=float))
        object.__setattr__(self, "u_hist", u_hist)
        object.__setattr__(self, "y_hist", y_hist)

    @classmethod
    def zeros(cls, d_u: int, d_y: int, m_u: int, m_y: int) -> "Buffers":
        return cls(np.zeros((m_u, d_u)), np.zeros((m_y, d_y)))

    @property
    def m_u(self) -> int:
        return self.u_hist.shape[0]

    @property
    def m_y(self) -> int:
        return self.y_hist.shape[0]

    @property
    def d_u(self) -> int:
        return self.u_hist.shape[1]

    @property
    def d_y(self) -> int:
        return self.y_hist.shape[1]

    def tail(self) -> np.ndarray:
        """Fixed (control-independent) part of the regressor: [u-lags; y-lags]."""
        return np.concatenate([self.u_hist.ravel(), self.y_hist.ravel()])


@dataclass(frozen=True)
class ArxBeliefs:
    """Matrix-normal-Wishart posterior plus the ARX dimension bookkeeping."""

    posterior: MatrixNormalWishart
    d_u: int
    d_y: int
    m_u: int
    m_y: int

    def __post_init__(self):
        expected = self.d_x
        if self.posterior.d_x != expected or self.posterior.d_y != self.d_y:
            raise DistributionError(
                f"posterior is {self.posterior.mean.shape}, expected "
                f"({expected}, {self.d_y}) for the declared lags"
            )

    @property
    def d_x(self) -> int:
        return self.d_u * (self.m_u + 1) + self.d_y * self.m_y


@dataclass(frozen=True)
class ImproperLikelihoodMessage:
    """Likelihood-shaped MNW factor from one observation; its scatter block is
    exactly zero, so it is only valid as a multiplicative update to a proper
    prior."""

    nu_bar: float
    lam_bar: np.ndarray
    m_bar: np.ndarray
    omega_bar: np.ndarray


def make_regressor(u: np.ndarray, buf: Buffers) -> np.ndarray:
    """Stack ``[u; u-lags; y-lags]`` into the regression vector."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape[0] != buf.d_u:
        raise DistributionError(f"control has dim {u.shape[0]}, expected {buf.d_u}")
    return np.concatenate([u, buf.tail()])


def push_buffers(buf: Buffers, u: np.ndarray, y: np.ndarray) -> Buffers:
    """Shift memories one step: ``u``/``y`` become most recent, oldest drop."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if u.shape[0] != buf.d_u or y.shape[0] != buf.d_y:
        raise DistributionError("pushed control/output dimension mismatch")
    u_hist = np.vstack([u[None, :], buf.u_hist])[: buf.m_u] if buf.m_u else buf.u_hist
    y_hist = np.vstack([y[None, :], buf.y_hist])[: buf.m_y] if buf.m_y else buf.y_hist
    return Buffers(u_hist, y_hist)


def likelihood_message(x: np.ndarray, y: np.ndarray) -> ImproperLikelihoodMessage:
    """Improper MNW message carried by a single (regressor, output) pair."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d_x, d_y = x.shape[0], y.shape[0]
    lam_bar = np.outer(x, x)
    xtx = float(x @ x)
    # Pseudo-inverse of the rank-1 Gram matrix: (x x')^+ x y' = x y' / (x'x).
    m_bar = np.outer(x, y) / xtx if xtx > 0.0 else np.zeros((d_x, d_y))
    return ImproperLikelihoodMessage(
        nu_bar=float(2 - d_x + d_y),
        lam_bar=lam_bar,
        m_bar=m_bar,
        omega_bar=np.zeros((d_y, d_y)),
    )


def update_beliefs(b: ArxBeliefs, u: np.ndarray, y: np.ndarray, buf: Buffers) -> ArxBeliefs:
    """Absorb one (control, output) observation into the posterior.

    The scatter update uses the product of posterior and prior residuals,
    which is symmetric and positive in exact arithmetic; the textbook
    difference-of-products form cancels catastrophically over long runs.
    Buffers are not modified.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = make_regressor(u, buf)
    post = b.posterior
    lam_new = symmetrize(post.row_precision + np.outer(x, x))
    rhs = post.row_precision @ post.mean + np.outer(x, y)
    chol_new = np.linalg.cholesky(lam_new)
    m_new = cho_solve((chol_new, True), rhs)
    resid_post = y - m_new.T @ x
    resid_prior = y - post.mean.T @ x
    omega_new = post.scatter + symmetrize(np.outer(resid_post, resid_prior))
    nu_new = post.dof + 1.0
    try:
        posterior = MatrixNormalWishart(m_new, lam_new, omega_new, nu_new)
    except DistributionError:
        omega_new = omega_new + OMEGA_JITTER * np.eye(b.d_y)
        try:
            posterior = MatrixNormalWishart(m_new, lam_new, omega_new, nu_new)
        except DistributionError as exc:
            raise NumericalBreakdownError(
                f"scatter update lost positive definiteness: {exc}"
            ) from exc
    return ArxBeliefs(posterior, b.d_u, b.d_y, b.m_u, b.m_y)


def posterior_predictive(b: ArxBeliefs, u: np.ndarray, buf: Buffers) -> LocationScaleT:
    """One-step-ahead predictive T after marginalizing coefficients and precision."""
    post = b.posterior
    eta = post.dof - b.d_y + 1.0
    if eta <= 0:
        raise DistributionError(
            f"predictive dof {eta} is not positive (posterior dof {post.dof})"
        )
    x = make_regressor(u, buf)
    z = solve_triangular(post.chol_row_precision, x, lower=True)
    leverage = float(z @ z)
    mu = post.mean.T @ x
    sigma = symmetrize(post.scatter * ((1.0 + leverage) / eta))
    return LocationScaleT(eta, mu, sigma)


def negative_log_evidence(b: ArxBeliefs, u: np.ndarray, y: np.ndarray, buf: Buffers) -> float:
    """Surprise ``-ln p(y | u, data)`` of ``y`` under the pre-update predictive."""
    from .distributions import t_log_pdf

    return -t_log_pdf(posterior_predictive(b, u, buf), y)
