"""Probability primitives: Gaussian, matrix-normal-Wishart, location-scale T.

All covariance-like inputs are symmetrized and validated through a
Cholesky factorization at construction time; downstream algebra reuses the
cached triangular factor instead of forming explicit inverses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import digamma, gammaln, multigammaln

SPD_MIN_EIG = 1e-10


class DistributionError(ValueError):
    """Raised when distribution parameters are invalid (shape or SPD failure)."""


class MomentUndefinedError(ValueError):
    """Raised when a requested moment does not exist (e.g. T with dof <= 2)."""


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def spd_cholesky(a: np.ndarray, name: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    """Symmetrize, validate and factor an SPD matrix.

    Returns ``(sym, L)`` with ``sym = L @ L.T``. Rejects matrices whose
    symmetrized form has an eigenvalue below ``SPD_MIN_EIG``.
    """
    a = symmetrize(np.asarray(a, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DistributionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DistributionError(f"{name} has non-finite entries")
    min_eig = float(np.linalg.eigvalsh(a)[0])
    if min_eig < SPD_MIN_EIG:
        raise DistributionError(
            f"{name} is not positive definite (min eigenvalue {min_eig:.3e})"
        )
    return a, np.linalg.cholesky(a)


def _chol_logdet(chol: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _chol_solve(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    z = solve_triangular(chol, b, lower=True)
    return solve_triangular(chol.T, z, lower=False)


def _chol_quad(chol: np.ndarray, d: np.ndarray) -> float:
    """d' A^{-1} d for A = chol chol'."""
    z = solve_triangular(chol, d, lower=True)
    return float(z @ z)


@dataclass(frozen=True)
class Gaussian:
    """Multivariate normal with mean vector and SPD covariance."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov, chol = spd_cholesky(self.cov, "covariance")
        if cov.shape[0] != mean.shape[0]:
            raise DistributionError(
                f"mean has dim {mean.shape[0]} but covariance is {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MatrixNormalWishart:
    """Conjugate belief over regression coefficients A and noise precision W.

    ``mean`` is the matrix-normal location (rows index regressor entries,
    columns index outputs), ``row_precision`` the among-row precision,
    ``scatter`` the accumulated residual-scatter matrix (the Wishart scale
    matrix over W is its inverse) and ``dof`` the Wishart degrees of freedom.
    """

    mean: np.ndarray
    row_precision: np.ndarray
    scatter: np.ndarray
    dof: float
    chol_row_precision: np.ndarray = field(init=False, repr=False, compare=False)
    chol_scatter: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        lam, chol_lam = spd_cholesky(self.row_precision, "row_precision")
        omega, chol_omega = spd_cholesky(self.scatter, "scatter")
        d_x, d_y = mean.shape
        if lam.shape[0] != d_x:
            raise DistributionError(
                f"row_precision is {lam.shape} but mean has {d_x} rows"
            )
        if omega.shape[0] != d_y:
            raise DistributionError(
                f"scatter is {omega.shape} but mean has {d_y} columns"
            )
        if not self.dof > d_y - 1:
            raise DistributionError(f"dof must exceed {d_y - 1}, got {self.dof}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "row_precision", lam)
        object.__setattr__(self, "scatter", omega)
        object.__setattr__(self, "dof", float(self.dof))
        object.__setattr__(self, "chol_row_precision", chol_lam)
        object.__setattr__(self, "chol_scatter", chol_omega)

    @property
    def d_x(self) -> int:
        return self.mean.shape[0]

    @property
    def d_y(self) -> int:
        return self.mean.shape[1]


@dataclass(frozen=True)
class LocationScaleT:
    """Multivariate location-scale T with dof ``dof``, location ``loc`` and
    SPD squared-scale matrix ``scale``."""

    dof: float
    loc: np.ndarray
    scale: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.dof > 0:
            raise DistributionError(f"dof must be positive, got {self.dof}")
        loc = np.atleast_1d(np.asarray(self.loc, dtype=float))
        scale, chol = spd_cholesky(self.scale, "scale")
        if scale.shape[0] != loc.shape[0]:
            raise DistributionError(
                f"loc has dim {loc.shape[0]} but scale is {scale.shape}"
            )
        object.__setattr__(self, "dof", float(self.dof))
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.loc.shape[0]

    def mean_covariance(self) -> np.ndarray:
        """Second-moment covariance ``scale * dof / (dof - 2)``."""
        if self.dof <= 2:
            raise MomentUndefinedError(
                f"T covariance requires dof > 2, got {self.dof}"
            )
        return self.scale * (self.dof / (self.dof - 2.0))


def t_log_pdf(d: LocationScaleT, y: np.ndarray) -> float:
    """Log density of the location-scale T at ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape[0] != d.dim:
        raise DistributionError(f"y has dim {y.shape[0]}, expected {d.dim}")
    eta, p = d.dof, d.dim
    quad = _chol_quad(d.chol, y - d.loc)
    return float(
        gammaln(0.5 * (eta + p))
        - gammaln(0.5 * eta)
        - 0.5 * p * np.log(eta * np.pi)
        - 0.5 * _chol_logdet(d.chol)
        - 0.5 * (eta + p) * np.log1p(quad / eta)
    )


def t_log_pdf_grad(d: LocationScaleT, y: np.ndarray) -> np.ndarray:
    """Gradient of ``t_log_pdf`` with respect to ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    delta = y - d.loc
    sinv_delta = _chol_solve(d.chol, delta)
    quad = float(delta @ sinv_delta)
    return -(d.dof + d.dim) * sinv_delta / (d.dof + quad)


def t_log_pdf_hess(d: LocationScaleT, y: np.ndarray) -> np.ndarray:
    """Hessian of ``t_log_pdf`` with respect to ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    delta = y - d.loc
    sinv = _chol_solve(d.chol, np.eye(d.dim))
    sinv_delta = sinv @ delta
    quad = float(delta @ sinv_delta)
    denom = d.dof + quad
    return -(d.dof + d.dim) * (sinv / denom - 2.0 * np.outer(sinv_delta, sinv_delta) / denom**2)


def t_entropy(d: LocationScaleT) -> float:
    """Differential entropy of the location-scale T.

    Beta/digamma closed form plus the location-free ``0.5 ln|scale|`` term;
    positive for wide scale matrices and pinned against quadrature in tests.
    """
    eta, p = d.dof, d.dim
    log_beta = gammaln(0.5 * p) + gammaln(0.5 * eta) - gammaln(0.5 * (eta + p))
    return float(
        0.5 * p * np.log(eta * np.pi)
        - gammaln(0.5 * p)
        + log_beta
        + 0.5 * (eta + p) * (digamma(0.5 * (eta + p)) - digamma(0.5 * eta))
        + 0.5 * _chol_logdet(d.chol)
    )


def gaussian_cross_entropy_from_t(d: LocationScaleT, g: Gaussian) -> float:
    """Expected Gaussian surprise ``E_T[-ln N(y | g)]``.

    Requires ``dof > 2`` so the T second moment exists. Evaluates to
    ``0.5 ln((2 pi)^D |S|) + 0.5 Tr[S^{-1} (scale * dof/(dof-2) + dd')]``
    with ``d = loc - mean``.
    """
    if d.dim != g.dim:
        raise DistributionError(f"dimension mismatch: T is {d.dim}, Gaussian is {g.dim}")
    second_moment = d.mean_covariance() + np.outer(d.loc - g.mean, d.loc - g.mean)
    trace_term = float(np.trace(_chol_solve(g.chol, second_moment)))
    return float(
        0.5 * g.dim * np.log(2.0 * np.pi)
        + 0.5 * _chol_logdet(g.chol)
        + 0.5 * trace_term
    )


def matrix_normal_log_pdf(d: MatrixNormalWishart, a: np.ndarray, w_chol: np.ndarray) -> float:
    """ln MN(A | mean, row_precision^{-1}, W^{-1}) for W = w_chol w_chol'."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape != d.mean.shape:
        raise DistributionError(f"A has shape {a.shape}, expected {d.mean.shape}")
    d_x, d_y = d.mean.shape
    resid = a - d.mean
    # Tr[W resid' Lambda resid] via triangular factors of both precisions.
    half = d.chol_row_precision.T @ resid @ w_chol
    quad = float(np.sum(half * half))
    return (
        -0.5 * d_x * d_y * np.log(2.0 * np.pi)
        + 0.5 * d_y * _chol_logdet(d.chol_row_precision)
        + 0.5 * d_x * _chol_logdet(w_chol)
        - 0.5 * quad
    )


def wishart_log_pdf(d: MatrixNormalWishart, w: np.ndarray, w_chol: np.ndarray) -> float:
    """ln W(W | scatter^{-1}, dof) for W = w_chol w_chol'."""
    p = d.d_y
    nu = d.dof
    log_det_w = _chol_logdet(w_chol)
    return float(
        0.5 * (nu - p - 1.0) * log_det_w
        - 0.5 * float(np.trace(d.scatter @ w))
        - 0.5 * nu * p * np.log(2.0)
        + 0.5 * nu * _chol_logdet(d.chol_scatter)
        - multigammaln(0.5 * nu, p)
    )


def mnw_log_pdf(d: MatrixNormalWishart, a: np.ndarray, w: np.ndarray) -> float:
    """Joint log density of coefficients ``a`` and precision ``w``.

    Factorizes as matrix-normal (conditional on W) times Wishart.
    """
    w, w_chol = spd_cholesky(w, "W")
    if w.shape[0] != d.d_y:
        raise DistributionError(f"W is {w.shape}, expected ({d.d_y}, {d.d_y})")
    return matrix_normal_log_pdf(d, a, w_chol) + wishart_log_pdf(d, w, w_chol)
