import numpy as np
import pytest

from efeagent.distributions import MatrixNormalWishart
from efeagent.filtering import ArxBeliefs, Buffers, push_buffers, update_beliefs


def random_spd(rng, n, scale=1.0):
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T + n * np.eye(n))


def random_mnw(rng, d_x, d_y, nu=None):
    nu = float(nu if nu is not None else d_y + rng.integers(5, 40))
    return MatrixNormalWishart(
        mean=rng.normal(size=(d_x, d_y)),
        row_precision=random_spd(rng, d_x),
        scatter=random_spd(rng, d_y),
        dof=nu,
    )


def fresh_beliefs(d_u=2, d_y=2, m_u=2, m_y=2, nu0=100.0, lam0=1e-2, omega0=1.0):
    d_x = d_u * (m_u + 1) + d_y * m_y
    prior = MatrixNormalWishart(
        mean=np.eye(d_x, d_y) / (d_x * d_y),
        row_precision=lam0 * np.eye(d_x),
        scatter=omega0 * np.eye(d_y),
        dof=nu0,
    )
    return ArxBeliefs(prior, d_u, d_y, m_u, m_y)


def trained_beliefs(rng, d_u=2, d_y=2, m_u=2, m_y=2, n_obs=8, u_scale=1.0, y_scale=0.7):
    """Beliefs after a handful of random observations, plus the final buffers."""
    beliefs = fresh_beliefs(d_u, d_y, m_u, m_y)
    buf = Buffers.zeros(d_u, d_y, m_u, m_y)
    for _ in range(n_obs):
        u = rng.uniform(-u_scale, u_scale, d_u)
        y = rng.normal(0.0, y_scale, d_y)
        beliefs = update_beliefs(beliefs, u, y, buf)
        buf = push_buffers(buf, u, y)
    return beliefs, buf


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
