"""Ground-truth plant: a noisy planar double integrator.

State is [x, y, vx, vy]; controls are accelerations integrated over one
time step; observations are the two positions plus measurement noise. Noise
draws come from a per-trial PCG64 generator so trajectories are exactly
reproducible from the recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class PlantConfig:
    dt: float = 0.1
    process_noise: tuple[float, float] = (1e-6, 1e-6)
    measurement_noise: tuple[float, float] = (1e-3, 1e-3)
    z0: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if min(self.process_noise) < 0 or min(self.measurement_noise) < 0:
            raise ValueError("noise intensities must be nonnegative")


@dataclass
class PlantState:
    z: np.ndarray
    rng: np.random.Generator


def build_matrices(cfg: PlantConfig):
    """Discrete-time system matrices (F, B, C, Q, R) for the double integrator."""
    dt = cfg.dt
    f = np.array(
        [
            [1.0, 0.0, dt, 0.0],
            [0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    b = np.array([[0.0, 0.0], [0.0, 0.0], [dt, 0.0], [0.0, dt]])
    c = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    s1, s2 = cfg.process_noise
    q = np.array(
        [
            [dt**3 / 3 * s1, 0.0, dt**2 / 2 * s1, 0.0],
            [0.0, dt**3 / 3 * s2, 0.0, dt**2 / 2 * s2],
            [dt**2 / 2 * s1, 0.0, dt * s1, 0.0],
            [0.0, dt**2 / 2 * s2, 0.0, dt * s2],
        ]
    )
    r = np.diag(cfg.measurement_noise).astype(float)
    return f, b, c, q, r


def _psd_factor(q: np.ndarray) -> np.ndarray:
    """Lower factor L with L L' = q; zero-variance dimensions get zero columns."""
    active = np.flatnonzero(np.diag(q) > 0.0)
    factor = np.zeros_like(q)
    if active.size:
        sub = q[np.ix_(active, active)]
        factor[np.ix_(active, active)] = np.linalg.cholesky(sub)
    return factor


@lru_cache(maxsize=8)
def _cached_system(cfg: PlantConfig):
    f, b, c, q, r = build_matrices(cfg)
    return f, b, c, _psd_factor(q), _psd_factor(r)


def init_state(cfg: PlantConfig, seed: int) -> PlantState:
    return PlantState(z=np.asarray(cfg.z0, dtype=float), rng=np.random.default_rng(seed))


def step(
    s: PlantState,
    u: np.ndarray,
    cfg: PlantConfig,
    u_limit: float | None = 1.0,
) -> tuple[PlantState, np.ndarray]:
    """Advance one time step and return (new state, noisy position observation).

    The plant never clips controls; it asserts they are finite and, when a
    limit is given, inside the declared per-axis bound.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not np.all(np.isfinite(u)):
        raise ValueError(f"non-finite control: {u}")
    if u_limit is not None and float(np.max(np.abs(u))) > u_limit * (1.0 + 1e-9):
        raise ValueError(f"control {u} exceeds the declared bound {u_limit}")
    f, b, c, chol_q, chol_r = _cached_system(cfg)
    w = chol_q @ s.rng.standard_normal(4)
    z_new = f @ s.z + b @ u + w
    v = chol_r @ s.rng.standard_normal(2)
    y = c @ z_new + v
    return PlantState(z=z_new, rng=s.rng), y
