"""Built-in fixture checks behind the CLI ``check`` verb.

A fast, self-contained subset of the oracle and property suite: conjugacy
against the batch posterior, entropy against quadrature, the control
optimizer against an exhaustive grid, the objective-equivalence property,
CSV determinism and the free-energy replay. The full suite lives in the
pytest tests.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.integrate import quad

from .config import TrialConfig
from .distributions import LocationScaleT, MatrixNormalWishart, t_entropy, t_log_pdf
from .filtering import ArxBeliefs, Buffers, push_buffers, update_beliefs
from .harness import replay_free_energy, run_trial, trial_csv_text
from .boxopt import grid_points
from .planning import (
    ControlBox,
    ControlPrior,
    GoalPrior,
    _NodeObjective,
    _PlanContext,
    efe,
    select_control,
)


def _random_beliefs(rng, d_u=2, d_y=2, m_u=2, m_y=2, n_obs=6):
    beliefs = TrialConfig(m_u=m_u, m_y=m_y).initial_beliefs()
    buf = Buffers.zeros(d_u, d_y, m_u, m_y)
    for _ in range(n_obs):
        u = rng.uniform(-1, 1, d_u)
        y = rng.normal(0.0, 0.5, d_y)
        beliefs = update_beliefs(beliefs, u, y, buf)
        buf = push_buffers(buf, u, y)
    return beliefs, buf


def check_conjugacy() -> bool:
    rng = np.random.default_rng(7)
    cfg = TrialConfig()
    beliefs = cfg.initial_beliefs()
    buf = cfg.initial_buffers()
    prior = beliefs.posterior
    xs, ys = [], []
    from .filtering import make_regressor

    for _ in range(50):
        u = rng.uniform(-1, 1, 2)
        y = rng.normal(0, 1, 2)
        xs.append(make_regressor(u, buf))
        ys.append(y)
        beliefs = update_beliefs(beliefs, u, y, buf)
        buf = push_buffers(buf, u, y)
    x_mat = np.asarray(xs)
    y_mat = np.asarray(ys)
    lam_b = prior.row_precision + x_mat.T @ x_mat
    m_b = np.linalg.solve(lam_b, prior.row_precision @ prior.mean + x_mat.T @ y_mat)
    omega_b = (
        prior.scatter
        + y_mat.T @ y_mat
        + prior.mean.T @ prior.row_precision @ prior.mean
        - m_b.T @ lam_b @ m_b
    )
    post = beliefs.posterior
    rel = lambda a, b: float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(b))))
    return (
        rel(post.row_precision, lam_b) < 1e-8
        and rel(post.mean, m_b) < 1e-8
        and rel(post.scatter, omega_b) < 1e-8
        and post.dof == prior.dof + 50
    )


def check_entropy_quadrature() -> bool:
    d = LocationScaleT(5.0, np.array([0.3]), np.array([[0.8]]))
    integrand = lambda y: -np.exp(t_log_pdf(d, np.array([y]))) * t_log_pdf(d, np.array([y]))
    val, _ = quad(integrand, -np.inf, np.inf, limit=200)
    return abs(val - t_entropy(d)) < 1e-6


def check_optimizer_grid() -> bool:
    rng = np.random.default_rng(21)
    beliefs, buf = _random_beliefs(rng)
    goal = GoalPrior(np.array([0.4, -0.2]), 0.3 * np.eye(2))
    cp = ControlPrior(1e-3 * np.eye(2))
    box = ControlBox(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    u_hat = select_control(beliefs, buf, goal, cp, box)
    obj = _NodeObjective(_PlanContext(beliefs), buf.tail(), goal, cp)
    pts = grid_points(box.lo, box.hi, 201)
    grid_best = pts[int(np.argmin(obj.batch_values(pts)))]
    return float(np.max(np.abs(u_hat - grid_best))) <= 0.011


def check_objective_equivalence() -> bool:
    from .planning import standard_fe

    rng = np.random.default_rng(5)
    beliefs, buf = _random_beliefs(rng)
    goal = GoalPrior(np.array([-0.3, 0.5]), 0.4 * np.eye(2))
    probes = [rng.uniform(-1, 1, 2) for _ in range(6)]
    diffs = [
        standard_fe(beliefs, buf, u, goal) - efe(beliefs, buf, u, goal) for u in probes
    ]
    return float(np.ptp(diffs)) < 1e-8


def check_determinism() -> bool:
    cfg = TrialConfig(agent="efe", steps=30, seed=11)
    a = trial_csv_text(run_trial(cfg))
    b = trial_csv_text(run_trial(cfg))
    return a == b


def check_replay() -> bool:
    cfg = TrialConfig(agent="mpc", steps=40, seed=3)
    rec = run_trial(cfg)
    replayed = replay_free_energy(cfg, rec.u, rec.y)
    return bool(np.array_equal(replayed, rec.free_energy))


CHECKS = [
    ("conjugacy vs batch posterior", check_conjugacy),
    ("t entropy vs quadrature", check_entropy_quadrature),
    ("control optimizer vs grid", check_optimizer_grid),
    ("efe/standard-fe equivalence", check_objective_equivalence),
    ("trial determinism", check_determinism),
    ("free-energy replay", check_replay),
]


def run_checks(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        ok = fn()
        all_ok = all_ok and ok
        if verbose:
            print(f"check {name}: {'PASS' if ok else 'FAIL'}")
    return all_ok
