"""Closed-loop trial orchestration, metrics and CSV emission.

Each step plans (or MPC-selects) a control, applies it to the plant, scores
the arriving observation under the pre-update predictive (the realized free
energy), then updates beliefs and buffers. Trials are deterministic given
the config seed; CSV floats carry 17 significant digits so a replay of the
filter over the logged stream reproduces the free-energy column exactly.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import sim
from .config import TrialConfig, config_items
from .filtering import (
    NumericalBreakdownError,
    negative_log_evidence,
    push_buffers,
    update_beliefs,
)
from .mpc import mpc_select_sequence
from .planning import plan

CSV_HEADER = "k,t,y1,y2,u1,u2,free_energy,dist_to_goal,ctrl_norm"
RNG_NAME = "PCG64"


@dataclass
class TrialRecord:
    config: TrialConfig
    k: np.ndarray
    t: np.ndarray
    y: np.ndarray
    u: np.ndarray
    free_energy: np.ndarray
    dist_to_goal: np.ndarray
    ctrl_norm: np.ndarray

    @property
    def steps(self) -> int:
        return self.k.shape[0]


@dataclass
class SweepResult:
    config: TrialConfig
    seeds: list[int]
    k: np.ndarray
    t: np.ndarray
    free_energy_mean: np.ndarray
    free_energy_std: np.ndarray
    dist_to_goal_mean: np.ndarray
    dist_to_goal_std: np.ndarray
    ctrl_norm_mean: np.ndarray
    ctrl_norm_std: np.ndarray
    records: list[TrialRecord]


def run_trial(cfg: TrialConfig) -> TrialRecord:
    beliefs = cfg.initial_beliefs()
    buf = cfg.initial_buffers()
    goal = cfg.goal_prior()
    cp = cfg.control_prior()
    box = cfg.control_box()
    goal_mean = np.asarray(cfg.goal_mean, dtype=float)
    plant = sim.init_state(cfg.plant, cfg.seed)
    u_limit = float(np.max(np.abs(np.concatenate([box.lo, box.hi]))))
    n = cfg.steps
    ys = np.empty((n, 2))
    us = np.empty((n, 2))
    fes = np.empty(n)
    prev_seq = None
    for k in range(1, n + 1):
        try:
            if cfg.agent == "efe":
                u = plan(beliefs, buf, goal, cp, box, cfg.horizon, cfg.sweeps).controls[0]
            else:
                seq = mpc_select_sequence(
                    beliefs, buf, cp, box, goal_mean, cfg.horizon, warm_start=prev_seq
                )
                u = seq[0]
                prev_seq = np.vstack([seq[1:], seq[-1:]])
            if not box.contains(u):
                raise NumericalBreakdownError(f"selected control {u} left the box")
            u = box.clip(u)
            plant, y = sim.step(plant, u, cfg.plant, u_limit)
            fe = negative_log_evidence(beliefs, u, y, buf)
            beliefs = update_beliefs(beliefs, u, y, buf)
            buf = push_buffers(buf, u, y)
        except NumericalBreakdownError as exc:
            raise NumericalBreakdownError(f"step {k}: {exc}") from exc
        ys[k - 1] = y
        us[k - 1] = u
        fes[k - 1] = fe
    ks = np.arange(1, n + 1)
    return TrialRecord(
        config=cfg,
        k=ks,
        t=ks * cfg.plant.dt,
        y=ys,
        u=us,
        free_energy=fes,
        dist_to_goal=np.linalg.norm(ys - goal_mean, axis=1),
        ctrl_norm=np.linalg.norm(us, axis=1),
    )


def replay_free_energy(cfg: TrialConfig, u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Recompute the free-energy column from a logged (u, y) stream by
    replaying the filter; bit-for-bit equal to the live trial."""
    beliefs = cfg.initial_beliefs()
    buf = cfg.initial_buffers()
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = negative_log_evidence(beliefs, u[i], y[i], buf)
        beliefs = update_beliefs(beliefs, u[i], y[i], buf)
        buf = push_buffers(buf, u[i], y[i])
    return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trial_csv_text(rec: TrialRecord) -> str:
    out = io.StringIO()
    out.write(f"# efeagent trial, rng = {RNG_NAME}\n")
    for key, value in config_items(rec.config):
        from .config import _format_value

        out.write(f"# {key} = {_format_value(value)}\n")
    out.write(CSV_HEADER + "\n")
    for i in range(rec.steps):
        row = [
            str(int(rec.k[i])),
            _fmt(rec.t[i]),
            _fmt(rec.y[i, 0]),
            _fmt(rec.y[i, 1]),
            _fmt(rec.u[i, 0]),
            _fmt(rec.u[i, 1]),
            _fmt(rec.free_energy[i]),
            _fmt(rec.dist_to_goal[i]),
            _fmt(rec.ctrl_norm[i]),
        ]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def write_trial_csv(rec: TrialRecord, path: str | Path) -> None:
    Path(path).write_text(trial_csv_text(rec))


def read_trial_csv(path: str | Path) -> tuple[dict, np.ndarray]:
    """Parse a trial CSV into (comment metadata, data array)."""
    meta: dict = {}
    rows = []
    header_seen = False
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != CSV_HEADER:
                raise ValueError(f"unexpected CSV header: {line!r}")
            header_seen = True
            continue
        if line:
            rows.append([float(part) for part in line.split(",")])
    return meta, np.asarray(rows)


def _trial_for_seed(cfg: TrialConfig, seed: int) -> TrialRecord:
    from dataclasses import replace

    return run_trial(replace(cfg, seed=seed))


def run_sweep(cfg: TrialConfig, n_seeds: int, workers: int = 1) -> SweepResult:
    """Run ``n_seeds`` trials (seeds cfg.seed ... cfg.seed + n_seeds - 1,
    noise seed varies, everything else held fixed) and aggregate per-step
    mean and standard deviation of each metric."""
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    seeds = [cfg.seed + i for i in range(n_seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial_for_seed, [cfg] * n_seeds, seeds))
    else:
        records = [_trial_for_seed(cfg, s) for s in seeds]
    fe = np.stack([r.free_energy for r in records])
    dist = np.stack([r.dist_to_goal for r in records])
    ctrl = np.stack([r.ctrl_norm for r in records])
    return SweepResult(
        config=cfg,
        seeds=seeds,
        k=records[0].k,
        t=records[0].t,
        free_energy_mean=fe.mean(axis=0),
        free_energy_std=fe.std(axis=0),
        dist_to_goal_mean=dist.mean(axis=0),
        dist_to_goal_std=dist.std(axis=0),
        ctrl_norm_mean=ctrl.mean(axis=0),
        ctrl_norm_std=ctrl.std(axis=0),
        records=records,
    )


SWEEP_HEADER = (
    "k,t,free_energy_mean,free_energy_std,dist_to_goal_mean,dist_to_goal_std,"
    "ctrl_norm_mean,ctrl_norm_std"
)


def sweep_csv_text(sweep: SweepResult) -> str:
    out = io.StringIO()
    out.write(f"# efeagent sweep, rng = {RNG_NAME}\n")
    out.write(f"# seeds = [{', '.join(str(s) for s in sweep.seeds)}]\n")
    for key, value in config_items(sweep.config):
        from .config import _format_value

        out.write(f"# {key} = {_format_value(value)}\n")
    out.write(SWEEP_HEADER + "\n")
    for i in range(sweep.k.shape[0]):
        row = [
            str(int(sweep.k[i])),
            _fmt(sweep.t[i]),
            _fmt(sweep.free_energy_mean[i]),
            _fmt(sweep.free_energy_std[i]),
            _fmt(sweep.dist_to_goal_mean[i]),
            _fmt(sweep.dist_to_goal_std[i]),
            _fmt(sweep.ctrl_norm_mean[i]),
            _fmt(sweep.ctrl_norm_std[i]),
        ]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def write_sweep_csv(sweep: SweepResult, path: str | Path) -> None:
    Path(path).write_text(sweep_csv_text(sweep))
