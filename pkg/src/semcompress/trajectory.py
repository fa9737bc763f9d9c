"""Random-walk Metropolis-Hastings trajectories over the joint mixture density."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .worldgen import MixtureSpec, pdf


@dataclass(frozen=True)
class MhConfig:
    proposal_stddev: float = 0.05
    burn_in: int = 1000

    def __post_init__(self):
        if not self.proposal_stddev > 0:
            raise InvalidParameter("proposal_stddev must be > 0")
        if self.burn_in < 0:
            raise InvalidParameter("burn_in must be >= 0")


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    seed: int | None
    accept_rate: float

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)


def _flat_mixture(spec: MixtureSpec):
    centers = np.vstack(spec.centers)
    weights = 0.5 * np.concatenate(spec.weights)
    norm = (2.0 * math.pi * spec.stddev**2) ** (-spec.dimension / 2.0)
    return centers, weights * norm, 1.0 / (2.0 * spec.stddev**2)


@numba.njit(cache=True)
def _joint_density(x, centers, scaled_weights, inv_two_var):
    total = 0.0
    for c in range(centers.shape[0]):
        sq = 0.0
        for k in range(centers.shape[1]):
            diff = x[k] - centers[c, k]
            sq += diff * diff
        total += scaled_weights[c] * math.exp(-sq * inv_two_var)
    return total


@numba.njit(cache=True)
def _run_chain(start, noise, uniforms, centers, scaled_weights, inv_two_var, keep_from):
    """Advance the chain one step per row of ``noise``; record states from ``keep_from`` on."""
    n_steps, d = noise.shape
    out = np.empty((n_steps - keep_from, d))
    accepted = np.zeros(n_steps, dtype=np.bool_)
    cur = start.copy()
    p_cur = _joint_density(cur, centers, scaled_weights, inv_two_var)
    prop = np.empty(d)
    for s in range(n_steps):
        for k in range(d):
            prop[k] = cur[k] + noise[s, k]
        p_prop = _joint_density(prop, centers, scaled_weights, inv_two_var)
        # u < p_prop / p_cur without the division; p_prop == 0 never passes
        if uniforms[s] * p_cur < p_prop:
            for k in range(d):
                cur[k] = prop[k]
            p_cur = p_prop
            accepted[s] = True
        if s >= keep_from:
            for k in range(d):
                out[s - keep_from, k] = cur[k]
    return out, accepted


def mh_step(spec: MixtureSpec, current, config: MhConfig, rng: np.random.Generator):
    """One Metropolis-Hastings transition. Returns ``(next_state, accepted)``."""
    cur = np.asarray(current, dtype=float)
    if cur.shape != (spec.dimension,):
        raise DimensionMismatch("current state has the wrong dimension")
    if not pdf(spec, cur) > 0:
        raise InvalidParameter("current state must have positive density")
    noise = rng.normal(0.0, config.proposal_stddev, size=(1, spec.dimension))
    u = rng.random(1)
    out, acc = _run_chain(cur, noise, u, *_flat_mixture(spec), 0)
    return out[0], bool(acc[0])


def _draw_start(spec: MixtureSpec, rng: np.random.Generator) -> np.ndarray:
    cls = int(rng.integers(0, 2))
    comp = int(rng.choice(len(spec.centers[cls]), p=spec.weights[cls]))
    return spec.centers[cls][comp] + rng.normal(0.0, spec.stddev, size=spec.dimension)


def sample_trajectory(spec: MixtureSpec, T: int, config: MhConfig = MhConfig(),
                      rng: np.random.Generator | int | None = None) -> Trajectory:
    """Run ``burn_in`` discarded steps from x_0 ~ joint, then record ``T`` consecutive states."""
    if T < 1:
        raise InvalidParameter("trajectory length must be >= 1")
    seed = rng if isinstance(rng, int) else None
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    start = _draw_start(spec, rng)
    n_steps = config.burn_in + T
    noise = rng.normal(0.0, config.proposal_stddev, size=(n_steps, spec.dimension))
    uniforms = rng.random(n_steps)
    points, accepted = _run_chain(start, noise, uniforms, *_flat_mixture(spec), config.burn_in)
    rate = float(accepted[config.burn_in:].mean())
    return Trajectory(points, seed, rate)


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    d = traj.dimension
    header = "t," + ",".join(f"x_{k}" for k in range(d))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for t, row in enumerate(traj.points):
            fh.write(f"{t}," + ",".join(repr(float(v)) for v in row) + "\n")


def read_trajectory_csv(path: str | Path) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t" or any(h != f"x_{k}" for k, h in enumerate(header[1:])):
            raise InvalidParameter(f"{path}: not a trajectory CSV (header {header})")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    if len(rows) and not np.array_equal(rows[:, 0], np.arange(len(rows))):
        raise InvalidParameter(f"{path}: time index must run 0..T-1")
    points = np.ascontiguousarray(rows[:, 1:]) if len(rows) else np.empty((0, len(header) - 1))
    # acceptance recovered from state changes; exact unless a proposal equals the state
    moves = np.any(points[1:] != points[:-1], axis=1)
    rate = float(moves.mean()) if len(moves) else 0.0
    return Trajectory(points, None, rate)
