import math

import numpy as np
import pytest

from semcompress.errors import DimensionMismatch, InvalidParameter
from semcompress.trajectory import (
    MhConfig,
    mh_step,
    read_trajectory_csv,
    sample_trajectory,
    write_trajectory_csv,
)
from semcompress.worldgen import MixtureSpec, pdf

ONE_D = MixtureSpec.from_centers([[0.3]], [[0.7]], 0.1)


def _normal_cdf(x, mu, sigma):
    return 0.5 * (1.0 + math.erf((x - mu) / (sigma * math.sqrt(2.0))))


def _binned_mixture(edges, centers, sigma):
    """Exact bin masses of an equal-weight 1-D normal mixture."""
    probs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        probs.append(sum(_normal_cdf(hi, c, sigma) - _normal_cdf(lo, c, sigma) for c in centers)
                     / len(centers))
    return np.array(probs)


def tv_distance(samples, centers, sigma, lo, hi, bins=100):
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    emp = counts / len(samples)
    ref = _binned_mixture(edges, centers, sigma)
    # mass outside the grid counts toward the distance on both sides
    outside_emp = 1.0 - emp.sum()
    outside_ref = 1.0 - ref.sum()
    return 0.5 * (np.abs(emp - ref).sum() + abs(outside_emp - outside_ref))


def _replay(spec, current, config, seed):
    """Recompute the proposal and uniform draw mh_step will consume."""
    r = np.random.default_rng(seed)
    noise = r.normal(0.0, config.proposal_stddev, size=(1, spec.dimension))
    u = r.random(1)[0]
    return np.asarray(current) + noise[0], u


def test_uphill_proposals_always_accepted():
    cfg = MhConfig(proposal_stddev=0.1)
    cur = np.array([0.05])
    seen = 0
    for seed in range(200):
        prop, _ = _replay(ONE_D, cur, cfg, seed)
        if pdf(ONE_D, prop) >= pdf(ONE_D, cur):
            seen += 1
            nxt, acc = mh_step(ONE_D, cur, cfg, np.random.default_rng(seed))
            assert acc and np.array_equal(nxt, prop)
    assert seen > 20


def test_underflowed_proposal_rejected():
    spec = MixtureSpec.from_centers([[0.0]], [[0.0]], 0.01)
    cfg = MhConfig(proposal_stddev=100.0)
    cur = np.array([0.3])
    checked = 0
    for seed in range(50):
        prop, _ = _replay(spec, cur, cfg, seed)
        if pdf(spec, prop) == 0.0:
            checked += 1
            nxt, acc = mh_step(spec, cur, cfg, np.random.default_rng(seed))
            assert not acc
            assert nxt.tobytes() == cur.tobytes()
    assert checked > 40


def test_mh_step_validates_state():
    with pytest.raises(DimensionMismatch):
        mh_step(ONE_D, [0.1, 0.2], MhConfig(), np.random.default_rng(0))


@pytest.mark.parametrize("kw", [dict(proposal_stddev=0.0), dict(burn_in=-1)])
def test_config_validation(kw):
    with pytest.raises(InvalidParameter):
        MhConfig(**kw)


def test_single_step_trajectory():
    cfg = MhConfig(burn_in=0)
    traj = sample_trajectory(ONE_D, 1, cfg, 11)
    assert traj.points.shape == (1, 1)
    # x_0 is drawn first, then the single recorded step is taken from it
    r = np.random.default_rng(11)
    cls = int(r.integers(0, 2))
    comp = int(r.choice(1, p=ONE_D.weights[cls]))
    x0 = ONE_D.centers[cls][comp] + r.normal(0.0, ONE_D.stddev, size=1)
    noise = r.normal(0.0, cfg.proposal_stddev, size=(1, 1))
    u = r.random(1)[0]
    prop = x0 + noise[0]
    expected = prop if u * pdf(ONE_D, x0) < pdf(ONE_D, prop) else x0
    assert np.array_equal(traj.points[0], expected)


def test_same_seed_identical(world):
    a = sample_trajectory(world, 2000, MhConfig(), 5)
    b = sample_trajectory(world, 2000, MhConfig(), 5)
    assert np.array_equal(a.points, b.points) and a.accept_rate == b.accept_rate


def test_default_accept_rate_in_band(world):
    traj = sample_trajectory(world, 50_000, MhConfig(), 0)
    assert len(traj) == 50_000 and traj.dimension == 2
    assert 0.2 <= traj.accept_rate <= 0.8


def test_rejections_repeat_state_bitwise(world):
    traj = sample_trajectory(world, 5000, MhConfig(), 3)
    same = np.all(traj.points[1:] == traj.points[:-1], axis=1)
    # stationary moves are exact copies; the realized acceptance matches the change count
    assert abs((1.0 - same.mean()) - traj.accept_rate) < 1e-3


def test_one_dimensional_marginal_tv():
    traj = sample_trajectory(ONE_D, 200_000, MhConfig(proposal_stddev=0.1), 2)
    tv = tv_distance(traj.points[:, 0], [0.3, 0.7], 0.1, -0.2, 1.2)
    assert tv <= 0.03


@pytest.mark.slow
def test_two_dimensional_axis_marginals(world):
    traj = sample_trajectory(world, 400_000, MhConfig(), 4)
    centers = np.vstack(world.centers)
    for k in range(2):
        tv = tv_distance(traj.points[:, k], centers[:, k], world.stddev, -0.2, 1.2)
        assert tv <= 0.05


def test_detailed_balance_on_bins():
    traj = sample_trajectory(ONE_D, 1_000_000, MhConfig(proposal_stddev=0.1), 8)
    bins = np.clip(np.floor((traj.points[:, 0] + 0.2) / 0.07).astype(int), 0, 19)
    a, b = bins[:-1], bins[1:]
    moved = a != b
    flow = np.zeros((20, 20))
    np.add.at(flow, (a[moved], b[moved]), 1)
    checked = 0
    for i in range(20):
        for j in range(i + 1, 20):
            n = flow[i, j] + flow[j, i]
            if n >= 50:
                checked += 1
                assert abs(flow[i, j] - flow[j, i]) <= 3 * math.sqrt(n)
    assert checked >= 10


def test_csv_round_trip(world, tmp_path):
    traj = sample_trajectory(world, 300, MhConfig(), 1)
    write_trajectory_csv(traj, tmp_path / "s.csv")
    back = read_trajectory_csv(tmp_path / "s.csv")
    assert np.array_equal(back.points, traj.points)
    assert back.accept_rate == pytest.approx(traj.accept_rate, abs=1 / 300)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,x_0,x_1"
