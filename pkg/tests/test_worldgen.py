import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcompress.errors import CenterOutOfBounds, DimensionMismatch, InvalidParameter
from semcompress.worldgen import (
    MixtureSpec,
    WorldConfig,
    build_mixture,
    pdf,
    posterior_labels,
    read_dataset_csv,
    sample_labeled,
    write_dataset_csv,
)

from oracles import trapezoid


def test_single_component_placed_off_diagonal():
    spec = build_mixture(WorldConfig(lines_per_class=1, components_per_line=1, line_offset=0.2))
    s = 0.2 / math.sqrt(2)
    np.testing.assert_allclose(spec.centers[0][0], [0.5 - s, 0.5 + s], atol=1e-15)
    np.testing.assert_allclose(spec.centers[1][0], [0.5 + s, 0.5 - s], atol=1e-15)


def test_consecutive_centers_equidistant():
    spec = build_mixture(WorldConfig(lines_per_class=1, components_per_line=3, component_spacing=0.3))
    for c in spec.centers:
        gaps = np.linalg.norm(np.diff(c, axis=0), axis=1)
        np.testing.assert_allclose(gaps, 0.3, rtol=0, atol=1e-12)


def test_four_dimensional_centers_inside_cube():
    spec = build_mixture(WorldConfig(dimension=4, lines_per_class=2, components_per_line=4))
    for c in spec.centers:
        assert c.shape == (8, 4)
        for center in c:
            for v in center:
                assert 0.0 <= v <= 1.0


def test_default_world_inside_cube():
    spec = build_mixture()
    assert spec.components_per_class == 10
    for c in spec.centers:
        assert c.min() >= 0 and c.max() <= 1


def test_out_of_bounds_rejected():
    with pytest.raises(CenterOutOfBounds):
        build_mixture(WorldConfig(component_spacing=0.4))


@pytest.mark.parametrize("kw", [dict(dimension=0), dict(component_stddev=0.0),
                                dict(components_per_line=0), dict(line_offset=-0.1)])
def test_invalid_config(kw):
    with pytest.raises(InvalidParameter):
        build_mixture(WorldConfig(**kw))


def test_peak_density():
    sigma = 0.07
    spec = MixtureSpec.from_centers([[0.3, 0.4]], [[0.8, 0.1]], sigma)
    assert pdf(spec, [0.3, 0.4], 0) == pytest.approx((2 * math.pi * sigma**2) ** -1, rel=1e-12)


def test_one_dimensional_density_integrates_to_one():
    spec = build_mixture(WorldConfig(dimension=1, lines_per_class=2, components_per_line=3,
                                     line_offset=0.0, component_spacing=0.2))
    step = 1e-4
    xs = np.arange(-10.0, 11.0 + step / 2, step)[:, None]
    for cls in (0, 1, None):
        assert trapezoid(pdf(spec, xs, cls), step) == pytest.approx(1.0, abs=1e-6)


def test_joint_is_equal_weight_mixture(world, rng):
    x = rng.random((100, 2))
    np.testing.assert_allclose(pdf(world, x), 0.5 * pdf(world, x, 0) + 0.5 * pdf(world, x, 1),
                               rtol=0, atol=1e-12)


def test_pdf_dimension_checked(world):
    with pytest.raises(DimensionMismatch):
        pdf(world, [0.1, 0.2, 0.3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 4), min_size=2, max_size=2))
def test_pdf_nonnegative(x):
    spec = build_mixture()
    assert pdf(spec, x) >= 0


def test_class_balance():
    spec = MixtureSpec.from_centers([[0.2, 0.2]], [[0.8, 0.8]], 0.05)
    data = sample_labeled(spec, 10000, np.random.default_rng(5))
    # 99% binomial interval half-width is 2.576*0.005 = 0.0129 < 0.02
    assert abs(data.labels.mean() - 0.5) <= 0.02


def test_sample_mean_clt_bound():
    sigma = 0.05
    spec = MixtureSpec.from_centers([[0.3, 0.6]], [[0.3, 0.6]], sigma)
    n = 10000
    data = sample_labeled(spec, n, np.random.default_rng(9))
    bound = 4 * sigma / math.sqrt(n)
    assert np.all(np.abs(data.points.mean(axis=0) - [0.3, 0.6]) <= bound)


def test_large_sample_moments_match_mixture(world):
    n = 100_000
    data = sample_labeled(world, n, np.random.default_rng(17))
    centers = np.vstack(world.centers)
    mean = centers.mean(axis=0)
    var = ((centers - mean) ** 2).mean(axis=0) + world.stddev**2
    se = np.sqrt(var / n)
    assert np.all(np.abs(data.points.mean(axis=0) - mean) <= 3 * se)


def test_same_seed_identical(world, tmp_path):
    a = sample_labeled(world, 500, np.random.default_rng(3))
    b = sample_labeled(world, 500, np.random.default_rng(3))
    write_dataset_csv(a, tmp_path / "a.csv")
    write_dataset_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_dataset_csv_round_trip(world, tmp_path):
    a = sample_labeled(world, 50, np.random.default_rng(1))
    write_dataset_csv(a, tmp_path / "z.csv")
    b = read_dataset_csv(tmp_path / "z.csv")
    assert np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)
    assert [s.label for s in b] == a.labels.tolist()


def test_posterior_labels_follow_density(world):
    rng = np.random.default_rng(0)
    c0 = np.repeat(world.centers[0][:1], 2000, axis=0)
    labels = posterior_labels(world, c0, rng)
    assert labels.mean() < 0.05
