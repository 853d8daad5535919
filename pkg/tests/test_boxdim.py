import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nadim.boxdim import (
    PointCloud,
    cantor_points,
    covering_number,
    dyadic_scales,
    embed_trajectory,
    minkowski_dim,
)
from nadim.dde import Trajectory, integrate, linear_system


def test_covering_examples():
    assert covering_number(PointCloud([[0.3, 0.7]]), 0.01) == 1
    assert covering_number(PointCloud([[0.0], [1.0]]), 0.25) == 2
    sq = PointCloud(np.random.default_rng(0).random((10_000, 2)))
    assert covering_number(sq, 0.5) == 4


def test_single_point_has_dimension_zero():
    fit = minkowski_dim(PointCloud([[1.0, 2.0]]), 1 / 64, 1 / 2)
    assert fit.estimate == 0.0


def test_segment():
    t = np.random.default_rng(1).random(10_000)
    fit = minkowski_dim(PointCloud(np.c_[t, 0.5 * t]), 1 / 1024, 1 / 16)
    assert abs(fit.estimate - 1) <= 0.05 and fit.reliable


def test_cantor():
    fit = minkowski_dim(PointCloud(cantor_points(10)), 3.0**-10, 0.25)
    assert abs(fit.estimate - math.log(2) / math.log(3)) <= 0.05


def test_scales_and_validation():
    assert dyadic_scales(1 / 8, 1) == [1, 0.5, 0.25, 0.125]
    with pytest.raises(ValueError):
        minkowski_dim(PointCloud([[0.0]]), 0.5, 0.25)
    with pytest.raises(ValueError):
        minkowski_dim(PointCloud([[0.0]]), 0.4, 1.0)
    with pytest.raises(ValueError):
        PointCloud([[float("nan")]])


def test_few_scales_flagged_unreliable():
    fit = minkowski_dim(PointCloud(np.random.default_rng(0).random((500, 1))), 1 / 8, 1)
    assert not fit.reliable


def test_csv_roundtrip(tmp_path):
    cloud = PointCloud(np.random.default_rng(2).random((20, 3)))
    cloud.to_csv(tmp_path / "c.csv")
    back = PointCloud.from_csv(tmp_path / "c.csv")
    assert np.array_equal(back.points, cloud.points)


def _cosine_trajectory(T=30.0, h=2.5e-4):
    S = linear_system(1.0, 1, [(-math.pi / 2, 1.0)])
    return integrate(S, lambda s: math.cos(math.pi * s / 2), 0.0, T, h)


def test_constant_trajectory_embeds_to_a_point():
    tr = Trajectory.from_function(lambda t: 2.0, 0.0, 5.0, 1 / 64)
    cloud = embed_trajectory(tr, 1.0, 4)
    assert np.unique(cloud.points, axis=0).shape[0] == 1
    assert minkowski_dim(cloud, 1 / 64, 1 / 2).estimate == 0.0


def test_periodic_trajectory_is_a_curve():
    cloud = embed_trajectory(_cosine_trajectory(), 1.0, 8)
    fit = minkowski_dim(cloud, 1 / 128, 1 / 4)
    assert abs(fit.estimate - 1) <= 0.1


def test_scalar_embedding_at_most_one():
    cloud = embed_trajectory(_cosine_trajectory(10.0, 1e-3), 1.0, 1)
    assert cloud.dim == 1
    assert minkowski_dim(cloud, 1 / 256, 1 / 4).estimate <= 1 + 0.1


clouds = st.tuples(st.integers(1, 3), st.integers(0, 10**6), st.sampled_from(["uniform", "segment", "cantor"]))


def _cloud(spec):
    D, seed, kind = spec
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return PointCloud(rng.random((20_000, D)))
    if kind == "segment":
        t = rng.random(3000)
        return PointCloud(np.outer(t, rng.uniform(0.2, 1.0, D)))
    c = cantor_points(8)
    pts = np.zeros((len(c), D))
    pts[:, 0] = c
    return PointCloud(pts)


@settings(max_examples=30, deadline=None)
@given(clouds, st.floats(1e-4, 0.5))
def test_covering_nonincreasing_in_eps(spec, eps):
    cloud = _cloud(spec)
    assert covering_number(cloud, 2 * eps) <= covering_number(cloud, eps)


@settings(max_examples=30, deadline=None)
@given(clouds)
def test_estimate_bounded_by_ambient_dimension(spec):
    cloud = _cloud(spec)
    assert minkowski_dim(cloud, 1 / 256, 1 / 4).estimate <= cloud.dim + 0.1


@settings(max_examples=30, deadline=None)
@given(clouds)
def test_offset_robustness(spec):
    cloud = _cloud(spec)
    D = cloud.dim
    base = minkowski_dim(cloud, 1 / 1024, 1 / 16)
    shifted = minkowski_dim(cloud, 1 / 1024, 1 / 16, offset=0.5)
    for (e, k0), (_, k1) in zip(base.scales, shifted.scales):
        assert abs(math.log(k1) - math.log(k0)) <= D * math.log(2) + 1e-12
    assert abs(shifted.estimate - base.estimate) <= 0.1
