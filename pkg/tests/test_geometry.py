import math

import numpy as np
import pytest

from risnoma import _random
from risnoma.config import ScenarioConfig
from risnoma.errors import InvalidArgument
from risnoma.geometry import (ChannelParams, SystemGeometry, bs_ris_channel, generate_channels,
                              los_probe_channel, pathloss, ris_user_channel, sample_user_positions,
                              steering_vector)


def test_steering_broadside_is_all_ones():
    np.testing.assert_allclose(steering_vector(0.0, 4, 0.5), np.ones(4), atol=1e-15)


def test_steering_endfire_alternates():
    np.testing.assert_allclose(steering_vector(90.0, 2, 0.5), [1, -1], atol=1e-12)


def test_steering_45_degrees_matches_direct_exponential():
    a = steering_vector(45.0, 3, 0.5)
    ref = np.array([complex(math.cos(math.pi * p * math.sqrt(2) / 2), math.sin(math.pi * p * math.sqrt(2) / 2))
                    for p in range(3)])
    np.testing.assert_allclose(a, ref, atol=1e-14)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-15)
    step = a[1:] / a[:-1]
    np.testing.assert_allclose(step, step[0], atol=1e-14)


@pytest.mark.parametrize("theta", [-90.0, -33.3, 0.0, 12.5, 89.9])
@pytest.mark.parametrize("m", [1, 5, 16])
def test_steering_unit_modulus(theta, m):
    np.testing.assert_allclose(np.abs(steering_vector(theta, m, 0.5)), 1.0, atol=1e-14)


def test_steering_rejects_non_finite_angle():
    with pytest.raises(InvalidArgument):
        steering_vector(float("nan"), 4)
    with pytest.raises(InvalidArgument):
        steering_vector(float("inf"), 4)


def test_pathloss_values():
    assert pathloss(1.0, 2.2, 1e-3) == pytest.approx(1e-3)
    assert pathloss(7.0, 0.0, 0.25) == pytest.approx(0.25)
    assert pathloss(10.0, 2.2, 1e-3) == pytest.approx(10 ** (-3 - 2.2), rel=1e-12)
    assert pathloss(10.0, 2.2, 1e-3) == pytest.approx(6.31e-6, rel=1e-3)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_pathloss_rejects_non_positive_distance(d):
    with pytest.raises(InvalidArgument):
        pathloss(d, 2.2, 1e-3)


@pytest.mark.parametrize("seed", range(20))
def test_positions_inside_configured_ranges(seed):
    geo = SystemGeometry()
    pos = sample_user_positions(geo, seed)
    assert len(pos) == 2 * len(geo.cluster_angle_ranges)
    for (k, role), (angle, radius) in pos.items():
        lo, hi = geo.cluster_angle_ranges[k]
        assert lo < angle <= hi
        rlo, rhi = geo.rnu_radius_range if role == "n" else geo.rfu_radius_range
        assert rlo <= radius <= rhi
    for k in range(len(geo.cluster_angle_ranges)):
        assert pos[(k, "n")][0] == pos[(k, "f")][0]
    rnu = [r for (k, role), (_, r) in pos.items() if role == "n"]
    rfu = [r for (k, role), (_, r) in pos.items() if role == "f"]
    assert all(20 <= r <= 25 for r in rnu) and all(80 <= r <= 85 for r in rfu)


def test_degenerate_radius_interval():
    geo = SystemGeometry(rnu_radius_range=(20.0, 20.0))
    pos = sample_user_positions(geo, 3)
    assert all(r == 20.0 for (k, role), (_, r) in pos.items() if role == "n")


def test_positions_deterministic():
    geo = SystemGeometry()
    assert sample_user_positions(geo, 5) == sample_user_positions(geo, 5)
    assert sample_user_positions(geo, 5) != sample_user_positions(geo, 6)


def test_geometry_validation():
    with pytest.raises(InvalidArgument):
        SystemGeometry(rnu_radius_range=(25.0, 20.0))
    with pytest.raises(InvalidArgument):
        SystemGeometry(cluster_angle_ranges=((0.0, 10.0), (5.0, 15.0)))
    with pytest.raises(InvalidArgument):
        SystemGeometry(target_angles=(0.0,), target_radii=(1.0, 2.0))
    with pytest.raises(InvalidArgument):
        sample_user_positions(SystemGeometry(), 0, k_clusters=4)


def test_channel_shapes_and_determinism():
    cfg = ScenarioConfig(k_clusters=2, n_antennas=5, m_elements=7)
    pos = sample_user_positions(cfg.geometry, 11, 2)
    a = generate_channels(cfg, pos, 11)
    b = generate_channels(cfg, pos, 11)
    assert a.g_bs_ris.shape == (7, 5)
    assert set(a.g_ris_user) == {(0, "n"), (0, "f"), (1, "n"), (1, "f")}
    assert all(g.shape == (7,) for g in a.g_ris_user.values())
    assert np.array_equal(a.g_bs_ris, b.g_bs_ris)
    for key in a.g_ris_user:
        assert np.array_equal(a.g_ris_user[key], b.g_ris_user[key])
    assert np.isfinite(a.g_bs_ris).all()
    c = generate_channels(cfg, pos, 12)
    assert not np.array_equal(a.g_bs_ris, c.g_bs_ris)


def _draws(n, fn):
    return np.array([fn(_random.stream(0, 99, i)) for i in range(n)])


def test_pure_los_limit_has_no_spread():
    params = ChannelParams(rician_ru=1e9)
    x = _draws(2000, lambda r: ris_user_channel(10.0, 30.0, params, 4, r))
    power = np.mean(np.abs(x) ** 2)
    assert np.var(x, axis=0).max() < 1e-6 * power


def test_rayleigh_mean_power_matches_pathloss():
    params = ChannelParams(rician_ru=0.0)
    x = _draws(10000, lambda r: ris_user_channel(10.0, 30.0, params, 2, r))
    expected = pathloss(30.0, 2.2, 1e-3)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(expected, rel=0.1)


def test_los_fraction_is_three_quarters():
    params = ChannelParams()
    los = math.sqrt(pathloss(30.0, 2.2, 1e-3)) * steering_vector(10.0, 4, 0.5)
    x = _draws(10000, lambda r: ris_user_channel(10.0, 30.0, params, 4, r))
    mean = x.mean(axis=0)
    # the mean of a Rician draw is its scaled LoS part
    frac = np.sum(np.abs(mean) ** 2) / np.mean(np.sum(np.abs(x) ** 2, axis=1))
    assert frac == pytest.approx(0.75, rel=0.05)
    np.testing.assert_allclose(mean, math.sqrt(0.75) * los, atol=0.05 * np.abs(los).max())


def test_doubling_distance_scales_power():
    params = ChannelParams(rician_ru=3.0)
    near = _draws(10000, lambda r: ris_user_channel(0.0, 20.0, params, 2, r))
    far = _draws(10000, lambda r: ris_user_channel(0.0, 40.0, params, 2, r))
    ratio = np.mean(np.abs(far) ** 2) / np.mean(np.abs(near) ** 2)
    assert ratio == pytest.approx(2.0 ** -2.2, rel=0.1)


def test_bs_ris_los_is_rank_one():
    params = ChannelParams(rician_br=1e12)
    g = bs_ris_channel(SystemGeometry(), params, 4, 6, _random.stream(0, 7))
    s = np.linalg.svd(g, compute_uv=False)
    assert s[1] < 1e-5 * s[0]


def test_probe_channel_is_scaled_steering():
    params = ChannelParams()
    h = los_probe_channel(30.0, 50.0, params, 5)
    np.testing.assert_allclose(h, math.sqrt(pathloss(50.0, 2.2, 1e-3)) * steering_vector(30.0, 5, 0.5))
