import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risnoma.errors import InvalidArgument
from risnoma.geometry import ChannelSet, steering_vector
from risnoma.metrics import (Solution, achievable_rates, beampattern_gain_direct, beampattern_gain_trace,
                             beampattern_profile, build_effective_matrices, build_sensing_spec,
                             illumination_power, link_gains, link_gains_trace, oma_rates,
                             passive_mat_from_vec, passive_vec_from_mat, qos_rate_thresholds,
                             upsilon_matrix)

from conftest import crandn, rand_unit


def random_channels(rng, n=3, m=4, k=2):
    g = crandn(rng, m, n)
    users = {(c, r): crandn(rng, m) for c in range(k) for r in ("n", "f")}
    return ChannelSet(g, users)


def test_qos_thresholds():
    np.testing.assert_allclose(qos_rate_thresholds([0.5, 0.1]), [0.41421356, 0.07177346], atol=1e-8)
    assert qos_rate_thresholds(0.0) == 0.0
    with pytest.raises(InvalidArgument):
        qos_rate_thresholds(-0.1)


def test_sensing_spec_default_grid():
    spec = build_sensing_spec((-45.0, 0.0, 45.0), 6.0, 1.8)
    assert spec.angle_grid.size == 101
    assert spec.angle_grid[0] == -90.0 and spec.angle_grid[-1] == 90.0
    # +-3 deg around each target at 1.8 deg spacing holds three grid points
    for t in (-45.0, 0.0, 45.0):
        inside = spec.angle_grid[spec.desired_mask == 1]
        assert (np.abs(inside - t) <= 3.0 + 1e-9).sum() == 3
    assert spec.interest_set.size == 9
    np.testing.assert_array_equal(spec.interest_angles, spec.angle_grid[spec.desired_mask == 1])


def test_sensing_spec_errors():
    with pytest.raises(InvalidArgument):
        build_sensing_spec((0.0,), 0.0, 1.0)
    with pytest.raises(InvalidArgument):
        build_sensing_spec((0.0,), 1.0, -1.0)
    with pytest.raises(InvalidArgument):
        build_sensing_spec((0.9,), 0.5, 1.8)


def test_passive_round_trip(rng):
    v = rand_unit(rng, 6)
    V = passive_mat_from_vec(v)
    np.testing.assert_allclose(np.diag(V), 1.0)
    w = passive_vec_from_mat(V)
    # recovered up to a common phase
    np.testing.assert_allclose(w / w[0], v / v[0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-90, 90), st.integers(1, 6), st.integers(1, 3))
def test_trace_form_equals_direct_form(seed, theta, m, n):
    rng = np.random.default_rng(seed)
    g = crandn(rng, m, n)
    v = rand_unit(rng, m)
    ws = [crandn(rng, n) for _ in range(2)]
    direct = beampattern_gain_direct(v, g, ws, theta)
    trace = beampattern_gain_trace(passive_mat_from_vec(v), upsilon_matrix(theta, g), [np.outer(w, w.conj()) for w in ws])
    assert trace == pytest.approx(direct, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_link_gain_forms_agree(seed):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng)
    sol = Solution.from_vectors([crandn(rng, 3) for _ in range(2)], [[0.3, 0.7], [0.2, 0.8]], rand_unit(rng, 4))
    a, b = link_gains(ch, sol), link_gains_trace(ch, sol)
    for key in a:
        np.testing.assert_allclose(a[key], b[key], rtol=1e-10)
    eff = build_effective_matrices(ch, build_sensing_spec((0.0,), 6.0, 1.8), sol.passive_mat)
    for key, H in eff.h.items():
        np.testing.assert_allclose(H, H.conj().T)
        assert np.linalg.eigvalsh(H)[0] > -1e-10 * np.abs(H).max()


def test_beampattern_profile_matches_direct(rng):
    ch = random_channels(rng)
    sol = Solution.from_vectors([crandn(rng, 3) for _ in range(2)], [[0.3, 0.7]] * 2, rand_unit(rng, 4))
    angles = np.linspace(-90, 90, 7)
    prof = beampattern_profile(sol, ch, angles)
    ref = [beampattern_gain_direct(sol.passive_vec, ch.g_bs_ris, sol.active_vecs, t) for t in angles]
    np.testing.assert_allclose(prof, ref, rtol=1e-10)


def test_illumination_uses_probe_channel(rng):
    ch = random_channels(rng)
    sol = Solution.from_vectors([crandn(rng, 3)], [[0.5, 0.5]], rand_unit(rng, 4))
    a = steering_vector(20.0, 4)
    direct = beampattern_gain_direct(sol.passive_vec, ch.g_bs_ris, sol.active_vecs, 20.0)
    assert illumination_power(sol.passive_mat, sol.active_mats, ch.g_bs_ris, 2.0 * a) == pytest.approx(4 * direct)


def scalar_channels(s_n, s_f, i_n=0.0, i_f=0.0):
    """One-antenna one-element system with |g_n|^2 = s_n, |g_f|^2 = s_f.

    A second cluster with beam along the same direction leaks ``i`` into the
    first cluster when requested.
    """
    users = {(0, "n"): np.array([math.sqrt(s_n)], dtype=complex),
             (0, "f"): np.array([math.sqrt(s_f)], dtype=complex)}
    return ChannelSet(np.array([[1.0 + 0j]]), users)


def test_rates_hand_computed():
    ch = scalar_channels(4.0, 1.0)
    sol = Solution.from_vectors([np.array([1.0 + 0j])], [[0.2, 0.8]], np.array([1.0 + 0j]))
    r = achievable_rates(ch, sol, 1.0)
    # RNU decodes RFU: 0.8*4 / (0.2*4 + 1); RNU own: 0.2*4 / 1; RFU: 0.8 / (0.2 + 1)
    assert r.rate_f_to_n[0] == pytest.approx(math.log2(1 + 3.2 / 1.8))
    assert r.rate_n[0] == pytest.approx(math.log2(1.8))
    assert r.rate_f_to_f[0] == pytest.approx(math.log2(1 + 0.8 / 1.2))
    assert r.rate_f[0] == pytest.approx(min(r.rate_f_to_n[0], r.rate_f_to_f[0]))
    assert r.satisfies(0.5, 0.1)
    assert not r.satisfies(0.9, 0.1)
    assert set(r.as_dict()) == {"rate_f_to_n", "rate_n", "rate_f_to_f", "rate_f"}


def test_zero_noise_zero_interference_is_unbounded():
    ch = scalar_channels(4.0, 1.0)
    sol = Solution.from_vectors([np.array([1.0 + 0j])], [[0.2, 0.8]], np.array([1.0 + 0j]))
    r = achievable_rates(ch, sol, 0.0)
    assert math.isinf(r.rate_n[0]) and r.unbounded[0]
    assert np.isfinite(r.rate_f[0])


def test_rates_need_power_split(rng):
    ch = random_channels(rng)
    sol = Solution.from_vectors([crandn(rng, 3)] * 2, None, rand_unit(rng, 4))
    with pytest.raises(InvalidArgument):
        achievable_rates(ch, sol, 1.0)
    rates = oma_rates(ch, Solution.from_vectors([crandn(rng, 3) for _ in range(4)], None, rand_unit(rng, 4)), 1.0)
    assert len(rates) == 4 and (np.asarray(rates) >= 0).all()


def test_solution_validate(rng):
    v = rand_unit(rng, 4)
    ok = Solution.from_vectors([crandn(rng, 3)], [[0.4, 0.6]], v)
    assert ok.validate() is ok
    assert ok.total_power == pytest.approx(np.linalg.norm(ok.active_vecs[0]) ** 2)
    bad = Solution.from_vectors([crandn(rng, 3)], [[0.4, 0.5]], v)
    with pytest.raises(InvalidArgument):
        bad.validate()
    bad = Solution.from_vectors([crandn(rng, 3)], [[1.0, 0.0]], v)
    with pytest.raises(InvalidArgument):
        bad.validate()
    bad = Solution.from_vectors([crandn(rng, 3)], [[0.4, 0.6]], 2 * v)
    with pytest.raises(InvalidArgument):
        bad.validate()
