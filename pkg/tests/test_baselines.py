import math

import numpy as np
import pytest

from risnoma.baselines import (SchemeId, baseline_mrt, baseline_zf, combined_channel, mrt_directions,
                               ris_isac_no_noma, ris_sensing, zf_directions)
from risnoma.config import ScenarioConfig
from risnoma.errors import DegenerateChannel
from risnoma.geometry import ChannelSet
from risnoma.harness import scenario
from risnoma.metrics import Solution, build_sensing_spec, min_beampattern, oma_rates

from conftest import crandn, rand_unit


def random_channels(rng, n, m, k):
    users = {(c, r): crandn(rng, m) for c in range(k) for r in ("n", "f")}
    return ChannelSet(crandn(rng, m, n), users)


def test_scheme_ids_are_exhaustive():
    assert {s.value for s in SchemeId} == {"ibcd", "iao", "baseline_zf", "baseline_mrt",
                                           "ris_isac_no_noma", "ris_sensing"}


def test_single_cluster_zf_is_matched_filter(rng):
    ch = random_channels(rng, 4, 5, 1)
    v = rand_unit(rng, 5)
    h = combined_channel(ch, (0, "n"), v)
    d = zf_directions(ch, v)[0]
    assert abs(np.vdot(h.conj() / np.linalg.norm(h), d)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_zf_nulls_other_rnus(seed):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, 4, 6, 3)
    v = rand_unit(rng, 6)
    dirs = zf_directions(ch, v)
    for k, d in enumerate(dirs):
        own = abs(combined_channel(ch, (k, "n"), v) @ d)
        for j in range(3):
            if j != k:
                assert abs(combined_channel(ch, (j, "n"), v) @ d) / own < 1e-8


def test_zf_rejects_more_clusters_than_antennas(rng):
    ch = random_channels(rng, 2, 6, 3)
    with pytest.raises(DegenerateChannel):
        zf_directions(ch, rand_unit(rng, 6))


def test_mrt_reaches_cauchy_schwarz(rng):
    ch = random_channels(rng, 4, 6, 2)
    v = rand_unit(rng, 6)
    for k, d in enumerate(mrt_directions(ch, v)):
        h = combined_channel(ch, (k, "f"), v)
        assert np.linalg.norm(d) == pytest.approx(1.0)
        assert abs(h @ d) == pytest.approx(np.linalg.norm(h), rel=1e-12)


def test_mrt_zero_channel():
    ch = ChannelSet(np.ones((2, 2), dtype=complex), {(0, "n"): np.ones(2, dtype=complex),
                                                      (0, "f"): np.zeros(2, dtype=complex)})
    with pytest.raises(DegenerateChannel):
        mrt_directions(ch, np.ones(2, dtype=complex))


def scalar_system():
    ch = ChannelSet(np.array([[2e-3 * np.exp(0.3j)]]), {(0, "n"): np.array([5e-3 + 1e-3j]),
                                                         (0, "f"): np.array([1e-3 - 2e-3j])})
    return ch, build_sensing_spec((0.0,), 1.0, 1.8)


def test_scalar_system_closed_forms():
    ch, spec = scalar_system()
    cfg = ScenarioConfig(k_clusters=1, n_antennas=1, m_elements=1)
    sens, _ = ris_sensing(ch, spec, cfg)
    expected = cfg.p_max_w * abs(ch.g_bs_ris[0, 0]) ** 2
    assert sens.meta["objective"] == pytest.approx(expected, rel=1e-6)
    zf, _ = baseline_zf(ch, spec, cfg)
    mrt, _ = baseline_mrt(ch, spec, cfg)
    assert zf.meta["objective"] == pytest.approx(mrt.meta["objective"], rel=1e-6)
    # with one cluster the split does not enter the objective
    assert zf.total_power == pytest.approx(mrt.total_power, rel=1e-9)


@pytest.fixture(scope="module")
def small_case():
    cfg = ScenarioConfig(k_clusters=2, n_antennas=4, m_elements=6)
    channels, spec = scenario(cfg, 0)
    return cfg, channels, spec


@pytest.mark.parametrize("fn", [baseline_zf, baseline_mrt])
def test_fixed_direction_baselines_meet_floors(fn, small_case):
    cfg, channels, spec = small_case
    sol, trace = fn(channels, spec, cfg)
    sol.validate()
    from risnoma.metrics import achievable_rates
    assert achievable_rates(channels, sol, cfg.noise_w).satisfies(cfg.qos_rnu, cfg.qos_rfu, slack=1e-6)
    # one split shared by every cluster
    assert np.ptp(sol.power_coeffs[:, 1]) == 0.0
    assert trace.is_monotone("outer")
    assert sol.meta["objective"] == pytest.approx(min_beampattern(sol, channels, spec), rel=1e-6)


def test_sensing_uses_the_whole_budget(small_case):
    cfg, channels, spec = small_case
    sol, trace = ris_sensing(channels, spec, cfg)
    assert sol.total_power == pytest.approx(cfg.p_max_w, rel=1e-4)
    assert sol.power_coeffs is None
    assert trace.is_monotone("outer")


@pytest.fixture(scope="module")
def underloaded():
    """N = 6 antennas for 2K = 4 users."""
    cfg = ScenarioConfig(k_clusters=2, n_antennas=6, m_elements=6)
    channels, spec = scenario(cfg, 0)
    return cfg, channels, spec


def test_no_noma_meets_per_user_floors(underloaded):
    cfg, channels, spec = underloaded
    sol, trace = ris_isac_no_noma(channels, spec, cfg)
    assert len(sol.active_vecs) == 4
    rates = oma_rates(channels, sol, cfg.noise_w)
    floors = [cfg.qos_rnu if role == "n" else cfg.qos_rfu for _, role in channels.users()]
    assert (np.asarray(rates) >= np.asarray(floors) - 1e-6).all()
    assert trace.is_monotone("outer")


def test_no_noma_approaches_sensing_without_floors(small_case):
    cfg, channels, spec = small_case
    free = cfg.replace(qos_rnu=0.0, qos_rfu=0.0)
    isac, _ = ris_isac_no_noma(channels, spec, free, seed=0)
    sens, _ = ris_sensing(channels, spec, free, seed=0)
    assert isac.meta["objective"] >= 0.95 * sens.meta["objective"]


def test_no_noma_trails_sensing_when_underloaded(underloaded):
    cfg, channels, spec = underloaded
    isac, _ = ris_isac_no_noma(channels, spec, cfg, seed=0)
    sens, _ = ris_sensing(channels, spec, cfg, seed=0)
    assert isac.meta["objective"] < sens.meta["objective"]
