import json

import pytest

from risnoma.config import (AlgorithmConfig, ScenarioConfig, config_from_dict, dbm_to_watt, load_config,
                            watt_to_dbm)
from risnoma.errors import ConfigError


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    cfg = load_config(p)
    assert cfg == ScenarioConfig()
    assert cfg.p_max == 35.0 and cfg.noise_power == -90.0
    assert cfg.rician == (3.0, 3.0) and cfg.channel_exponents == (2.2, 2.2)
    assert cfg.sensing.beam_width == 6.0
    assert cfg.qos_rnu == 0.5 and cfg.qos_rfu == 0.1
    assert cfg.channel.pathloss_ref == pytest.approx(1e-3)


def test_dbm_conversions():
    assert dbm_to_watt(35.0) == pytest.approx(3.1623, rel=1e-4)
    assert dbm_to_watt(-90.0) == pytest.approx(1e-12)
    assert watt_to_dbm(dbm_to_watt(27.5)) == pytest.approx(27.5)
    assert ScenarioConfig().p_max_w == pytest.approx(3.16227766)


def test_zero_clusters_names_field():
    with pytest.raises(ConfigError, match="k_clusters"):
        config_from_dict({"k_clusters": 0})


@pytest.mark.parametrize("data,field", [
    ({"n_antennas": "six"}, "n_antennas"),
    ({"sensing": {"beam_width": "wide"}}, "sensing.beam_width"),
    ({"algorithm": {"max_outer": 2.5}}, "algorithm.max_outer"),
    ({"bogus": 1}, "bogus"),
    ({"algorithm": {"bogus": 1}}, "algorithm.bogus"),
    ({"qos_rfu": -1.0}, "qos_rfu"),
])
def test_schema_errors_name_the_field(data, field):
    with pytest.raises(ConfigError) as err:
        config_from_dict(data)
    assert err.value.path == field


def test_yaml_and_json_overrides(tmp_path):
    y = tmp_path / "s.yaml"
    y.write_text("n_antennas: 4\nm_elements: 8\nk_clusters: 2\np_max: 30\nalgorithm:\n  max_outer: 5\n"
                 "geometry:\n  rnu_radius_range: [21, 22]\n")
    cfg = load_config(y)
    assert (cfg.n_antennas, cfg.m_elements, cfg.k_clusters) == (4, 8, 2)
    assert cfg.p_max == 30.0 and isinstance(cfg.p_max, float)
    assert cfg.algorithm.max_outer == 5
    assert cfg.geometry.rnu_radius_range == (21.0, 22.0)
    j = tmp_path / "s.json"
    j.write_text(json.dumps(cfg.to_dict()))
    assert load_config(j) == cfg


def test_round_trip_through_dict():
    cfg = ScenarioConfig(k_clusters=2, m_elements=9).replace(**{"algorithm.tol_outer": 1e-4})
    assert config_from_dict(cfg.to_dict()) == cfg
    assert cfg.algorithm.tol_outer == 1e-4
    assert AlgorithmConfig().solver == "clarabel"


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("/nonexistent/scenario.yaml")
