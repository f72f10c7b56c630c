import json
import math

import numpy as np
import pytest

from risnoma import harness
from risnoma.cli import main, parse_seeds
from risnoma.config import ScenarioConfig
from risnoma.errors import ConfigError
from risnoma.metrics import Solution, min_beampattern


@pytest.fixture(scope="module")
def tiny():
    return ScenarioConfig(k_clusters=1, n_antennas=2, m_elements=3, seeds=(0, 1))


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory, tiny):
    out = tmp_path_factory.mktemp("sweep")
    result = harness.run_sweep(tiny, "p_max", ["30", "35"], ["ibcd", "ris_sensing"], out_dir=out)
    return out, result


def test_fmt():
    assert harness.fmt(None) == ""
    assert harness.fmt(True) == "true" and harness.fmt(np.bool_(False)) == "false"
    assert harness.fmt(3) == "3"
    assert harness.fmt(0.1) == "0.1"
    assert harness.fmt(1 / 3) == "0.333333333333"
    assert harness.fmt(math.inf) == "inf" and harness.fmt(-math.inf) == "-inf"
    assert harness.fmt(math.nan) == "nan"
    assert harness.fmt("x") == "x"


def test_csv_round_trip(tmp_path):
    rows = [[1.5, "a,b", None], [math.inf, 'q"uote', 2]]
    p = harness.write_csv(tmp_path / "t.csv", ("x", "s", "n"), rows)
    back = harness.read_csv(p)
    assert back == [{"x": "1.5", "s": "a,b", "n": ""}, {"x": "inf", "s": 'q"uote', "n": "2"}]


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("0,2,5") == [0, 2, 5]
    assert parse_seeds("7") == [7]


def test_apply_param():
    cfg = ScenarioConfig()
    assert harness.apply_param(cfg, "m_elements", 24).m_elements == 24
    assert harness.apply_param(cfg, "algorithm.max_outer", 3).algorithm.max_outer == 3
    with pytest.raises(ConfigError):
        harness.apply_param(cfg, "nope", 1)
    with pytest.raises(ConfigError):
        harness.apply_param(cfg, "algorithm.nope", 1)
    with pytest.raises(ConfigError):
        harness.scheme_id("magic")


def test_zero_beams_give_a_zero_map(tiny):
    channels, _ = harness.scenario(tiny, 0)
    sol = Solution([np.zeros((2, 2), dtype=complex)], None, np.eye(3, dtype=complex))
    rows = harness.emit_illumination_map(sol, channels, [-45.0, 0.0, 45.0], [10.0, 50.0], tiny.channel)
    assert len(rows) == 6 and all(r[4] == 0.0 for r in rows)


def test_map_frame_matches_user_positions(tiny):
    channels, _ = harness.scenario(tiny, 0)
    sol = Solution([np.eye(2, dtype=complex)], None, np.eye(3, dtype=complex))
    (row,) = harness.emit_illumination_map(sol, channels, [30.0], [10.0], tiny.channel)
    assert row[2] == pytest.approx(5.0) and row[3] == pytest.approx(10 * math.cos(math.radians(30)))


def test_target_sums_are_sector_sums():
    rows = [[t, r, 0.0, 0.0, float(i)] for i, (t, r) in enumerate((t, r) for t in (-10, -5, 0, 5, 10)
                                                                      for r in (10, 20))]
    sums = harness.target_sums(rows, [0.0, 10.0], 5.0)
    assert sums == [float(sum(range(2, 8))), float(sum(range(6, 10)))]


def test_rank_table_renders_infinite_ratio():
    recs = [{"status": "ok", "scheme": "ibcd", "n_antennas": 2, "m_elements": 3, "w_ratios": ["inf", 1e7],
             "v_ratio": 2e7},
            {"status": "ok", "scheme": "ibcd", "n_antennas": 2, "m_elements": 3, "w_ratios": [1e8, 3e7],
             "v_ratio": "inf"},
            {"status": "failed", "scheme": "ibcd", "n_antennas": 2, "m_elements": 3}]
    cols, rows = harness.emit_rank_table(recs)
    assert cols == ("scheme", "n_antennas", "m_elements", "runs", "w1", "w2", "v")
    assert rows == [["ibcd", 2, 3, 2, math.inf, 2e7, math.inf]]
    assert harness.csv_text(cols, rows).splitlines()[1] == "ibcd,2,3,2,inf,20000000,inf"


def test_failed_runs_are_recorded(tiny):
    hard = tiny.replace(p_max=-40.0, qos_rnu=6.0, qos_rfu=6.0)
    rec = harness.run_cell(hard, "ibcd", 0)
    assert rec["status"] == "failed" and rec["objective"] is None
    assert rec["error"].startswith("InfeasibleScenario")


def test_sweep_is_full_factorial_and_persisted(sweep_dir):
    out, result = sweep_dir
    assert len(result.records) == 2 * 2 * 2
    assert len(list((out / "runs").glob("*.jsonl"))) == 8
    assert {r["value"] for r in result.records} == {30, 35}
    assert all(r["status"] == "ok" for r in result.records)
    for r in result.records:
        assert r["p_max_dbm"] == r["value"]
    # the more generous budget never does worse on the median
    assert result.median("ibcd", 35) >= result.median("ibcd", 30) * 0.99


def test_records_rebuild_their_solutions(sweep_dir):
    _, result = sweep_dir
    for rec in result.records:
        cfg, channels, spec = harness.record_scenario(rec)
        sol = harness.solution_from_record(rec)
        assert min_beampattern(sol, channels, spec) == pytest.approx(rec["objective"], rel=1e-9)
        rows = harness.beampattern_from_record(rec)
        assert max(r[2] for r in rows) == pytest.approx(1.0)
        interest = set(spec.interest_angles.tolist())
        assert min(r[1] for r in rows if r[0] in interest) == pytest.approx(rec["objective"], rel=1e-9)


def test_aggregate_is_recomputable_from_disk(sweep_dir):
    out, result = sweep_dir
    loaded = harness.load_result(out)
    assert loaded.param == "p_max" and loaded.values == [30, 35]
    assert harness.csv_text(harness.AGGREGATE_COLUMNS, loaded.aggregate()) == (out / "aggregate.csv").read_text()
    row = [r for r in loaded.aggregate() if r[0] == "ibcd" and r[2] == "35"][0]
    objs = loaded.objectives("ibcd", 35)
    assert row[3:5] == [2, 2]
    assert row[6] == pytest.approx(np.median(objs))


def test_resume_skips_finished_cells(sweep_dir, tiny, monkeypatch):
    out, result = sweep_dir
    monkeypatch.setattr(harness, "_cell_job", lambda job: pytest.fail("cell re-run"))
    again = harness.run_sweep(tiny, "p_max", ["30", "35"], ["ibcd", "ris_sensing"], out_dir=out)
    assert [r["objective"] for r in again.records] == [r["objective"] for r in result.records]


def test_empty_sweep_is_a_single_scenario(tiny):
    result = harness.run_sweep(tiny, schemes=["ris_sensing"], seeds=[0])
    assert len(result.records) == 1 and result.records[0]["value"] is None


def test_cli_run_and_emit(tmp_path, tiny):
    cfg = tmp_path / "tiny.yaml"
    cfg.write_text(json.dumps(tiny.to_dict()))
    out = tmp_path / "res"
    assert main(["run", str(cfg), "--scheme", "ibcd", "--seeds", "0", "--out", str(out)]) == 0
    texts = {}
    for kind in ("beampattern", "illumination", "targets", "ranktable", "trace", "aggregate"):
        path = tmp_path / f"{kind}.csv"
        assert main(["emit", str(out), "--kind", kind, "--out", str(path)]) == 0
        texts[kind] = path.read_text()
        assert harness.read_csv(path)
    assert texts["beampattern"].splitlines()[0] == "angle_deg,gain,normalized_gain"
    assert texts["illumination"].splitlines()[0] == "angle_deg,radius_m,x_m,y_m,power"
    # re-emitting from disk is byte-identical
    for kind in ("beampattern", "trace", "ranktable"):
        path = tmp_path / f"again-{kind}.csv"
        main(["emit", str(out), "--kind", kind, "--out", str(path)])
        assert path.read_text() == texts[kind]


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("k_clusters: 0\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "k_clusters" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--param", "nope", "--values", "1", "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit):
        main(["emit", str(tmp_path), "--kind", "bogus", "--out", "x.csv"])
