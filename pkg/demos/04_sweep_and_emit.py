"""A small RIS-size sweep through the harness, then the CSV tables from disk."""
import sys
from pathlib import Path

from risnoma import ScenarioConfig
from risnoma import harness

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-results")
cfg = ScenarioConfig(k_clusters=2, n_antennas=4, m_elements=6, seeds=(0, 1, 2))

# every finished cell lands in out/runs right away; a rerun resumes
result = harness.run_sweep(cfg, "m_elements", ["6", "10"], ["ibcd", "iao"], out_dir=out,
                           progress=lambda r: print(r["scheme"], r["value"], r["seed"], r["status"]))
for row in result.aggregate():
    print(dict(zip(harness.AGGREGATE_COLUMNS, row)))

# tables are pure functions of the persisted records
loaded = harness.load_result(out)
best = max(loaded.select("ibcd", 10, ok=True), key=lambda r: r["objective"])
harness.write_csv(out / "beampattern.csv", harness.BEAMPATTERN_COLUMNS, harness.beampattern_from_record(best))
harness.write_csv(out / "illumination.csv", harness.ILLUMINATION_COLUMNS, harness.illumination_from_record(best))
harness.write_csv(out / "targets.csv", harness.TARGET_COLUMNS, harness.emit_target_table(loaded.records))
harness.write_csv(out / "ranks.csv", *harness.emit_rank_table(loaded.records))
harness.write_csv(out / "trace.csv", harness.TRACE_COLUMNS, harness.emit_trace(best))
print("wrote", sorted(p.name for p in out.glob("*.csv")))
