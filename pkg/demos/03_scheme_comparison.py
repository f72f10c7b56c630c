"""All six schemes on the same channels and the same initial RIS phases."""
import time

from risnoma import ScenarioConfig
from risnoma.harness import SCHEMES, RUN_FAILURES, scenario

cfg = ScenarioConfig(k_clusters=2, n_antennas=6, m_elements=8)
channels, spec = scenario(cfg, seed=1)

print(f"{'scheme':18s} {'min gain':>11s} {'outer':>5s} {'time/s':>7s}")
for scheme, run in SCHEMES.items():
    t0 = time.perf_counter()
    try:
        sol, trace = run(channels, spec, cfg, 1)
    except RUN_FAILURES as exc:
        print(f"{scheme.value:18s} failed: {exc}")
        continue
    print(f"{scheme.value:18s} {sol.meta['objective']:11.4e} {sol.meta['outer_iterations']:5d} "
          f"{time.perf_counter() - t0:7.1f}")

# expected shape: sensing-only on top (no rate floors), the joint designs next,
# fixed-direction beams below; the no-NOMA system needs one beam per user
