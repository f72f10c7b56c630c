"""Experiment runner: per-run records, seed/parameter sweeps and CSV emitters.

A run is one ``(scheme, scenario, seed)`` cell.  Its record is a plain dict
(see :func:`run_cell`) written as a JSON-lines file: one ``trace`` line per
iteration record followed by a single ``result`` line.  Every emitter is a
function of these records only, so tables can be regenerated from disk.

CSV conventions: RFC-4180 via :mod:`csv`, ``\\n`` line endings, floats as
``format(x, ".12g")``, infinities as ``inf``, missing values as empty cells.
Wall-clock times never enter a CSV, which keeps emitted files reproducible.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import baselines
from .algorithms.iao import run_iao
from .algorithms.ibcd import run_ibcd
from .baselines import SchemeId
from .config import ScenarioConfig, config_from_dict
from .errors import ConfigError, DegenerateChannel, InfeasibleScenario, NeedsInitialization, SolverFailure
from .geometry import generate_channels, los_probe_channel, sample_user_positions
from .metrics import (Solution, achievable_rates, beampattern_profile, build_sensing_spec,
                      illumination_power, oma_rates, passive_mat_from_vec)

SCHEMES = {
    SchemeId.IBCD: run_ibcd,
    SchemeId.IAO: run_iao,
    SchemeId.BASELINE_ZF: baselines.baseline_zf,
    SchemeId.BASELINE_MRT: baselines.baseline_mrt,
    SchemeId.RIS_ISAC_NO_NOMA: baselines.ris_isac_no_noma,
    SchemeId.RIS_SENSING: baselines.ris_sensing,
}

# failures that mean "this instance has no answer", recorded rather than raised
RUN_FAILURES = (InfeasibleScenario, NeedsInitialization, DegenerateChannel, SolverFailure)

BEAMPATTERN_COLUMNS = ("angle_deg", "gain", "normalized_gain")
ILLUMINATION_COLUMNS = ("angle_deg", "radius_m", "x_m", "y_m", "power")
TARGET_COLUMNS = ("scheme", "seed", "target_deg", "power")
TRACE_COLUMNS = ("phase", "outer", "iteration", "objective", "status", "epsilon", "rho", "delta",
                 "ratio", "accepted")
AGGREGATE_COLUMNS = ("scheme", "param", "value", "runs", "ok", "mean", "median", "q25", "q75",
                     "min", "max")


# -- scenario -----------------------------------------------------------------

def scenario(config, seed):
    """User positions, channels and sensing grid for one seed."""
    positions = sample_user_positions(config.geometry, seed, config.k_clusters)
    channels = generate_channels(config, positions, seed)
    s = config.sensing
    spec = build_sensing_spec(s.target_angles, s.beam_width, s.grid_step)
    return channels, spec


def scheme_id(name):
    try:
        return SchemeId(name)
    except ValueError:
        raise ConfigError("scheme", f"unknown scheme {name!r}; choose from "
                                    f"{', '.join(s.value for s in SchemeId)}") from None


def parse_value(text):
    """Sweep value from the command line: YAML scalars (``16``, ``30.5``, ``[1, 2]``)."""
    return yaml.safe_load(text) if isinstance(text, str) else text


def apply_param(config, param, value):
    if not param:
        return config
    data = config.to_dict()
    node = data
    *heads, last = param.split(".")
    for h in heads:
        if h not in node or not isinstance(node[h], dict):
            raise ConfigError(param, "unknown field")
        node = node[h]
    if last not in node:
        raise ConfigError(param, "unknown field")
    node[last] = value
    return config_from_dict(data)


# -- one run ------------------------------------------------------------------

def _vec(x):
    return None if x is None else [[float(z.real), float(z.imag)] for z in np.asarray(x, dtype=complex)]


def _unvec(x):
    return None if x is None else np.array([complex(re, im) for re, im in x])


def _mat(x):
    x = np.asarray(x, dtype=complex)
    return [x.real.tolist(), x.imag.tolist()]


def _unmat(x):
    return np.array(x[0]) + 1j * np.array(x[1])


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _num(x):
    if isinstance(x, str):
        return float(x)
    return x


def rate_summary(config, channels, sol, scheme):
    if sol.active_vecs is None:
        return {"qos_met": None}
    if sol.power_coeffs is None:
        rates = oma_rates(channels, sol, config.noise_w)
        floors = np.array([config.qos_rnu if r == "n" else config.qos_rfu for _, r in channels.users()])
        return {"user_rates": rates.tolist(), "qos_met": bool((rates >= floors - 1e-6).all())}
    rep = achievable_rates(channels, sol, config.noise_w, check=False)
    return {**rep.as_dict(), "qos_met": rep.satisfies(config.qos_rnu, config.qos_rfu, slack=1e-6)}


def run_cell(config, scheme, seed, param=None, value=None):
    """Run one scheme on one seed and return its record (never raises for
    infeasible or degenerate instances; those get ``status`` set instead)."""
    scheme = scheme_id(scheme) if isinstance(scheme, str) else scheme
    cfg = apply_param(config, param, value)
    channels, spec = scenario(cfg, seed)
    rec = {"scheme": scheme.value, "seed": int(seed), "param": param or "", "value": value,
           "n_antennas": cfg.n_antennas, "m_elements": cfg.m_elements, "k_clusters": cfg.k_clusters,
           "p_max_dbm": cfg.p_max, "config": cfg.to_dict()}
    t0 = time.perf_counter()
    try:
        sol, trace = SCHEMES[scheme](channels, spec, cfg, seed)
    except RUN_FAILURES as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}", objective=None, trace=[],
                   wall_time=time.perf_counter() - t0)
        return _plain(rec)
    meta = sol.meta
    rec.update(
        status="ok", error="", objective=float(meta["objective"]),
        active_vecs=None if sol.active_vecs is None else [_vec(w) for w in sol.active_vecs],
        active_mats=None if sol.active_vecs is not None else [_mat(W) for W in sol.active_mats],
        passive_vec=_vec(sol.passive_vec),
        power_coeffs=None if sol.power_coeffs is None else sol.power_coeffs.tolist(),
        total_power=sol.total_power, w_ratios=meta.get("w_ratios"), w_errors=meta.get("w_errors"),
        v_ratio=meta.get("v_ratio"), outer_iterations=meta.get("outer_iterations"),
        rates=rate_summary(cfg, channels, sol, scheme), trace=trace.to_list(),
        wall_time=time.perf_counter() - t0)
    return _plain(rec)


def solution_from_record(rec):
    """Rebuild the :class:`Solution` of a successful run record."""
    if rec.get("status") != "ok":
        raise InfeasibleScenario(f"run {rec.get('scheme')}/{rec.get('seed')} has no solution")
    meta = {"scheme": rec["scheme"], "objective": rec["objective"]}
    v = _unvec(rec["passive_vec"])
    if rec.get("active_vecs") is None:
        # covariance-only systems (sensing benchmark)
        mats = [_unmat(x) for x in rec["active_mats"]]
        return Solution(mats, None, passive_mat_from_vec(v), None, v, meta)
    w = [_unvec(x) for x in rec["active_vecs"]]
    return Solution.from_vectors(w, rec["power_coeffs"], v, **meta)


def record_scenario(rec):
    """``(config, channels, sensing_spec)`` of a run record, regenerated from its seed."""
    cfg = config_from_dict(rec["config"])
    channels, spec = scenario(cfg, rec["seed"])
    return cfg, channels, spec


# -- persistence --------------------------------------------------------------

def cell_name(scheme, seed, param=None, value=None):
    tag = f"{param}={json.dumps(value, separators=(',', ':'))}" if param else "base"
    safe = "".join(c if c.isalnum() or c in "-_.=," else "_" for c in tag)
    return f"{scheme}__{safe}__seed{seed}.jsonl"


def write_record(path, rec):
    """One JSON line per trace record, then the result line; written to a
    temporary file and renamed so a crashed run never leaves a partial cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    body = {k: v for k, v in rec.items() if k != "trace"}
    with open(tmp, "w") as f:
        for t in rec.get("trace", []):
            f.write(json.dumps({"kind": "trace", **t}, sort_keys=True) + "\n")
        f.write(json.dumps({"kind": "result", **body}, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_record(path):
    trace, result = [], None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            kind = row.pop("kind")
            if kind == "trace":
                trace.append(row)
            else:
                result = row
    if result is None:
        raise ValueError(f"{path}: no result line")
    result["trace"] = trace
    return result


def load_records(out_dir):
    """All run records under ``out_dir/runs`` in a fixed order."""
    files = sorted(Path(out_dir, "runs").glob("*.jsonl"))
    recs = [read_record(p) for p in files]
    return sorted(recs, key=_record_key)


def _record_key(rec):
    return (rec["scheme"], rec["param"], json.dumps(rec["value"]), rec["seed"])


# -- sweeps -------------------------------------------------------------------

@dataclass
class ExperimentResult:
    """Per-run records plus aggregates over seeds (recomputed on demand)."""

    records: list
    param: str = ""
    values: list = field(default_factory=list)

    def select(self, scheme=None, value=None, ok=None):
        out = []
        for r in self.records:
            if scheme is not None and r["scheme"] != str(getattr(scheme, "value", scheme)):
                continue
            if value is not None and r["value"] != value:
                continue
            if ok is not None and (r["status"] == "ok") != ok:
                continue
            out.append(r)
        return out

    def objectives(self, scheme, value=None, failed_as=None):
        """Objectives over seeds; failed runs are dropped or replaced by ``failed_as``."""
        vals = []
        for r in self.select(scheme, value):
            if r["status"] == "ok":
                vals.append(r["objective"])
            elif failed_as is not None:
                vals.append(failed_as)
        return np.array(vals, dtype=float)

    def median(self, scheme, value=None, failed_as=None):
        x = self.objectives(scheme, value, failed_as)
        return float(np.median(x)) if x.size else float("nan")

    def aggregate(self):
        rows = []
        keys = sorted({(r["scheme"], json.dumps(r["value"])) for r in self.records})
        for scheme, vtext in keys:
            value = json.loads(vtext)
            runs = self.select(scheme, value)
            x = self.objectives(scheme, value)
            stats = ([float(np.mean(x)), float(np.median(x)), float(np.quantile(x, 0.25)),
                      float(np.quantile(x, 0.75)), float(x.min()), float(x.max())]
                     if x.size else [None] * 6)
            rows.append([scheme, self.param, vtext if self.param else "", len(runs), int(x.size)] + stats)
        return rows


def _cell_job(args):
    cfg_dict, scheme, seed, param, value, out_dir = args
    rec = run_cell(config_from_dict(cfg_dict), scheme, seed, param, value)
    if out_dir is not None:
        write_record(Path(out_dir, "runs", cell_name(scheme, seed, param, value)), rec)
    return rec


def run_sweep(config, param=None, values=(), schemes=(SchemeId.IBCD,), seeds=None, workers=1,
              out_dir=None, resume=True, progress=None):
    """Full factorial over ``values x seeds x schemes``.

    Each finished cell is written to ``out_dir/runs`` right away; with
    ``resume`` cells already on disk are loaded instead of re-run.  An empty
    ``values`` list runs the base scenario once per seed and scheme.
    """
    seeds = list(config.seeds if seeds is None else seeds)
    values = [parse_value(v) for v in values] if param else [None]
    if param:
        for v in values:
            apply_param(config, param, v)   # fail fast on a bad field or value
    schemes = [scheme_id(s) if isinstance(s, str) else s for s in schemes]
    cfg_dict = config.to_dict()
    jobs, done = [], []
    for value in values:
        for seed in seeds:
            for s in schemes:
                path = None if out_dir is None else Path(out_dir, "runs", cell_name(s.value, seed, param, value))
                if resume and path is not None and path.exists():
                    done.append(read_record(path))
                    continue
                jobs.append((cfg_dict, s.value, seed, param or None, value, out_dir))
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            done.append(_cell_job(job))
            if progress:
                progress(done[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_cell_job, jobs):
                done.append(rec)
                if progress:
                    progress(rec)
    for rec in done:
        rec["param"] = rec["param"] or ""
    result = ExperimentResult(sorted(done, key=_record_key), param or "", values if param else [])
    if out_dir is not None:
        write_csv(Path(out_dir, "aggregate.csv"), AGGREGATE_COLUMNS, result.aggregate())
    return result


def load_result(out_dir):
    recs = load_records(out_dir)
    param = recs[0]["param"] if recs else ""
    values = sorted({json.dumps(r["value"]) for r in recs})
    return ExperimentResult(recs, param, [json.loads(v) for v in values] if param else [])


# -- emitters -----------------------------------------------------------------

def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(x)


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows))
    return path


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def emit_beampattern_sweep(solution, channels, grid):
    """``(angle, gain, gain / max gain)`` at every grid angle."""
    grid = np.asarray(grid, dtype=float)
    gains = beampattern_profile(solution, channels, grid)
    top = gains.max()
    norm = gains / top if top > 0 else np.zeros_like(gains)
    return [[float(t), float(g), float(n)] for t, g, n in zip(grid, gains, norm)]


def local_peaks(rows, count=3):
    """Angles of the ``count`` largest local maxima of a beampattern table."""
    g = np.array([r[1] for r in rows])
    idx = [i for i in range(len(g))
           if (i == 0 or g[i] >= g[i - 1]) and (i == len(g) - 1 or g[i] > g[i + 1])]
    idx.sort(key=lambda i: -g[i])
    return [rows[i][0] for i in idx[:count]]


def emit_illumination_map(solution, channels, angles, radii, params):
    """Illumination power at ``(angle, radius)`` probe points through LoS
    RIS-to-point channels.  ``x = r sin(angle)`` runs along the RIS array and
    ``y = r cos(angle)`` along its broadside, the frame used for user positions."""
    m = channels.m_elements
    rows = []
    for t in np.asarray(angles, dtype=float):
        for r in np.asarray(radii, dtype=float):
            h = los_probe_channel(float(t), float(r), params, m)
            p = illumination_power(solution.passive_mat, solution.active_mats, channels.g_bs_ris, h)
            rows.append([float(t), float(r), float(r * math.sin(math.radians(t))),
                         float(r * math.cos(math.radians(t))), p])
    return rows


def target_sums(map_rows, targets, half_width):
    """Sum of map power over cells within ``half_width`` degrees of each target angle."""
    half = half_width + 1e-9
    return [float(sum(r[4] for r in map_rows if abs(r[0] - t) <= half)) for t in targets]


def map_grid(config):
    s = config.sensing
    n = int(round(180.0 / s.map_angle_step))
    return np.linspace(-90.0, 90.0, n + 1), np.asarray(s.map_radii, dtype=float)


def illumination_from_record(rec):
    cfg, channels, _ = record_scenario(rec)
    angles, radii = map_grid(cfg)
    return emit_illumination_map(solution_from_record(rec), channels, angles, radii, cfg.channel)


def beampattern_from_record(rec):
    _, channels, spec = record_scenario(rec)
    return emit_beampattern_sweep(solution_from_record(rec), channels, spec.angle_grid)


def emit_target_table(records):
    rows = []
    for rec in records:
        if rec["status"] != "ok":
            continue
        cfg = config_from_dict(rec["config"])
        sums = target_sums(illumination_from_record(rec), cfg.sensing.target_angles,
                           cfg.sensing.beam_width)
        rows += [[rec["scheme"], rec["seed"], t, p] for t, p in zip(cfg.sensing.target_angles, sums)]
    return rows


def rank_columns(k_max):
    return ("scheme", "n_antennas", "m_elements", "runs") + tuple(f"w{k + 1}" for k in range(k_max)) + ("v",)


def emit_rank_table(records):
    """Mean eigen-ratio of each extracted ``W_k`` and of ``V`` per ``(scheme, N, M)``.

    A ratio of infinity (an exactly rank-one matrix) propagates to the mean and
    renders as ``inf``.  Returns ``(columns, rows)``.
    """
    groups = {}
    for rec in records:
        if rec["status"] != "ok" or rec.get("w_ratios") is None:
            continue
        groups.setdefault((rec["scheme"], rec["n_antennas"], rec["m_elements"]), []).append(rec)
    k_max = max((len(r["w_ratios"]) for g in groups.values() for r in g), default=0)
    rows = []
    for key in sorted(groups):
        g = groups[key]
        row = list(key) + [len(g)]
        for k in range(k_max):
            vals = [_num(r["w_ratios"][k]) for r in g if k < len(r["w_ratios"])]
            row.append(float(np.mean(vals)) if vals else None)
        vr = [_num(r["v_ratio"]) for r in g if r.get("v_ratio") is not None]
        row.append(float(np.mean(vr)) if vr else None)
        rows.append(row)
    return rank_columns(k_max), rows


def emit_trace(rec):
    """Iteration records of one run, one row each, in execution order."""
    rows = []
    for t in rec.get("trace", []):
        ratio = t.get("trace_ratio", t.get("v_ratio"))
        rows.append([t.get("phase"), t.get("outer"), t.get("iteration"), _num(t.get("objective")),
                     t.get("status"), _num(t.get("epsilon")), _num(t.get("rho")), _num(t.get("delta")),
                     _num(ratio) if not isinstance(ratio, list) else None, t.get("accepted")])
    return rows
