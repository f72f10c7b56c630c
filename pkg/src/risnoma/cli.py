"""Command-line entry point: ``risnoma run | sweep | emit``.

Examples::

    risnoma run scenario.yaml --scheme ibcd --seeds 0-9 --workers 4 --out results/base
    risnoma sweep scenario.yaml --param m_elements --values 8 12 16 --scheme ibcd iao --out results/m
    risnoma emit results/m --kind ranktable --out results/m/ranks.csv
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .config import ScenarioConfig, load_config
from .errors import ConfigError

KINDS = ("beampattern", "illumination", "targets", "ranktable", "trace", "aggregate")


def parse_seeds(text):
    """``"0-9"``, ``"0,3,5"`` or ``"7"`` to a list of ints."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"no seeds in {text!r}")
    return seeds


def _config(path):
    return ScenarioConfig() if path is None else load_config(path)


def _progress(rec):
    obj = rec.get("objective")
    tag = f"objective={obj:.6g}" if rec["status"] == "ok" else rec["error"]
    val = f" {rec['param']}={rec['value']}" if rec["param"] else ""
    print(f"{rec['scheme']}{val} seed={rec['seed']}: {tag}", file=sys.stderr)


def _common(p):
    p.add_argument("config", nargs="?", help="scenario file (YAML/JSON); defaults when omitted")
    p.add_argument("--scheme", nargs="+", default=["ibcd"],
                   help="one or more of: " + ", ".join(s.value for s in harness.SchemeId))
    p.add_argument("--seeds", type=parse_seeds, help="e.g. 0-9 or 0,2,4 (default: config seeds)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fresh", action="store_true", help="re-run cells already on disk")


def build_parser():
    ap = argparse.ArgumentParser(prog="risnoma", description="RIS-assisted NOMA-ISAC beamforming experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run schemes on one scenario over seeds")
    _common(run)
    sw = sub.add_parser("sweep", help="run schemes over a parameter sweep")
    _common(sw)
    sw.add_argument("--param", required=True, help="config field, dotted for sections (algorithm.max_outer)")
    sw.add_argument("--values", nargs="+", required=True)
    em = sub.add_parser("emit", help="write CSV tables from a results directory")
    em.add_argument("results", help="directory written by run or sweep")
    em.add_argument("--kind", choices=KINDS, required=True)
    em.add_argument("--out", required=True, help="CSV path")
    em.add_argument("--scheme", help="select runs of this scheme (beampattern, illumination, trace)")
    em.add_argument("--seed", type=int, help="select the run with this seed")
    em.add_argument("--value", help="select the run at this sweep value")
    return ap


def _pick(result, args):
    recs = result.records
    if args.scheme:
        recs = [r for r in recs if r["scheme"] == args.scheme]
    if args.seed is not None:
        recs = [r for r in recs if r["seed"] == args.seed]
    if args.value is not None:
        want = harness.parse_value(args.value)
        recs = [r for r in recs if r["value"] == want]
    ok = [r for r in recs if r["status"] == "ok"]
    if not ok:
        raise ConfigError("emit", "no successful run matches the selection")
    return ok[0]


def emit(args):
    result = harness.load_result(args.results)
    kind = args.kind
    if kind == "beampattern":
        cols, rows = harness.BEAMPATTERN_COLUMNS, harness.beampattern_from_record(_pick(result, args))
    elif kind == "illumination":
        cols, rows = harness.ILLUMINATION_COLUMNS, harness.illumination_from_record(_pick(result, args))
    elif kind == "targets":
        recs = result.select(args.scheme) if args.scheme else result.records
        cols, rows = harness.TARGET_COLUMNS, harness.emit_target_table(recs)
    elif kind == "ranktable":
        cols, rows = harness.emit_rank_table(result.records)
    elif kind == "trace":
        cols, rows = harness.TRACE_COLUMNS, harness.emit_trace(_pick(result, args))
    else:
        cols, rows = harness.AGGREGATE_COLUMNS, result.aggregate()
    path = harness.write_csv(args.out, cols, rows)
    print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "emit":
            emit(args)
            return 0
        cfg = _config(args.config)
        param = args.param if args.cmd == "sweep" else None
        values = args.values if args.cmd == "sweep" else ()
        result = harness.run_sweep(cfg, param, values, args.scheme, seeds=args.seeds, workers=args.workers,
                                   out_dir=args.out, resume=not args.fresh, progress=_progress)
        failed = sum(r["status"] != "ok" for r in result.records)
        summary = {"runs": len(result.records), "failed": failed, "out": str(Path(args.out))}
        print(json.dumps(summary))
        return 0
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
