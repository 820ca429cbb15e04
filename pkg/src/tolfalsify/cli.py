"""Command-line driver.

Subcommands: ``falsify`` (two-layer), ``baseline`` (one-layer), ``heatmap``
(grid oracle), ``run`` (mode taken from the config), ``replay`` and
``report``. Output goes to ``<root>/<run name>/rep-<k>/`` where ``<root>``
is ``--output``, the config's ``output`` field, ``$TOLFALSIFY_OUTPUT`` or
``runs``, in that order of precedence.

Each rep directory holds ``config.json`` (everything replay needs),
``records.jsonl``, ``witnesses.jsonl``, ``summary.json`` and, for grid
runs, ``heatmap.csv`` and ``heatmap.svg``. Wall-clock timing goes only to
``metadata.json`` so the other files are byte-identical across reruns.

Exit codes: 0 success, 1 failure or replay mismatch, 2 configuration or
input error, 3 replay refused because the config hash differs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .control import PolicyFormatError, policy_from_dict
from .envs import SIMULATIONS
from .falsify import config_hash, replay_record, run_campaign
from .oracle import grid_scan, render_heatmap

ENV_OUTPUT = "TOLFALSIFY_OUTPUT"
OK, FAIL, USAGE, REFUSED = 0, 1, 2, 3


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def output_root(cfg: ExperimentConfig, flag: Optional[str]) -> Path:
    return Path(flag or cfg.output or os.environ.get(ENV_OUTPUT) or "runs")


def run_rep(cfg: ExperimentConfig, rep: int, rep_dir) -> dict:
    """Execute one repetition and write its artifacts."""
    rep_dir = Path(rep_dir)
    rep_dir.mkdir(parents=True, exist_ok=True)
    model = cfg.build_model()
    policy = cfg.build_policy()
    seed = cfg.rep_seed(rep)
    started = time.time()
    sims_before = SIMULATIONS.value
    run_info = {
        "experiment": cfg.to_dict(),
        "rep": rep,
        "seed": seed,
        "policy": policy.to_dict(),
        "config_hash": config_hash(model, policy, cfg.spec),
    }
    (rep_dir / "config.json").write_text(_dump(run_info))

    if cfg.campaign_mode == "grid":
        g = cfg.grid
        grid = grid_scan(model, policy, g.dims, g.resolution, g.lower_budget, seed, cfg.spec)
        overlay = []
        if g.overlay:
            path = Path(g.overlay)
            if not path.is_absolute():
                path = Path(cfg.base_dir) / path
            overlay = read_records(path)
        render_heatmap(grid, overlay, rep_dir / "heatmap.svg")
        summary = {
            "system": model.name,
            "mode": "grid",
            "controller": policy.kind,
            "dims": list(grid.names),
            "resolution": grid.resolution,
            "negative_cells": int((grid.gamma < 0).sum()),
            "min_gamma": float(grid.gamma.min()),
            "config_hash": run_info["config_hash"],
        }
    else:
        report = run_campaign(model, policy, cfg.campaign(rep), cfg.spec)
        (rep_dir / "records.jsonl").write_text(report.jsonl())
        (rep_dir / "witnesses.jsonl").write_text(
            "".join(json.dumps(w, sort_keys=True) + "\n" for w in report.witnesses())
        )
        summary = report.summary()
    summary["rep"] = rep
    summary["seed"] = seed
    (rep_dir / "summary.json").write_text(_dump(summary))
    (rep_dir / "metadata.json").write_text(
        _dump(
            {
                "version": __version__,
                "started": started,
                "elapsed_seconds": time.time() - started,
                "simulations_counted": SIMULATIONS.value - sims_before,
            }
        )
    )
    return summary


def _safe_rep(args):
    cfg, rep, rep_dir = args
    try:
        return run_rep(cfg, rep, rep_dir)
    except ConfigError:
        raise
    except Exception as exc:  # recorded, remaining reps continue
        Path(rep_dir).mkdir(parents=True, exist_ok=True)
        (Path(rep_dir) / "error.txt").write_text(traceback.format_exc())
        return {"rep": rep, "error": f"{type(exc).__name__}: {exc}"}


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.4f}"


def _rep_line(s: dict) -> str:
    if "error" in s:
        return f"rep {s['rep']}: ERROR {s['error']}"
    if s.get("mode") == "grid":
        return (
            f"rep {s['rep']}: grid {s['resolution']}x{s['resolution']} over {'/'.join(s['dims'])}, "
            f"{s['negative_cells']} negative cells, min gamma {s['min_gamma']:.4f}"
        )
    return (
        f"rep {s['rep']}: {s['system']} {s['mode']} seed={s['seed']} "
        f"viol={s['violations']} min_dst={_fmt(s['min_distance'])} "
        f"avg_dst={_fmt(s['avg_distance'])} sims={s['simulations']}"
    )


def execute(cfg: ExperimentConfig, root: Path, jobs: int = 1) -> int:
    run_dir = root / cfg.run_name
    cfg.build_policy()  # fail fast on a bad controller
    cfg.build_model()
    tasks = [(cfg, rep, run_dir / f"rep-{rep}") for rep in range(cfg.repetitions)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_rep, tasks))
    else:
        results = [_safe_rep(t) for t in tasks]
    for s in results:
        print(_rep_line(s))
    print(f"output: {run_dir}")
    return FAIL if any("error" in s for s in results) else OK


# -- replay ---------------------------------------------------------------


def _load_witnesses(path: Path) -> List[dict]:
    text = path.read_text()
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    data = json.loads(text)
    return data if isinstance(data, list) else [data]


def cmd_replay(args) -> int:
    path = Path(args.witness)
    if not path.is_file():
        print(f"witness file not found: {path}", file=sys.stderr)
        return USAGE
    try:
        witnesses = _load_witnesses(path)
    except (json.JSONDecodeError, OSError) as exc:
        print(f"cannot read witnesses from {path}: {exc}", file=sys.stderr)
        return USAGE
    if not witnesses:
        print(f"{path} holds no witnesses", file=sys.stderr)
        return USAGE
    if not args.all:
        if not 0 <= args.index < len(witnesses):
            print(f"index {args.index} out of range (0..{len(witnesses) - 1})", file=sys.stderr)
            return USAGE
        witnesses = [witnesses[args.index]]

    cfg_path = Path(args.config) if args.config else path.parent / "config.json"
    try:
        run_info = json.loads(cfg_path.read_text())
        cfg = config_from_dict(run_info["experiment"], base_dir=cfg_path.parent)
        model = cfg.build_model()
        policy = policy_from_dict(run_info["policy"])
    except (OSError, json.JSONDecodeError, KeyError, ConfigError, PolicyFormatError) as exc:
        print(f"cannot rebuild the run from {cfg_path}: {exc}", file=sys.stderr)
        return USAGE

    current = config_hash(model, policy, cfg.spec)
    status = OK
    for w in witnesses:
        if w.get("config_hash") != current:
            print(
                f"refusing to replay: witness was produced under config hash "
                f"{w.get('config_hash')} but {cfg_path} now hashes to {current}; "
                "the system, controller or spec changed since the run"
            )
            return REFUSED
        rho = replay_record(model, policy, w, cfg.spec)
        stored = w["gamma"]
        match = rho == stored and (rho < 0 if w.get("violating") else True)
        tag = "match" if match else "MISMATCH"
        print(f"{tag}: iteration {w.get('iteration')} index {w.get('index')} rho={rho!r} stored={stored!r}")
        if not match:
            status = FAIL
    return status


# -- report ---------------------------------------------------------------


def read_records(path) -> List[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def collect(dirs) -> dict:
    """Group rep results by ``(system, mode, controller)``."""
    groups: dict = {}
    for d in dirs:
        d = Path(d)
        summaries = [d / "summary.json"] if (d / "summary.json").is_file() else sorted(d.rglob("summary.json"))
        for sp in summaries:
            s = json.loads(sp.read_text())
            if s.get("mode") == "grid" or "violations" not in s:
                continue
            key = (s["system"], s["mode"], s.get("controller", ""))
            g = groups.setdefault(key, {"reps": 0, "violations": 0, "distances": [], "simulations": 0})
            rec_path = sp.parent / "records.jsonl"
            dists = [r["distance"] for r in read_records(rec_path) if r["violating"]] if rec_path.is_file() else []
            g["reps"] += 1
            g["violations"] += len(dists)
            g["distances"] += dists
            g["simulations"] += s.get("simulations", 0)
    return groups


REPORT_COLUMNS = ("system", "mode", "controller", "reps", "violations", "min_distance", "avg_distance", "simulations")


def report_rows(groups) -> List[dict]:
    rows = []
    for (system, mode, controller), g in sorted(groups.items()):
        d = g["distances"]
        rows.append(
            {
                "system": system,
                "mode": mode,
                "controller": controller,
                "reps": g["reps"],
                "violations": g["violations"],
                "min_distance": min(d) if d else None,
                "avg_distance": sum(d) / len(d) if d else None,
                "simulations": g["simulations"],
            }
        )
    return rows


def format_table(rows) -> str:
    header = ("System", "Mode", "Ctrl", "Reps", "Viol.", "Min Dst.", "Avg. Dst.", "Sims")
    body = [
        (
            r["system"],
            r["mode"],
            r["controller"],
            str(r["reps"]),
            str(r["violations"]),
            "-" if r["min_distance"] is None else f"{r['min_distance']:.3f}",
            "-" if r["avg_distance"] is None else f"{r['avg_distance']:.3f}",
            str(r["simulations"]),
        )
        for r in rows
    ]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip() for b in body]
    return "\n".join(lines) + "\n"


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow(["-" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def cmd_report(args) -> int:
    missing = [d for d in args.dirs if not Path(d).exists()]
    if missing:
        print(f"no such directory: {', '.join(missing)}", file=sys.stderr)
        return USAGE
    rows = report_rows(collect(args.dirs))
    if not rows:
        print("no campaign results found in the given directories", file=sys.stderr)
        return USAGE
    sys.stdout.write(format_table(rows))
    csv_path = Path(args.csv) if args.csv else Path(args.dirs[0]) / "report.csv"
    csv_path.write_text(format_csv(rows))
    print(f"csv: {csv_path}")
    return OK


# -- argument parsing -----------------------------------------------------


def _campaign_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("config", nargs="?", help="experiment config JSON (optional with --set system=...)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field; dotted keys reach nested fields")
    p.add_argument("--system", help="shorthand for --set system=NAME")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, help="number of repetitions")
    p.add_argument("--output", help=f"output root (else config 'output', ${ENV_OUTPUT}, ./runs)")
    p.add_argument("--jobs", type=int, default=1, help="run repetitions in parallel processes")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tolfalsify", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = _campaign_parser(sub, "falsify", "two-layer tolerance falsification")
    p.add_argument("--heuristic", action="store_true", help="use the trajectory-similarity objective")
    _campaign_parser(sub, "baseline", "one-layer baseline over the joint space")
    p = _campaign_parser(sub, "heatmap", "grid oracle over two deviation dimensions")
    p.add_argument("--overlay", help="records.jsonl whose samples are drawn as crosses")
    p.add_argument("--resolution", type=int)
    _campaign_parser(sub, "run", "run the mode named in the config")

    p = sub.add_parser("replay", help="re-simulate stored witnesses")
    p.add_argument("witness", help="witnesses.jsonl or a single witness JSON file")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--all", action="store_true", help="replay every witness in the file")
    p.add_argument("--config", help="run config.json (default: next to the witness file)")

    p = sub.add_parser("report", help="aggregate campaign results into a table")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--csv", help="CSV output path (default: <first dir>/report.csv)")
    return parser


def _campaign_config(args) -> ExperimentConfig:
    overrides = list(args.overrides)
    if args.system:
        overrides.insert(0, f"system={args.system}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.reps is not None:
        overrides.append(f"repetitions={args.reps}")
    if args.command == "falsify":
        overrides.append("mode=two-layer-heuristic" if args.heuristic else "mode=two-layer-plain")
    elif args.command == "baseline":
        overrides.append("mode=one-layer")
    elif args.command == "heatmap":
        overrides.append("mode=grid")
        if args.overlay:
            overrides.append(f"grid.overlay={json.dumps(str(Path(args.overlay).resolve()))}")
        if args.resolution is not None:
            overrides.append(f"grid.resolution={args.resolution}")
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return cmd_replay(args)
    if args.command == "report":
        return cmd_report(args)
    try:
        cfg = _campaign_config(args)
        return execute(cfg, output_root(cfg, args.output), max(args.jobs, 1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
