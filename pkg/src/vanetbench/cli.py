"""Operator entry point: run one scenario, run seeded batches, render reports."""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .metrics import aggregate, build_report, conservation_check, delay_series, \
    jitter_series, read_trace
from .scenario import (MOBILITY_MODELS, PROTOCOLS, ScenarioConfig, SchemaError,
                       effective_ini, load_scenario, parse_scenario_text)
from .simulation import Simulation

TRACE_NAME = "trace.txt"
METRICS_NAME = "metrics.csv"
DELAY_NAME = "delay.csv"
JITTER_NAME = "jitter.csv"
CONFIG_NAME = "scenario.effective.ini"
SUMMARY_NAME = "run.json"


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    lines = []
    for item in args.set or []:
        if "=" not in item:
            raise SchemaError(f"--set expects section.key=value, got '{item}'")
        key, value = item.split("=", 1)
        if "." not in key:
            raise SchemaError(f"--set key must be section.key, got '{key}'")
        section, name = key.split(".", 1)
        lines.append((section.strip(), f"{name.strip()} = {value.strip()}"))
    if getattr(args, "seed", None) is not None:
        lines.append(("run", f"seed = {args.seed}"))
    if getattr(args, "protocol", None) is not None:
        lines.append(("routing", f"protocol = {args.protocol}"))
    if getattr(args, "mobility", None) is not None:
        lines.append(("mobility", f"model = {args.mobility}"))
    if not lines:
        cfg.validate()
        return cfg
    by_section: dict[str, list] = {}
    for section, line in lines:
        by_section.setdefault(section, []).append(line)
    text = "\n".join(f"[{s}]\n" + "\n".join(ls) for s, ls in by_section.items())
    return parse_scenario_text(text, base=cfg)


def _load_config(args) -> ScenarioConfig:
    if args.scenario:
        cfg, _ = load_scenario(args.scenario)
    else:
        cfg = ScenarioConfig()
    return _apply_overrides(cfg, args)


def _write_metrics_csv(path, report, extra: dict):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["protocol", "mobility", "metric", "value"])
        for name, value in report.rows():
            w.writerow([extra["protocol"], extra["mobility"], name,
                        "" if value is None else value])


def _write_series_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def execute_run(cfg: ScenarioConfig, out_dir: Path, force: bool = False) -> dict:
    """Run one scenario into an output directory; returns the summary dict."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise FileExistsError(f"output directory {out_dir} is not empty "
                              f"(use --force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.validate()
    with open(out_dir / TRACE_NAME, "w", encoding="utf-8") as trace_fh:
        sim = Simulation(cfg, trace_file=trace_fh)
        result = sim.run()
    agg = result.aggregator
    conservation_check(agg)
    report = build_report(agg, duration=cfg.run.duration)
    meta = {"protocol": cfg.routing.protocol, "mobility": cfg.mobility.model,
            "seed": cfg.run.seed}
    _write_metrics_csv(out_dir / METRICS_NAME, report, meta)
    _write_series_csv(out_dir / DELAY_NAME, ["time", "delay"], delay_series(agg))
    _write_series_csv(out_dir / JITTER_NAME, ["time", "jitter"], jitter_series(agg))
    (out_dir / CONFIG_NAME).write_text(effective_ini(cfg), encoding="utf-8")
    if cfg.run.mobility_trace:
        with open(out_dir / "mobility.txt", "w", encoding="utf-8") as fh:
            fh.write("#time vehicle x y speed\n")
            for t, vid, x, y, speed in sim.mobility_rows:
                fh.write(f"{t!r} {vid} {x!r} {y!r} {speed!r}\n")
    summary = {
        **meta,
        "status": "ok",
        "events": result.events,
        "warnings": result.warnings,
        "metrics": {name: value for name, value in report.rows()},
    }
    (out_dir / SUMMARY_NAME).write_text(json.dumps(summary, indent=2) + "\n",
                                        encoding="utf-8")
    return summary


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        out_dir = Path(args.out)
    else:
        stem = Path(args.scenario).stem if args.scenario else "default"
        out_dir = Path("runs") / (f"{stem}-{cfg.routing.protocol}-"
                                  f"{cfg.mobility.model}-s{cfg.run.seed}")
    try:
        summary = execute_run(cfg, out_dir, force=args.force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 1
    print(f"run complete: {out_dir}  "
          f"pdr={summary['metrics']['pdr']}")
    return 0


def _batch_worker(payload):
    """One isolated batch run; executed in a worker process."""
    ini_text, protocol, mobility, seed, out_dir, force = payload
    try:
        cfg = parse_scenario_text(ini_text)
        cfg.routing.protocol = protocol
        cfg.mobility.model = mobility
        cfg.run.seed = seed
        summary = execute_run(cfg, Path(out_dir), force=force)
        return (protocol, mobility, seed, summary, None)
    except Exception as exc:   # surface the failure, keep the batch going
        return (protocol, mobility, seed, None, str(exc))


_BATCH_METRICS = ("pdr", "drop_pct", "avg_throughput_kbps", "nrl",
                  "route_cost", "mean_hop")


def write_batch_csv(path, rows, seeds):
    """rows: {(protocol, mobility): {seed: metrics dict}}"""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["protocol", "mobility"]
        for metric in _BATCH_METRICS:
            header += [f"{metric}.seed{s}" for s in seeds] + [f"{metric}.mean"]
        w.writerow(header)
        for (protocol, mobility) in sorted(rows):
            per_seed = rows[(protocol, mobility)]
            row = [protocol, mobility]
            for metric in _BATCH_METRICS:
                values = []
                for s in seeds:
                    m = per_seed.get(s)
                    values.append(None if m is None else m.get(metric))
                row += ["" if v is None else v for v in values]
                present = [v for v in values if v is not None]
                row.append(sum(present) / len(present) if present else "")
            w.writerow(row)


def cmd_batch(args) -> int:
    try:
        cfg = _load_config(args)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    protocols = args.protocols.split(",") if args.protocols else [cfg.routing.protocol]
    mobilities = args.mobilities.split(",") if args.mobilities else [cfg.mobility.model]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.run.seed]
    for p in protocols:
        if p not in PROTOCOLS:
            print(f"error: unknown protocol '{p}'; valid options: "
                  f"{', '.join(PROTOCOLS)}", file=sys.stderr)
            return 2
    for m in mobilities:
        if m not in MOBILITY_MODELS:
            print(f"error: unknown mobility model '{m}'; valid options: "
                  f"{', '.join(MOBILITY_MODELS)}", file=sys.stderr)
            return 2
    out_root = Path(args.out or "batch")
    out_root.mkdir(parents=True, exist_ok=True)
    ini_text = effective_ini(cfg)
    jobs = args.jobs or int(os.environ.get("VANETBENCH_JOBS", "0")) or os.cpu_count() or 1
    payloads = []
    for protocol in protocols:
        for mobility in mobilities:
            for seed in seeds:
                run_dir = out_root / f"{protocol}-{mobility}-s{seed}"
                payloads.append((ini_text, protocol, mobility, seed,
                                 str(run_dir), args.force))
    results = []
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_batch_worker, payloads))
    else:
        results = [_batch_worker(p) for p in payloads]
    rows: dict = {}
    failed = []
    for protocol, mobility, seed, summary, error in results:
        if error is not None:
            failed.append((protocol, mobility, seed, error))
            continue
        rows.setdefault((protocol, mobility), {})[seed] = summary["metrics"]
    write_batch_csv(out_root / "batch.csv", rows, seeds)
    for protocol, mobility, seed, error in failed:
        print(f"failed: {protocol}/{mobility}/seed {seed}: {error}", file=sys.stderr)
    print(f"batch complete: {len(results) - len(failed)}/{len(results)} runs ok "
          f"-> {out_root / 'batch.csv'}")
    return 1 if failed else 0


def cmd_report(args) -> int:
    status = 0
    table_rows = []
    for run_dir in args.rundirs:
        run_dir = Path(run_dir)
        trace_path = run_dir / TRACE_NAME
        summary_path = run_dir / SUMMARY_NAME
        try:
            agg = aggregate(read_trace(trace_path))
            meta = json.loads(summary_path.read_text(encoding="utf-8")) \
                if summary_path.exists() else {}
            duration = None
            report = build_report(agg, duration=duration)
            _write_series_csv(run_dir / DELAY_NAME, ["time", "delay"],
                              delay_series(agg))
            _write_series_csv(run_dir / JITTER_NAME, ["time", "jitter"],
                              jitter_series(agg))
            table_rows.append((meta.get("protocol", "?"), meta.get("mobility", "?"),
                               meta.get("seed", "?"), report))
        except Exception as exc:
            print(f"error: {run_dir}: {exc}", file=sys.stderr)
            status = 1
    if table_rows:
        cols = ["protocol", "mobility", "seed", "pdr", "drop_pct",
                "avg_throughput_kbps", "nrl", "route_cost", "mean_hop"]
        print("  ".join(f"{c:>18}" for c in cols))
        for protocol, mobility, seed, report in table_rows:
            cells = [protocol, mobility, str(seed)]
            for name in cols[3:]:
                value = getattr(report, name)
                cells.append("-" if value is None else f"{value:.4f}")
            print("  ".join(f"{c:>18}" for c in cells))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vanetbench",
        description="Deterministic VANET simulator: mobility, fading channel, "
                    "802.11p MAC, ad-hoc routing, trace metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("--scenario", help="scenario file (defaults applied when absent)")
    run_p.add_argument("--seed", type=int, help="override [run] seed")
    run_p.add_argument("--protocol", choices=PROTOCOLS, help="override routing protocol")
    run_p.add_argument("--mobility", choices=MOBILITY_MODELS,
                       help="override mobility model")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any scenario key (repeatable)")
    run_p.add_argument("--force", action="store_true",
                       help="overwrite a non-empty output directory")
    run_p.set_defaults(func=cmd_run)

    batch_p = sub.add_parser("batch", help="run a protocol x mobility x seed matrix")
    batch_p.add_argument("--scenario")
    batch_p.add_argument("--protocols", help="comma-separated protocol list")
    batch_p.add_argument("--mobilities", help="comma-separated mobility models")
    batch_p.add_argument("--seeds", help="comma-separated seeds")
    batch_p.add_argument("--jobs", type=int,
                         help="parallel workers (default $VANETBENCH_JOBS or CPUs)")
    batch_p.add_argument("--out", help="batch output root")
    batch_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    batch_p.add_argument("--force", action="store_true")
    batch_p.set_defaults(func=cmd_batch, seed=None, protocol=None, mobility=None)

    report_p = sub.add_parser("report", help="re-render metrics and plot CSVs")
    report_p.add_argument("rundirs", nargs="+", help="run output directories")
    report_p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
