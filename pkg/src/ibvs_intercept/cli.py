"""Command-line entry point: ``ibvs-intercept {run,montecarlo,compare,validate-config}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from .config import ScenarioConfig, dump_config, load_config
from .evaluation import MonteCarloSpec, montecarlo, run_comparison, run_seed
from .simloop import records_to_csv, run

log = logging.getLogger("ibvs_intercept")

EXIT_OK = 0
EXIT_CONFIG = 2


def _base_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "controller", None):
        updates["controller"] = args.controller
    return cfg.with_updates(**updates) if updates else cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit(args, text: str) -> None:
    if not args.quiet:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_run(args) -> int:
    cfg = _base_config(args)
    res = run(cfg)
    summary = res.summary.to_json() + "\n"
    if args.out:
        out = Path(args.out)
        _write(out / "summary.json", summary)
        _write(out / "steps.csv", records_to_csv(res.records))
        _write(out / "scenario.json", dump_config(cfg) + "\n")
    _emit(args, summary)
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    base = _base_config(args)
    spec = MonteCarloSpec(base=base, runs=args.runs, seed=base.seed, controller=base.controller,
                          success_radius=args.success_radius)
    report, records = montecarlo(spec, jobs=args.jobs, keep_records=bool(args.out))
    text = report.to_json()
    if args.out:
        out = Path(args.out)
        _write(out / "report.json", text)
        width = len(str(spec.runs - 1))
        for i, recs in enumerate(records):
            _write(out / "runs" / f"run_{i:0{width}d}.csv", records_to_csv(recs))
    if args.quiet:
        return EXIT_OK
    if args.out:
        summary = {k: v for k, v in report.to_dict().items() if k != "runs"}
        _emit(args, json.dumps(summary, indent=2, sort_keys=True))
    else:
        _emit(args, text)
    return EXIT_OK


def cmd_compare(args) -> int:
    base = _base_config(args)
    seeds = [run_seed(base.seed, i) for i in range(args.runs)]
    table = run_comparison(base, seeds=seeds, jobs=args.jobs)
    if args.out:
        out = Path(args.out)
        _write(out / "compare.json", table.to_json())
        _write(out / "compare.csv", table.to_csv())
    _emit(args, table.to_json())
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.config:
        sys.stderr.write("validate-config needs --config\n")
        return EXIT_CONFIG
    cfg = load_config(args.config)
    _emit(args, f"ok: {args.config} (seed {cfg.seed}, controller {cfg.controller}, "
                f"target {cfg.target.kind})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (defaults apply when omitted)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--controller", choices=("proposed", "pg"))

    batch = argparse.ArgumentParser(add_help=False)
    batch.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = argparse.ArgumentParser(prog="ibvs-intercept",
                                description="Vision-guided multicopter interception simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common, sim], help="simulate one engagement")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("montecarlo", parents=[common, sim, batch],
                       help="static-target suite around the configured start")
    m.add_argument("--runs", type=int, default=50)
    m.add_argument("--success-radius", type=float, default=None,
                   help="miss distance counted as a success, m (default: capture radius)")
    m.set_defaults(func=cmd_montecarlo)

    c = sub.add_parser("compare", parents=[common, sim, batch],
                       help="proposed controller vs pursuit on the CV/CA/SM targets")
    c.add_argument("--runs", type=int, default=3, help="seeds per scenario")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate-config", parents=[common], help="check a scenario file")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "runs", 1) < 1:
        sys.stderr.write("--runs must be at least 1\n")
        return EXIT_CONFIG
    if getattr(args, "jobs", 1) < 1:
        sys.stderr.write("--jobs must be at least 1\n")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        sys.stderr.write(f"invalid configuration: {exc}\n")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
