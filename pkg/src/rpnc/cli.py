"""Command-line experiment runner.

Each subcommand writes its CSV tables, a ``checks.csv`` with the threshold
results and a ``manifest.json`` holding the fully resolved configuration,
which can be passed back through ``--config`` to reproduce the run.

Exit codes: 0 success, 1 configuration error, 2 a threshold failed under
``--assert``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .experiments import EXPERIMENTS, ExperimentResult
from .simnet.config import SimConfig, load_config, parse_config

log = logging.getLogger("rpnc")

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 1, 2


def write_table(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def resolve_config(path: str | None, seed: int | None, slots: int | None) -> SimConfig:
    """Load a config file (or a manifest written by an earlier run) and apply flag overrides."""
    data = None
    if path is not None and Path(path).suffix == ".json":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "experiment" in data:
        cfg = parse_config(data["config"])
    else:
        cfg = load_config(path)
    over = {}
    if seed is not None:
        over["seed"] = seed
    if slots is not None:
        over["slots"] = slots
    return cfg.with_overrides(run=over) if over else cfg


def write_outputs(out: Path, name: str, cfg: SimConfig, result: ExperimentResult, options: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for fname, rows in result.tables.items():
        write_table(out / fname, rows)
    write_table(out / "checks.csv", [
        {"check": c.name, "passed": c.passed, "detail": c.detail} for c in result.checks
    ])
    manifest = {
        "experiment": name,
        "options": options,
        "config": cfg.model_dump(mode="json"),
        "tables": sorted(result.tables),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpnc", description="Two-way relay network experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="YAML/JSON config or a manifest.json from an earlier run")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--slots", type=int, help="override run.slots")
        p.add_argument("--out", metavar="DIR", default=f"results/{name}")
        p.add_argument("--assert", dest="assert_", action="store_true",
                       help="exit with status 2 if any threshold check fails")
        p.add_argument("--plot", action="store_true", help="render PNG figures from the CSVs (needs matplotlib)")
        if name in ("sync-accuracy", "throughput", "arq-compare", "rtt"):
            p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    name = args.command
    try:
        cfg = resolve_config(args.config, args.seed, args.slots)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    options = {}
    if getattr(args, "jobs", None) is not None:
        options["jobs"] = args.jobs
    log.info("running %s", name)
    try:
        result = EXPERIMENTS[name](cfg, **options)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    write_outputs(out, name, cfg, result, {k: v for k, v in options.items() if k != "jobs"})
    for c in result.checks:
        print(c.line())
    if args.plot:
        from .plots import render

        for path in render(name, out):
            log.info("wrote %s", path)
    print(f"results in {out}")
    if args.assert_ and not result.passed:
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
