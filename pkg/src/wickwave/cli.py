"""Command-line front end: ``wickwave <experiment> --config FILE [options]``.

Exit status: 0 when every check passes, 1 when a check fails, 2 for a
configuration or usage error (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from ._runtime import manifest_lines, write_csv
from .experiments import EXPERIMENTS, run_experiment, validate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SECTION = "experiment"


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> dict:
    """Read the flat ``[experiment]`` section of an INI file; it must exist and be non-empty."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (N vs n)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    extra = [s for s in parser.sections() if s != SECTION]
    if extra:
        raise ConfigError(f"unknown config sections: {', '.join(extra)}")
    if not parser.has_section(SECTION):
        raise ConfigError(f"config needs an [{SECTION}] section")
    cfg = dict(parser.items(SECTION))
    if not cfg:
        raise ConfigError(f"[{SECTION}] section is empty")
    return cfg


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wickwave",
        description="Run one experiment and write CSV tables, summary.csv and an SVG figure.",
        epilog="exit status: 0 all checks pass, 1 some check fails, 2 bad configuration",
    )
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", required=True, metavar="PATH", help="INI file with an [experiment] section")
    ap.add_argument("--out", default="wickwave-out", metavar="DIR", help="output directory (default: %(default)s)")
    ap.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
    ap.add_argument("--threads", type=int, default=1, metavar="INT",
                    help="worker threads; results do not depend on it (default: 1)")
    ap.add_argument("--override", action="append", default=[], metavar="key=value",
                    help="replace one config key; repeatable")
    ap.add_argument("--no-svg", action="store_true", help="skip the SVG summary")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        raw.update(parse_overrides(args.override))
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must fit in 64 bits")
            raw["seed"] = str(args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        params = validate(args.experiment, raw)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    result = run_experiment(args.experiment, raw, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {k: _fmt(v) for k, v in params.items() if k != "seed"}
    stamp["experiment"] = args.experiment
    manifest = manifest_lines(stamp, params["seed"], result.stamps)
    for table, (header, rows) in result.tables.items():
        write_csv(out / f"{table}.csv", header, rows, manifest)
    summary = [(c.criterion, c.value, c.threshold, "PASS" if c.passed else "FAIL") for c in result.checks]
    write_csv(out / "summary.csv", ["criterion", "value", "threshold", "status"], summary, manifest)
    if not args.no_svg:
        from .plotting import write_svg

        write_svg(out / f"{args.experiment}.svg", result.plot, args.experiment, result.checks)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.criterion}  value={c.value:.6g}  ({c.threshold})")
    return EXIT_OK if result.passed else EXIT_FAIL


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
