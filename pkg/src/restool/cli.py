"""Command-line entry point.

    restool <subcommand> --config path [--threads N] [--seed S] [--out DIR]
            [--set section.field=value ...]

Subcommands: validate, index, classify, ellipse, density, detect, all.
Errors exit with 2 (config), 3 (data), or 4 (numerical degeneracy) and
print a machine-readable JSON report on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import apply_overrides, load_config
from .errors import ConfigError, DataError, DegenerateError
from .pipeline import STAGES, run

EXIT_CODES = {ConfigError: 2, DataError: 3, DegenerateError: 4}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="restool",
        description="Composite resilience scores and their spatio-temporal dynamics",
    )
    parser.add_argument("subcommand", choices=list(STAGES) + ["all"])
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--threads", type=int, default=1,
                        help="cap internal parallelism (never changes results)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the top-level seed")
    parser.add_argument("--out", default=None, help="override paths.output_dir")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config field, e.g. density.grid_size=128")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.out is not None:
            overrides.append(f"paths.output_dir={args.out}")
        apply_overrides(config, overrides)
        manifest = run(args.subcommand, config, threads=args.threads)
    except (ConfigError, DataError, DegenerateError) as exc:
        report = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        if isinstance(exc, ConfigError) and exc.field:
            report["error"]["field"] = exc.field
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        return EXIT_CODES[type(exc)]
    print(f"wrote {config.output_dir() / 'manifest.json'} "
          f"(config {manifest.config_hash[:12]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
