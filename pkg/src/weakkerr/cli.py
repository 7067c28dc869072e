"""Command line entry point: ``sim <mode> [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    MODES,
    ConfigError,
    ExperimentConfig,
    coerce_value,
    dumps_report,
    read_config_file,
    run,
    write_outputs,
)
from .homodyne import GeometryError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sim", description="Weak cross-Kerr GHZ entangler / analyzer simulator")
    p.add_argument("mode", nargs="?", choices=MODES)
    p.add_argument("--config", help="key=value config file; command-line flags take precedence")
    p.add_argument("--n", type=str)
    p.add_argument("--alpha", type=str)
    p.add_argument("--theta", type=str)
    p.add_argument("--shots", type=str)
    p.add_argument("--seed", type=str)
    p.add_argument("--out", dest="output_path", help="JSON report path (CSV goes next to it)")
    p.add_argument("--force-correct-bins", action="store_const", const=True, default=None,
                   help="oracle mode: classification forced to the true bin, no curve overlap")
    p.add_argument("--input", help="'plus' (default) or a basis pattern such as HHV")
    p.add_argument("--thetas", help="comma-separated theta grid for sweep")
    p.add_argument("--bucket-width", type=str)
    p.add_argument("--trace", dest="trace_path", help="write a JSON trace of the first shot")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in ("n", "alpha", "theta", "shots", "seed", "output_path", "force_correct_bins",
                "input", "thetas", "bucket_width", "trace_path"):
        raw = getattr(args, key)
        if raw is not None:
            values[key] = coerce_value(key, raw)
    if args.mode is not None:
        values["mode"] = args.mode
    if "mode" not in values:
        raise ConfigError("no mode given (positional argument or 'mode=' in the config file)")
    return ExperimentConfig(**values).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, GeometryError) as exc:
        print(f"sim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
        written = write_outputs(cfg, result)
    except OSError as exc:
        print(f"sim: cannot write output: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any simulation failure maps to exit 3
        print(f"sim: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not written:
        sys.stdout.write(dumps_report(result.report))
    else:
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
