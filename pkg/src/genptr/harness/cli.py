"""``genptr {vote|linreg|glm|pate} --config FILE [...]``.

Exit status: 0 on success, 2 on a configuration or input error, 3 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import DomainError, GenPtrError, InfeasibleCalibrationError, NumericalError
from .config import SCHEMAS, ConfigError, load_config
from .experiments import SCHEMA_COLUMNS, run_experiment
from .output import emit_results

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# Every config key is also a flag; keys foreign to the chosen subcommand are rejected by load_config.
OVERRIDE_KEYS = tuple(dict.fromkeys(k for schema in SCHEMAS.values() for k in schema))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="genptr", description="Run a data-adaptive privacy experiment and emit plot-ready rows.")
    p.add_argument("subcommand", choices=sorted(SCHEMAS))
    p.add_argument("--config", help="sectioned key-value config file")
    p.add_argument("--seed", help="experiment seed")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json"))
    for key in OVERRIDE_KEYS:
        p.add_argument(f"--{key}", help=f"override the config key {key!r}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "out", "format", *OVERRIDE_KEYS) if getattr(args, k) is not None}
    try:
        cfg = load_config(args.subcommand, args.config, overrides)
        rows = run_experiment(cfg)
        emit_results(rows, cfg.out, cfg.format, SCHEMA_COLUMNS[cfg.subcommand])
    except (NumericalError, InfeasibleCalibrationError) as exc:
        print(f"genptr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DomainError, GenPtrError) as exc:
        print(f"genptr: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"genptr: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
