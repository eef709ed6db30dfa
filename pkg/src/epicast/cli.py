"""``epicast <command> --config PATH [--seed N] [--out DIR]``.

Exit codes: 0 success, 1 runtime error, 2 input validation error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import load_config
from .errors import EpicastError, ValidationError
from .pipeline import COMMANDS, cmd_predict

log = logging.getLogger("epicast")


def _week_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected START:END week indices") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epicast", description="Hospitalization trend forecasting pipeline")
    p.add_argument("--version", action="version", version=f"epicast {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="run configuration JSON (defaults built in when omitted)")
    p.add_argument("--seed", type=int, help="override the model seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--weeks", type=_week_range, help="predict only: START:END issue-week range")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.out)
        if args.command == "predict":
            outputs = cmd_predict(cfg, args.weeks)
        else:
            outputs = COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"epicast {args.command}: {exc}", file=sys.stderr)
        return 2
    except (EpicastError, OSError) as exc:
        print(f"epicast {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
