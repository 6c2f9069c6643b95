"""Command-line entry point.

::

    basis <task> --config <path> [--seed N] [--jobs N] [--out DIR]

with task one of separate, colorize, train-scorenet, eval, grad-experiment,
ablation.  The config file fully describes the run (flat key-value grammar,
see :mod:`basis_sep.experiments`); --seed and --out override the config's
values, --jobs sizes the worker pool.

The ``BASIS_LOG`` environment variable sets log verbosity: ``debug``,
``info``, ``warning`` (default), or ``error``.  Failures exit nonzero and
print a single line to stderr of the form ``basis: <error-code>: <context>``
where the code is one of config-error, format-error, training-diverged,
sampler-diverged, unsupported, io-error, invalid-argument, or error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .core import (
    BasisError,
    FormatError,
    LogDensityUnavailableError,
    SamplerDivergedError,
    TrainingDivergedError,
    UnsupportedOperatorError,
    UnsupportedPriorError,
    UnsupportedSizeError,
)
from .experiments import TASKS, ConfigError, load_config, run_experiment

__all__ = ["main", "build_parser"]

LOG_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}

# (error code, exit status) per exception class; first match wins.
ERROR_TABLE = (
    (ConfigError, "config-error", 2),
    (FormatError, "format-error", 3),
    (TrainingDivergedError, "training-diverged", 4),
    (SamplerDivergedError, "sampler-diverged", 5),
    (UnsupportedOperatorError, "unsupported", 6),
    (UnsupportedPriorError, "unsupported", 6),
    (UnsupportedSizeError, "unsupported", 6),
    (LogDensityUnavailableError, "unsupported", 6),
    (OSError, "io-error", 7),
    (ValueError, "invalid-argument", 8),
    (BasisError, "error", 1),
)


def _configure_logging() -> None:
    raw = os.environ.get("BASIS_LOG", "warning").strip().lower()
    level = LOG_LEVELS.get(raw, logging.WARNING)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basis",
        description="Posterior sampling over components of a linear signal mixture.",
    )
    sub = parser.add_subparsers(dest="task", required=True, metavar="task")
    for task in TASKS:
        task_parser = sub.add_parser(task, help=f"run the {task} task")
        task_parser.add_argument("--config", required=True,
                                 help="path to a flat key-value config file")
        task_parser.add_argument("--seed", type=int, default=None,
                                 help="override the config's seed")
        task_parser.add_argument("--jobs", type=int, default=None,
                                 help="worker pool size (default: all cores)")
        task_parser.add_argument("--out", default=None,
                                 help="override the config's output directory")
    return parser


def _fail(exc: BaseException) -> int:
    for klass, code, status in ERROR_TABLE:
        if isinstance(exc, klass):
            message = str(exc) or exc.__class__.__name__
            print(f"basis: {code}: {message}", file=sys.stderr)
            return status
    raise exc


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, default_task=args.task)
        config = config.with_overrides(seed=args.seed, out=args.out)
        out = run_experiment(config, jobs=args.jobs)
    except KeyboardInterrupt:
        print("basis: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # noqa: BLE001 - single exit path for the CLI
        return _fail(exc)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
