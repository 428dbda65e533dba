"""Command line entry points for the experiment campaigns.

Exit codes: 0 success, 2 a checked bound or shipped regression failed,
3 a numerical invariant broke, 4 bad configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

from . import experiments as exp
from .errors import (
    AccuracyError,
    BoundViolationError,
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    HermiticityError,
    KrausError,
    QPrecisionError,
)

__all__ = ["main", "build_parser"]

_NUMERICAL = (AccuracyError, ConsistencyError, ConvergenceError, HermiticityError, KrausError)


class _Parser(argparse.ArgumentParser):
    # surface argparse failures as configuration errors so they share exit code 4
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qprecision", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p, models=True, lam=False, gnuplot=False, pure_env=False):
        p.add_argument("--seed", type=int, default=None, help="campaign seed")
        p.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
        p.add_argument("--config", default=None, help="JSON or TOML config file")
        p.add_argument("--threads", type=int, default=None, help="worker processes")
        p.add_argument("--cap", type=int, default=None, help="trajectory enumeration cap")
        if models:
            p.add_argument("--models", dest="n_models", type=int, default=None,
                           help="number of random models")
        if lam:
            p.add_argument("--lambda", dest="lam", type=float, default=None,
                           help="interaction strength")
        if gnuplot:
            p.add_argument("--gnuplot", action="store_true", default=None,
                           help="emit a plot script and the bound curve")
        if pure_env:
            p.add_argument("--pure-env", dest="pure_env", action="store_true", default=None,
                           help="prepare the environment in its ground level")

    p = sub.add_parser("tur-scatter", help="random-current precision scatter")
    common(p, lam=True, gnuplot=True)
    p = sub.add_parser("kur-scatter", help="quiet-set precision scatter")
    common(p, lam=True, pure_env=True)
    p = sub.add_parser("lambda-sweep", help="coupling sweep with shipped regression checks")
    common(p, gnuplot=True)
    p = sub.add_parser("markov-suite", help="continuous-record check battery")
    common(p, models=False)
    p = sub.add_parser("single", help="analyze one stored model")
    p.add_argument("model", help="model JSON file")
    common(p, models=False)
    return parser


def _load_config_file(path: str) -> dict:
    try:
        if path.endswith(".toml"):
            try:
                import tomllib
            except ImportError:          # stdlib module landed in 3.11
                import tomli as tomllib

            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path!r} must hold a table of settings")
    allowed = {f.name for f in fields(exp.ExperimentConfig)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _build_config(args: argparse.Namespace) -> exp.ExperimentConfig:
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for key in ("seed", "n_models", "lam", "out_dir", "threads", "cap",
                "pure_env", "gnuplot"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if getattr(args, "model", None) is not None:
        merged["model_path"] = args.model
    if "lambda_grid" in merged:
        merged["lambda_grid"] = tuple(merged["lambda_grid"])
    if "threads" not in merged:
        env = os.environ.get("QPRECISION_THREADS")
        if env:
            try:
                merged["threads"] = int(env)
            except ValueError as exc:
                raise ConfigError(f"QPRECISION_THREADS must be an integer, got {env!r}") from exc
    merged["mode"] = args.command
    try:
        return exp.ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_DISPATCH = {
    "tur-scatter": exp.run_tur_scatter,
    "kur-scatter": exp.run_kur_scatter,
    "lambda-sweep": exp.run_lambda_sweep,
    "markov-suite": exp.run_markov_suite,
    "single": exp.run_single,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise ConfigError("missing command; see --help")
        cfg = _build_config(args)
        result = _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except BoundViolationError as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except QPrecisionError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 3
    for key, value in result.summary.items():
        print(f"{key}: {value}")
    for name, path in sorted(result.paths.items()):
        print(f"wrote {name}: {path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
