"""Command line: ``finslerlab check`` runs the suite, ``finslerlab eval`` evaluates one point."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .curvature import aux_quantities, curvature_bundle
from .errors import ConeDomainError, ConfigError, DefinitenessError, FinslerError
from .metrics import CubicSpec, eval_F, fundamental_tensor, inverse_fundamental_tensor, metric_from_dict
from .suite import DEFAULT_CONFIG, exit_code, load_config, report_json, report_markdown, run_suite

QUANTITIES = ("F", "g", "ginv", "G", "R", "Ric", "r", "aux", "bundle")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="finslerlab", description="Curvature checks for cubic and m-th root Finsler metrics.")
    p.add_argument("--version", action="version", version=f"finslerlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="run the check suite described by a config file")
    c.add_argument("--config", default=str(DEFAULT_CONFIG), help="suite config (default: shipped suite)")
    c.add_argument("--seed", type=int, help="overrides FINSLERLAB_SEED and the config seed")
    c.add_argument("--format", choices=("json", "md"), help="report format (default from config)")
    c.add_argument("--output", "-o", help="write the report here instead of stdout")

    e = sub.add_parser("eval", help="evaluate one quantity at (x, y)")
    e.add_argument("--metric", required=True, help="metric or conformal-data JSON file")
    e.add_argument("--x", required=True, help='base point, e.g. "1,2,3"')
    e.add_argument("--y", required=True, help='direction, e.g. "0,1,0"')
    e.add_argument("--quantity", required=True, choices=QUANTITIES)
    e.add_argument("--format", choices=("text", "json"), default="text")
    return p


def _vector(text: str, what: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(" ", "").split(",") if t], dtype=float)
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}; expected comma-separated numbers") from None
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ConfigError(f"{what} must be a non-empty list of finite numbers")
    return v


def _resolve_seed(arg_seed, config_seed) -> int:
    if arg_seed is not None:
        return arg_seed
    env = os.environ.get("FINSLERLAB_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"FINSLERLAB_SEED must be an integer, got {env!r}") from None
    return config_seed


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    cfg.seed = _resolve_seed(args.seed, cfg.seed)
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit non-negative integer")
    fmt = args.format or cfg.format
    report = run_suite(cfg)
    text = report_json(report) if fmt == "json" else report_markdown(report)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return exit_code(report)


def _load_any(path):
    from .conformal import conformal_from_dict, make_conformal

    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path} is not valid JSON: {err}") from None
    if isinstance(d, dict) and "kappa" in d:
        return make_conformal(conformal_from_dict(d))
    return metric_from_dict(d)


def _round(v):
    if isinstance(v, np.ndarray):
        return [_round(t) for t in v]
    if isinstance(v, (list, tuple)):
        return [_round(t) for t in v]
    return float(f"{float(v):.12g}")


def _text(v) -> str:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        return f"{float(a):#.12g}"
    if a.ndim == 1:
        return " ".join(f"{t:#.12g}" for t in a)
    return "\n".join(_text(row) for row in a)


def evaluate(M, x, y, quantity: str) -> dict:
    """Named arrays for one quantity tag at a single (x, y)."""
    if quantity == "F":
        return {"F": eval_F(M, x, y).value}
    if quantity in ("g", "ginv"):
        g = fundamental_tensor(M, x, y)
        return {quantity: g if quantity == "g" else inverse_fundamental_tensor(g)}
    if quantity == "aux":
        if not isinstance(M, CubicSpec):
            raise ConfigError("aux quantities are defined for cubic (alpha, beta) metrics only")
        a = aux_quantities(M, x, y)
        return {k: getattr(a, k) for k in a.__dataclass_fields__}
    fundamental_tensor(M, x, y)  # surfaces cone and definiteness errors early
    cb = curvature_bundle(M, x, y)
    parts = {"G": cb.G, "R": cb.R, "Ric": cb.Ric, "r": cb.scalarR}
    if quantity == "bundle":
        return parts | {"RicTensor": cb.RicTensor}
    return {quantity: parts[quantity]}


def cmd_eval(args) -> int:
    M = _load_any(args.metric)
    x = _vector(args.x, "x")
    y = _vector(args.y, "y")
    if len(x) != M.n or len(y) != M.n:
        raise ConfigError(f"x and y must have {M.n} components")
    out = evaluate(M, x, y, args.quantity)
    if args.format == "json":
        sys.stdout.write(json.dumps({k: _round(v) for k, v in out.items()}, sort_keys=True) + "\n")
    elif len(out) == 1:
        sys.stdout.write(_text(next(iter(out.values()))) + "\n")
    else:
        for k, v in out.items():
            body = _text(v)
            sep = "\n" if "\n" in body else " "
            sys.stdout.write(f"{k}:{sep}{body}\n")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_check(args) if args.command == "check" else cmd_eval(args)
    except ConfigError as err:
        print(f"finslerlab: config error: {err}", file=sys.stderr)
        return 2
    except (ConeDomainError, DefinitenessError) as err:
        print(f"finslerlab: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except FinslerError as err:
        print(f"finslerlab: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
