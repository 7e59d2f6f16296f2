"""Command-line experiments: ``python -m hardwall <command> [flags]``.

Results go to ``--out`` (or stdout) as JSON lines or CSV. When ``--out`` is
given, a manifest ``<out>.manifest.json`` is written first with the command
line, the merged configuration and timestamps; result files themselves hold
no timing data, so reruns from the same manifest are byte-identical.

Exit codes: 0 success, 1 usage or input error, 2 failed validation.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from typing import Dict, Iterable, List, Optional

import numpy as np

from . import __version__, brw, estimators, oracle, ssbrw, validation
from ._kernels import BudgetExceeded
from .gaussian import RngStream
from .tree import ShapeError, TreeShape

DEFAULT_SEED = 20240917

COMMANDS = ("sample", "cov", "tail", "positivity", "cond-mean", "lambda-prime", "bounds",
            "lemma-sum", "validate")

# flag name -> (type, default); every key is also accepted in --config files
OPTIONS = {
    "d": (int, 2),
    "n": (int, 4),
    "n_prime": (int, None),
    "samples": (int, 10_000),
    "seed": (int, DEFAULT_SEED),
    "shards": (int, 1),
    "workers": (int, 1),
    "model": (str, "phi_tilde"),
    "method": (str, "conditional"),
    "lambda": (float, None),
    "tilt": (float, 0.0),
    "thresholds": (str, None),
    "format": (str, "jsonl"),
    "cpp": (float, 1.0),
    "lambda_prime": (float, None),
    "K1": (float, 1.0),
    "K2": (float, 1.0),
    "K3": (float, 1.0),
    "Cp": (float, 1.0),
    "Kp": (float, 1.0),
    "Kpp": (float, 1.0),
    "tier": (str, "quick"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- config


def load_config(path: str) -> Dict[str, object]:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}; valid keys: "
                             + ", ".join(sorted(OPTIONS)))
        kind = OPTIONS[key][0]
        try:
            out[key] = kind(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: {key} expects {kind.__name__}, got {value!r}") from None
    return out


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    return _fmt(obj)


def _csv_text(rows: List[dict]) -> str:
    buf = io.StringIO()
    keys: List[str] = []
    for row in rows:
        keys += [k for k in row if k not in keys]
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else
                             dumps(v) if isinstance(v, (dict, list)) else v)
                         for k, v in row.items()})
    return buf.getvalue()


def render(rows: List[dict], fmt: str, csv_rows: Optional[List[dict]] = None) -> str:
    if fmt == "csv":
        return _csv_text(csv_rows if csv_rows is not None else rows)
    return "".join(dumps(r) + "\n" for r in rows)


# ---------------------------------------------------------------- commands


def _shape(cfg) -> TreeShape:
    return TreeShape(cfg["d"], cfg["n"])


def _thresholds(cfg) -> List[float]:
    if not cfg["thresholds"]:
        raise UsageError("--thresholds is required, e.g. --thresholds 1,2,3")
    try:
        return [float(t) for t in str(cfg["thresholds"]).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--thresholds must be comma-separated numbers: {cfg['thresholds']}") from None


def _tag(cfg, shape=None) -> dict:
    out = {"seed": cfg["seed"], "shards": cfg["shards"]}
    if shape is not None:
        out.update(d=shape.d, n=shape.n)
    return out


def cmd_sample(cfg):
    shape = _shape(cfg).require_indexable()
    model = cfg["model"]
    rows = []
    for s, count in enumerate(estimators.shard_counts(cfg["samples"], cfg["shards"])):
        stream = RngStream(cfg["seed"], s)
        if model == "brw":
            t = brw._brw_traverse(shape, stream, count)
            cols = {"max": t.max, "argmax": t.argmax, "min": t.min}
        elif model == "phi_tilde":
            t = ssbrw._phi_traverse(shape, stream, count)
            cols = {"max": t.max, "argmax": t.argmax, "x_shared": t.shared}
        elif model == "comparison":
            if cfg["n_prime"] is None:
                raise UsageError("--model comparison needs --n-prime")
            cols = {"max": brw.comparison_maxima(shape, cfg["n_prime"], stream, count)}
        else:
            raise UsageError(f"unknown model {model!r}; expected one of {estimators.MODELS}")
        for i in range(count):
            rows.append({"model": model, **_tag(cfg, shape), "shard": s, "index": i,
                         **{k: v[i] for k, v in cols.items()}})
    return rows, None


def cmd_cov(cfg):
    shape = _shape(cfg)
    source = {"brw": "brw_kernel", "phi_tilde": "phi_tilde_kernel"}.get(cfg["model"])
    if source is None:
        raise UsageError("cov supports --model brw or phi_tilde")
    m = oracle.exact_cov_matrix(shape, source).matrix
    rows = [{"source": source, "d": shape.d, "n": shape.n, "row": i, "values": m[i].tolist()}
            for i in range(m.shape[0])]
    csv_rows = [{f"c{j}": float(v) for j, v in enumerate(r)} for r in m]
    return rows, csv_rows


def cmd_tail(cfg):
    shape = _shape(cfg)
    if cfg["thresholds"]:
        curve = estimators.estimate_max_cdf(
            shape, cfg["model"], _thresholds(cfg), cfg["samples"], cfg["seed"], cfg["shards"],
            n_prime=cfg["n_prime"], workers=cfg["workers"])
        rows = [r.to_dict(timing=False) for r in curve.estimates]
        csv_rows = [{"threshold": float(t), "log_estimate": math.log(v) if v > 0 else -math.inf}
                    for t, v in zip(curve.thresholds, curve.values)]
        return rows, csv_rows
    if cfg["lambda"] is None:
        raise UsageError("tail needs --thresholds or --lambda")
    rec = estimators.tilted_left_tail(shape, cfg["lambda"], cfg["tilt"], cfg["samples"],
                                      cfg["seed"], cfg["shards"], workers=cfg["workers"])
    row = rec.to_dict(timing=False)
    csv_row = {"threshold": rec.params["threshold"],
               "log_estimate": rec.log_value if rec.log_value is not None else -math.inf}
    return [row], [csv_row]


def _record_rows(rec):
    row = rec.to_dict(timing=False)
    return [row], None


def cmd_positivity(cfg):
    rec = estimators.estimate_positivity(_shape(cfg), cfg["samples"], cfg["seed"], cfg["shards"],
                                         cfg["method"], workers=cfg["workers"])
    return _record_rows(rec)


def cmd_cond_mean(cfg):
    rec = estimators.estimate_conditional_mean(_shape(cfg), cfg["samples"], cfg["seed"],
                                               cfg["shards"], workers=cfg["workers"])
    return _record_rows(rec)


def cmd_lambda_prime(cfg):
    shape = _shape(cfg)
    lam = estimators.solve_lambda_prime(shape, cfg["cpp"])
    return [{"quantity": "lambda_prime", "d": shape.d, "n": shape.n, "cpp": cfg["cpp"],
             "value": lam,
             "residual": estimators.lambda_prime_residual(shape, lam, cfg["cpp"])}], None


def _bound_params(cfg) -> estimators.BoundParams:
    return estimators.BoundParams(K1=cfg["K1"], K2=cfg["K2"], K3=cfg["K3"], Cp=cfg["Cp"],
                                  Cpp=cfg["cpp"], Kp=cfg["Kp"], Kpp=cfg["Kpp"])


def cmd_bounds(cfg):
    shape = _shape(cfg)
    params = _bound_params(cfg)
    lam_p = cfg["lambda_prime"]
    if lam_p is None:
        lam_p = estimators.solve_lambda_prime(shape, cfg["cpp"])
    lo, hi = estimators.eval_positivity_bounds(shape, params, lam_p)
    rows = [{"quantity": "positivity_bounds", "d": shape.d, "n": shape.n, "lambda_prime": lam_p,
             "log_lower": lo, "log_upper": hi}]
    if cfg["lambda"] is not None:
        lo, hi = estimators.eval_lefttail_bounds(shape, cfg["lambda"], params)
        rows.append({"quantity": "left_tail_bounds", "d": shape.d, "n": shape.n,
                     "lambda": cfg["lambda"], "lower": lo, "upper": hi})
    return rows, None


def cmd_lemma_sum(cfg):
    r = estimators.log_sum_lemma(cfg["n"], cfg["d"])
    return [{"quantity": "lemma_sum", "d": cfg["d"], "n": cfg["n"], "sum": r.sum,
             "ratio": r.ratio, "upper": r.paper_upper, "log_sum": r.log_sum,
             "log_upper": r.log_upper}], None


HANDLERS = {
    "sample": cmd_sample,
    "cov": cmd_cov,
    "tail": cmd_tail,
    "positivity": cmd_positivity,
    "cond-mean": cmd_cond_mean,
    "lambda-prime": cmd_lambda_prime,
    "bounds": cmd_bounds,
    "lemma-sum": cmd_lemma_sum,
}

HELP = {
    "sample": "draw leaf fields or their maxima",
    "cov": "exact leaf covariance matrix",
    "tail": "P(max <= t) over a threshold grid",
    "positivity": "probability that every leaf is nonnegative",
    "cond-mean": "mean leaf height given positivity",
    "lambda-prime": "solve for the optimal shift lambda'",
    "bounds": "evaluate the bound formulas for given constants",
    "lemma-sum": "the log-weighted sum and its closed-form bound",
}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("run options")
    g.add_argument("--d", type=int, help="branching factor")
    g.add_argument("--n", type=int, help="tree height")
    g.add_argument("--n-prime", dest="n_prime", type=int, help="subtree height of the comparison field")
    g.add_argument("--samples", type=int)
    g.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    g.add_argument("--shards", type=int)
    g.add_argument("--workers", type=int, help="threads running shards concurrently")
    g.add_argument("--model", choices=("brw", "phi_tilde", "comparison"))
    g.add_argument("--method", choices=("naive", "conditional"))
    g.add_argument("--lambda", dest="lambda", type=float)
    g.add_argument("--lambda-prime", dest="lambda_prime", type=float)
    g.add_argument("--tilt", type=float)
    g.add_argument("--thresholds", help="comma-separated list")
    g.add_argument("--cpp", type=float, help="constant C'' of the lambda' equation")
    for k in ("K1", "K2", "K3", "Cp", "Kp", "Kpp"):
        g.add_argument(f"--{k}", dest=k, type=float)
    g.add_argument("--out", help="result file; a manifest is written next to it")
    g.add_argument("--format", choices=("jsonl", "csv"))
    g.add_argument("--config", help="key = value file; command-line flags take precedence")

    parser = _Parser(prog="hardwall", description="Hard-wall branching random walk experiments.")
    parser.add_argument("--version", action="version", version=f"hardwall {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in HANDLERS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    val = sub.add_parser("validate", parents=[common], help="run the oracle cross-checks")
    tier = val.add_mutually_exclusive_group()
    tier.add_argument("--quick", dest="tier", action="store_const", const="quick")
    tier.add_argument("--full", dest="tier", action="store_const", const="full")
    return parser


def merge_config(args: argparse.Namespace) -> Dict[str, object]:
    cfg = {k: default for k, (_, default) in OPTIONS.items()}
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key in ("samples", "shards", "workers"):
        if cfg[key] < 1:
            raise UsageError(f"--{key} must be >= 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    return cfg


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _manifest(argv: List[str], cmd: str, cfg: dict, out: str) -> dict:
    return {
        "command_line": ["hardwall", *argv],
        "command": cmd,
        "config": cfg,
        "seed": cfg["seed"],
        "shards": cfg["shards"],
        "shape": {"d": cfg["d"], "n": cfg["n"]},
        "version": __version__,
        "outputs": [out],
        "started": _now(),
        "finished": None,
    }


def _write_json(path: str, obj: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2) + "\n")


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _validate(cfg, out: Optional[str]) -> int:
    checks = validation.run_suite(cfg["tier"] or "quick", seed=cfg["seed"])
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}  ({c.seconds:.1f}s)",
              file=sys.stderr if out is None else sys.stdout)
    rows = [{**c.payload(), "tier": cfg["tier"], "seed": cfg["seed"]} for c in checks]
    _emit(render(rows, cfg["format"]), out)
    return 0 if all(c.passed for c in checks) else 2


def main(argv: Optional[Iterable[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        cfg = merge_config(args)
        out = args.out
        manifest = _manifest(argv, args.command, cfg, out) if out else None
        if manifest:
            _write_json(out + ".manifest.json", manifest)
        if args.command == "validate":
            code = _validate(cfg, out)
        else:
            rows, csv_rows = HANDLERS[args.command](cfg)
            _emit(render(rows, cfg["format"], csv_rows), out)
            code = 0
        if manifest:
            manifest["finished"] = _now()
            manifest["exit_code"] = code
            _write_json(out + ".manifest.json", manifest)
        return code
    except UsageError as exc:
        print(f"hardwall: error: {exc}", file=sys.stderr)
        return 1
    except (ShapeError, BudgetExceeded, estimators.NoInteriorRoot,
            estimators.DenominatorUnderflow, ValueError) as exc:
        print(f"hardwall: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
