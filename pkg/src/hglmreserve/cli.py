"""Command line front end: ``fit``, ``reserve`` and ``bootstrap``.

Exit status: 0 success, 1 input or validation error, 2 fit failure,
3 degraded bootstrap (redraw budget exhausted; partial output still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_run, error_quantiles, rmsep
from .errors import FitError, ReservingError, StaleFit, TooManyFailures
from .hglm import random_effect_estimates
from .model import ModelSpec, fit_model
from .reserving import reserve_report
from .triangle import read_triangle


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# -- JSON with 17 significant digits -------------------------------------------


def _json(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return _json(obj) + "\n"


# -- argument handling ---------------------------------------------------------


def _probs(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hglmreserve", description="Loss reserving with Tweedie GLMs and HGLMs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--input", required=True, help="triangle CSV (long or wide)")
    common.add_argument("--format", choices=["auto", "long", "wide"], default="auto")
    common.add_argument("--model", choices=["glm", "hglm"], default="glm")
    common.add_argument("--p", type=float, default=1.0, help="Tweedie power of the response")
    common.add_argument("--p-random", type=float, default=2.0, help="power of the random effects")
    common.add_argument("--fix-phi", type=float, default=None)
    common.add_argument("--fix-phi-u", type=float, default=None)
    common.add_argument("--output", default=None, help="write here instead of stdout")

    sub.add_parser("fit", parents=[common], help="fit a model and print a JSON summary")
    reserve = sub.add_parser("reserve", parents=[common], help="reserve per origin year and total")
    reserve.add_argument("--output-format", choices=["json", "csv"], default="json")

    boot = sub.add_parser("bootstrap", parents=[common], help="bootstrap RMSEP and error quantiles")
    boot.add_argument("--boot", type=int, default=1000, help="number of replicates B")
    boot.add_argument("--seed", type=int, required=True)
    boot.add_argument("--quantiles", type=_probs, default=[0.5, 0.75, 0.9, 0.95])
    boot.add_argument("--threads", type=int, default=1)
    boot.add_argument("--dump-replicates", default=None, help="per-replicate CSV path")
    boot.add_argument("--plot-data", default=None, help="tidy origin,stat,value CSV path")
    boot.add_argument("--max-redraws", type=int, default=100)
    boot.add_argument("--drop-zero-residuals", action="store_true")
    boot.add_argument("--scale-residuals", action="store_true")
    boot.add_argument("--process-dispersion", choices=["auto", "replicate", "base"], default="auto")
    return parser


def manifest(args) -> dict:
    out = {
        "command": args.command,
        "input": args.input,
        "model": args.model,
        "p": args.p,
        "p_random": args.p_random,
        "fix_phi": args.fix_phi,
        "fix_phi_u": args.fix_phi_u,
    }
    if args.command == "reserve":
        out["output_format"] = args.output_format
    if args.command == "bootstrap":
        out.update(
            B=args.boot,
            seed=args.seed,
            quantiles=list(args.quantiles),
            threads=args.threads,
            max_redraws=args.max_redraws,
            drop_zero_residuals=args.drop_zero_residuals,
            scale_residuals=args.scale_residuals,
            process_dispersion=args.process_dispersion,
        )
    return out


def _spec(args) -> ModelSpec:
    return ModelSpec(kind=args.model, p=args.p, p_u=args.p_random, fix_phi=args.fix_phi, fix_phi_u=args.fix_phi_u)


def _emit(text: str, path: str | None, stdout) -> None:
    if path is None:
        stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- commands ------------------------------------------------------------------


def fit_summary(fit) -> dict:
    out = {"model": fit.kind, "converged": fit.converged, "iterations": fit.iterations}
    if fit.kind == "glm":
        out["coefficients"] = {
            "intercept": fit.intercept,
            "origin": list(fit.origin_effects),
            "dev": list(fit.dev_effects),
        }
        out["random_effects"] = None
        out["phi"] = fit.dispersion
        out["phi_u"] = None
        out["deviance"] = fit.deviance
    else:
        out["coefficients"] = {"intercept": fit.intercept, "origin": None, "dev": list(fit.dev_effects)}
        out["random_effects"] = [{"origin": i, "u": u, "v": v} for i, u, v in random_effect_estimates(fit)]
        out["phi"] = fit.dispersion
        out["phi_u"] = fit.dispersion_u
        out["notes"] = list(fit.notes)
    return out


def _cmd_fit(args, stdout) -> int:
    fit = fit_model(read_triangle(args.input, None if args.format == "auto" else args.format), _spec(args))
    _emit(dumps({"manifest": manifest(args), "fit": fit_summary(fit)}), args.output, stdout)
    return 0 if fit.converged else 2


def _cmd_reserve(args, stdout) -> int:
    fit = fit_model(read_triangle(args.input, None if args.format == "auto" else args.format), _spec(args))
    report = reserve_report(fit)
    if args.output_format == "csv":
        lines = ["origin,reserve"] + [f"{i},{format(r, '.17g')}" for i, r in report.rows()]
        lines.append(f"total,{format(report.total, '.17g')}")
        _emit("\n".join(lines) + "\n", args.output, stdout)
    else:
        doc = {"manifest": manifest(args), "reserve": report.as_dict(), **fit.dispersion_summary()}
        _emit(dumps(doc), args.output, stdout)
    return 0


def _stat_name(p: float) -> str:
    return "q" + format(p * 100, "g")


def plot_rows(res, probs) -> list[tuple[str, str, float]]:
    """Tidy (origin, stat, value) rows: RMSEP and quantiles for origins 1..n and the total."""
    rm = rmsep(res)
    qt = error_quantiles(res, probs)
    rows = []
    labels = [str(i) for i in range(1, len(rm.per_origin))] + ["total"]
    rmsep_vals = list(rm.per_origin[1:]) + [rm.total]
    for k, label in enumerate(labels):
        rows.append((label, "rmsep", rmsep_vals[k]))
        for m, p in enumerate(probs):
            value = qt.total[m] if label == "total" else qt.per_origin[m, k + 1]
            rows.append((label, _stat_name(p), float(value)))
    return rows


def bootstrap_document(res, probs, man: dict) -> dict:
    rm = rmsep(res)
    qt = error_quantiles(res, probs)
    n_plus_1 = res.predicted.shape[1]
    return {
        "manifest": man,
        "base": res.base_summary,
        "replicates": res.B,
        "failures": res.failures,
        "degraded": res.degraded,
        "rmsep": {
            "per_origin": [{"origin": i, "rmsep": rm.per_origin[i]} for i in range(1, n_plus_1)],
            "total": rm.total,
        },
        "quantiles": {
            "probs": list(qt.probs),
            "per_origin": [{"origin": i, "values": list(qt.per_origin[:, i])} for i in range(1, n_plus_1)],
            "total": list(qt.total),
        },
    }


def _cmd_bootstrap(args, stdout) -> int:
    t = read_triangle(args.input, None if args.format == "auto" else args.format)
    probs = list(args.quantiles)
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    cfg = BootstrapConfig(
        B=args.boot,
        seed=args.seed,
        model=_spec(args),
        drop_zero_residuals=args.drop_zero_residuals,
        max_redraws=args.max_redraws,
        scale_residuals=args.scale_residuals,
        process_dispersion=args.process_dispersion,
    )
    status = 0
    try:
        res = bootstrap_run(t, cfg, threads=args.threads)
    except TooManyFailures as exc:
        res = exc.result
        status = 3
        print(f"hglmreserve: TooManyFailures: {exc}", file=sys.stderr)
        if res.B < 2:
            return status
    # validates probs before anything is written
    error_quantiles(res, probs)
    _emit(dumps(bootstrap_document(res, probs, manifest(args))), args.output, stdout)
    plot_path = args.plot_data
    if plot_path is None and args.output is not None:
        out = Path(args.output)
        plot_path = str(out.with_name(out.stem + ".plot.csv"))
    if plot_path is not None:
        lines = ["origin,stat,value"] + [f"{o},{s},{format(v, '.17g')}" for o, s, v in plot_rows(res, probs)]
        Path(plot_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.dump_replicates:
        Path(args.dump_replicates).write_text(res.replicate_csv(), encoding="utf-8")
    return status


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    commands = {"fit": _cmd_fit, "reserve": _cmd_reserve, "bootstrap": _cmd_bootstrap}
    try:
        return commands[args.command](args, stdout)
    except UsageError as exc:
        print(f"hglmreserve: {exc}", file=sys.stderr)
        return 1
    except (FitError, StaleFit) as exc:
        print(f"hglmreserve: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ReservingError as exc:
        print(f"hglmreserve: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"hglmreserve: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
