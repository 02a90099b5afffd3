"""Command-line front end: experiment config in, CSV/JSON artifacts out.

Exit status: 0 success, 2 verification failed (no plateau / limit off target),
1 operational error (message tagged with the module that raised it).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, catalog, harmonic, kernel, sampler
from ._accel import HAVE_NUMBA, backend
from .errors import ConeWalkError, ConfigError
from .model import WalkModel, validate_hypotheses

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2

# command -> default parameters; a key with value None is required
DEFAULTS: dict[str, dict] = {
    "validate": {"irreducibility_radius": 3, "sample_points": []},
    "green": {"x": None, "ys": None, "horizon": 10_000, "tail": True, "trim_tol": 1e-25, "budget": 1e-12},
    "survival": {"x": None, "n_max": 1_000, "trim_tol": 1e-25, "budget": 1e-12},
    "harmonic": {"points": None, "schedule": [16, 32, 64, 128], "tol": 1e-9, "reversed": False},
    "verify interior": {
        "x": None, "direction": None, "scales": None, "alpha": None, "horizon": 10_000,
        "threshold": 0.10, "k_last": 4, "offset": None,
    },
    "verify halfspace": {
        "x": None, "scales": None, "horizon": 10_000, "height_exponent": 0.5,
        "threshold": 0.15, "k_last": 4,
    },
    "verify boundary": {
        "x": None, "sigma": None, "scales": None, "R": 1.0, "rho": 0.25, "horizon": 10_000,
        "sf_horizon": None, "offset": None, "exponent": None, "max_unstopped": 0.05,
        "threshold": 0.20, "k_last": 4,
    },
    "verify martin": {
        "x": None, "x0": None, "path": None, "horizon": 10_000, "tolerance": 0.02,
        "threshold": 0.10, "k_last": 4,
    },
    "mc survival": {"x": None, "n": None, "samples": 100_000},
    "mc green": {"x": None, "y": None, "horizon": 10_000, "samples": 100_000},
}


def load_config(path: str | None, command: str) -> dict:
    params = dict(DEFAULTS[command])
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        for key, val in doc.items():
            if key not in params:
                raise ConfigError(f"{path}: unknown field '{key}' for command '{command}'")
            params[key] = val
    missing = [k for k, v in params.items() if v is None and k in _required(command)]
    if missing:
        raise ConfigError(f"command '{command}' needs field(s): {', '.join(missing)}")
    _check_ranges(params)
    return params


def _required(command: str) -> set[str]:
    return {k for k, v in DEFAULTS[command].items() if v is None} - {
        "alpha", "offset", "sf_horizon", "exponent",
    }


def _check_ranges(params: dict) -> None:
    positive = ("horizon", "n_max", "samples", "sf_horizon", "k_last", "irreducibility_radius")
    for key in positive:
        v = params.get(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
            raise ConfigError(f"field '{key}' must be a positive integer, got {v!r}")
    for key in ("threshold", "tolerance", "max_unstopped", "tol", "rho", "R"):
        v = params.get(key)
        if v is not None and (not isinstance(v, (int, float)) or v <= 0):
            raise ConfigError(f"field '{key}' must be a positive number, got {v!r}")
    if params.get("rho") is not None and params["rho"] >= 1:
        raise ConfigError("field 'rho' must lie in (0, 1)")
    if "n" in params and params["n"] is not None and (not isinstance(params["n"], int) or params["n"] < 0):
        raise ConfigError(f"field 'n' must be a non-negative integer, got {params['n']!r}")


def load_model(spec: str) -> tuple[WalkModel, str]:
    p = Path(spec)
    if p.exists():
        return WalkModel.load(p), str(p)
    if spec in catalog.CORPUS:
        return catalog.CORPUS[spec](), f"catalog:{spec}"
    raise ConfigError(f"model '{spec}' is neither a file nor a catalog name ({', '.join(catalog.CORPUS)})")


def _window(params) -> kernel.WindowPolicy:
    return kernel.WindowPolicy.trimmed(params.get("trim_tol", 1e-25), params.get("budget", 1e-12))


def _clean(obj):
    """JSON-safe copy: tuples to lists, numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(asymptotics.SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else str(v) for v in row])
    return buf.getvalue()


# ------------------------------------------------------------------ commands


def cmd_validate(model, p, flags):
    rep = validate_hypotheses(model, p["irreducibility_radius"], p["sample_points"])
    doc = rep.to_json()
    return doc, {}, f"drift={doc['drift']} aperiodic={str(doc['aperiodic']).lower()} p={doc['p']} q={doc['q']}", EXIT_OK


def cmd_green(model, p, flags):
    res = kernel.green_many(
        model, p["x"], p["ys"], p["horizon"], tail=p["tail"], window=_window(p), parallel=flags["parallel"]
    )
    rows = [list(y) + [r.value, float(r.truncated_sum), r.tail_estimate, r.error_flag] for y, r in zip(p["ys"], res)]
    hdr = [f"y{i}" for i in range(model.d)] + ["green", "truncated_sum", "tail_estimate", "error_flag"]
    doc = {"results": [dict(y=list(y), **r.to_json()) for y, r in zip(p["ys"], res)]}
    line = " ".join(f"G({list(p['x'])},{list(y)})={r.value:.6g}" for y, r in zip(p["ys"], res))
    return doc, {"green.csv": _csv(hdr, rows)}, line, EXIT_OK


def cmd_survival(model, p, flags):
    curve = kernel.run(model, p["x"], p["n_max"], window=_window(p), parallel=flags["parallel"]).totals
    rows = [[n, float(v)] for n, v in enumerate(curve)]
    doc = {"survival": [float(v) for v in curve]}
    return doc, {"survival.csv": _csv(["n", "survival"], rows)}, f"P(tau>{p['n_max']})={curve[-1]:.6g}", EXIT_OK


def cmd_harmonic(model, p, flags):
    ests = []
    for x in p["points"]:
        fn = harmonic.estimate_V_prime if p["reversed"] else harmonic.estimate_V
        ests.append(fn(model, x, schedule=p["schedule"], tol=p["tol"]))
    rows = [list(e.x) + [n, v] for e in ests for n, v in e.sequence]
    hdr = [f"x{i}" for i in range(model.d)] + ["n", "value"]
    doc = {"estimates": [e.to_json() for e in ests]}
    line = " ".join(f"V{list(e.x)}={e.limit:.6g}({e.convergence_flag})" for e in ests)
    return doc, {"harmonic.csv": _csv(hdr, rows)}, line, EXIT_OK


def _verdict(series: asymptotics.RatioSeries, threshold: float) -> int:
    return EXIT_OK if series.plateau(threshold) else EXIT_FAILED


def cmd_verify(kind):
    def run(model, p, flags):
        kw = {"horizon": p["horizon"], "k_last": p["k_last"], "parallel": flags["parallel"]}
        if kind == "interior":
            s = asymptotics.verify_interior(
                model, p["x"], p["direction"], p["scales"], alpha=p["alpha"], offset=p["offset"], **kw
            )
        elif kind == "halfspace":
            e = p["height_exponent"]
            s = asymptotics.verify_halfspace(model, p["x"], p["scales"], height=lambda k: math.ceil(k**e), **kw)
        elif kind == "boundary":
            s = asymptotics.verify_boundary(
                model, p["x"], p["sigma"], p["scales"], R=p["R"], rho=p["rho"], sf_horizon=p["sf_horizon"],
                offset=p["offset"], exponent=p["exponent"], max_unstopped=p["max_unstopped"], **kw,
            )
        else:
            s = asymptotics.martin_kernel(model, p["x"], p["x0"], p["path"], **kw)
        status = _verdict(s, p["threshold"])
        doc = s.to_json(p["threshold"])
        line = f"limit={s.fitted_limit:.6g} spread={s.plateau_spread:.3g} rate={s.fitted_rate:.3g}"
        if kind == "martin":
            target = s.meta["V_ratio"]
            rel = abs(s.fitted_limit - target) / abs(target)
            doc["relative_error_vs_V_ratio"] = rel
            line += f" V_ratio={target:.6g} rel_err={rel:.3g}"
            if rel > p["tolerance"]:
                status = EXIT_FAILED
        doc["verdict"] = "pass" if status == EXIT_OK else "fail"
        return doc, {f"verify_{kind}.csv": s.to_csv()}, line + f" verdict={doc['verdict']}", status

    return run


def cmd_mc(kind):
    def run(model, p, flags):
        if kind == "survival":
            est = sampler.mc_survival(model, p["x"], p["n"], p["samples"], flags["seed"], flags["threads"])
        else:
            est = sampler.mc_green(model, p["x"], p["y"], p["horizon"], p["samples"], flags["seed"], flags["threads"])
        return est.to_json(), {}, f"mean={est.mean:.6g} se={est.std_error:.3g}", EXIT_OK

    return run


COMMANDS = {
    "validate": cmd_validate,
    "green": cmd_green,
    "survival": cmd_survival,
    "harmonic": cmd_harmonic,
    **{f"verify {k}": cmd_verify(k) for k in ("interior", "halfspace", "boundary", "martin")},
    **{f"mc {k}": cmd_mc(k) for k in ("survival", "green")},
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conewalk", description="Killed lattice walks in convex cones.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON file or catalog name")
    common.add_argument("--config", help="command parameters as a JSON object")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--deterministic", action="store_true", help="single thread, fixed reduction order")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("validate", "green", "survival", "harmonic"):
        sub.add_parser(name, parents=[common])
    for group, kinds in (("verify", ("interior", "halfspace", "boundary", "martin")), ("mc", ("survival", "green"))):
        g = sub.add_parser(group).add_subparsers(dest="kind", required=True)
        for k in kinds:
            g.add_parser(k, parents=[common])
    return ap


def _configure_threads(threads: int) -> None:
    # touching numba's thread pool initialises its threading layer; skip for serial runs
    if HAVE_NUMBA and threads > 1:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command + (f" {args.kind}" if getattr(args, "kind", None) else "")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        threads = 1 if args.deterministic else args.threads
        _configure_threads(threads)
        flags = {
            "deterministic": bool(args.deterministic),
            "threads": threads,
            "seed": int(args.seed),
            "parallel": threads > 1,
        }
        params = load_config(args.config, command)
        model, source = load_model(args.model)
        result, files, line, status = COMMANDS[command](model, params, flags)
    except ConeWalkError as exc:
        print(f"error [{exc.module}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    doc = {
        "command": command,
        "config": {
            "model_source": source,
            "model": model.to_json(),
            "params": params,
            "flags": {k: v for k, v in flags.items() if k != "parallel"},
            "backend": backend(),
            "version": __version__,
        },
        "result": result,
        "exit_status": status,
    }
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = command.replace(" ", "_")
        (out / f"{stem}.json").write_text(text, encoding="utf-8")
        for name, body in files.items():
            (out / name).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"{command}: {line}", file=sys.stderr if not args.out else sys.stdout)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
