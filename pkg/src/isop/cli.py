"""Command-line front end: ``isop estimate | symmetrize | verify | sweep``.

Exit status: 0 on success, 2 on a bad request (unknown operation or
parameter, failed precondition, unwritable output), 3 when ``verify`` finds a
violation.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import estimators as est
from . import harness
from .geometry import (
    Annulus,
    Ball,
    Hyperplane,
    RasterDomain,
    Rectangle,
    RasterSet,
    SlitDisk,
    load_raster,
    rasterize,
    save_raster,
    schwarz_ball,
)
from .geometry.raster import volume as raster_volume
from .stochastic import SimConfig, StableParams
from .symmetrize import circular, polarize, steiner

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 2, 3
SIM_KEYS = {"dt": float, "max_time": float, "eps_shell": float, "slit_eps": float,
            "max_wos_steps": int, "chunk_size": int, "bridge": lambda s: str(s).lower() in ("1", "true", "yes")}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers
def parse_vector(s) -> np.ndarray:
    if isinstance(s, (list, tuple, np.ndarray)):
        return np.asarray(s, dtype=float)
    try:
        return np.array([float(v) for v in str(s).split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {s!r}") from None


def parse_domain(spec: str):
    """``disk:R[,cx,cy]``, ``ball:R[,cx,cy,cz]``, ``annulus:r1,r2``, ``shell:r1,r2``,
    ``rect:a,b[,c]`` (centered), ``slits:a,angle1,angle2,...`` or ``raster:path``."""
    kind, _, rest = str(spec).partition(":")
    try:
        if kind == "raster":
            return RasterDomain(load_raster(rest))
        v = parse_vector(rest)
        if kind == "disk":
            return Ball(v[0], v[1:3] if v.size >= 3 else np.zeros(2))
        if kind == "ball":
            return Ball(v[0], v[1:4] if v.size >= 4 else np.zeros(3))
        if kind == "annulus":
            return Annulus(v[0], v[1], dim=2)
        if kind == "shell":
            return Annulus(v[0], v[1], dim=3)
        if kind == "rect":
            return Rectangle.centered(v)
        if kind == "slits":
            return SlitDisk(v[1:], v[0])
    except (IndexError, ValueError, OSError) as e:
        raise UsageError(f"bad domain {spec!r}: {e}") from None
    raise UsageError(f"unknown domain kind {kind!r}; known: disk, ball, annulus, shell, rect, slits, raster")


def _center(D) -> np.ndarray:
    lo, hi = D.bbox()
    return 0.5 * (lo + hi)


def sphere_points(n: int, radius: float = 1.0, center=None) -> np.ndarray:
    """Near-uniform points on a 2-sphere (golden-angle spiral)."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (3 - np.sqrt(5)) * k
    s = np.sqrt(1 - z * z)
    P = radius * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    return P if center is None else P + np.asarray(center, dtype=float)


# ---------------------------------------------------------------------------
# estimate operations
@dataclass(frozen=True)
class Op:
    fn: Callable
    params: dict  # name -> (parser, default); default None means required


def _process(p, D):
    a = p["alpha"]
    return None if a == 2.0 else StableParams(a, D.dim)


def _x(p, D):
    return _center(D) if p["x"] is None else p["x"]


def _op_harmonic(p, cfg):
    D = p["domain"]
    return est.harmonic_measure(D, p["label"], _x(p, D), p["n"], cfg, p["method"])


def _op_survival(p, cfg):
    D = p["domain"]
    return est.survival_probability(D, _x(p, D), p["t"], p["n"], cfg, _process(p, D))


def _op_exit_time(p, cfg):
    D = p["domain"]
    return est.expected_exit_time(D, _x(p, D), p["n"], cfg, _process(p, D))


def _op_kac(p, cfg):
    D = p["domain"]
    return est.kac_eigenvalue(D, _x(p, D), p["t_grid"], p["n"], cfg)


def _op_heat(p, cfg):
    return est.heat_content(p["domain"], p["t"], p["box"], p["n"], cfg)


def _op_spitzer(p, cfg):
    return est.capacity_spitzer(p["domain"], tuple(p["t_grid"]), p["box"], p["n"], cfg)


def _op_capacity_energy(p, cfg):
    D = p["domain"]
    if isinstance(D, Ball) and D.dim == 3:
        P = sphere_points(p["points"], D.radius, D.center)
    else:
        lo, hi = D.bbox()
        R = D.raster if isinstance(D, RasterDomain) else rasterize(D, float(np.linalg.norm(hi - lo)) / 64)
        P = harness.surface_points(R)
        if P.shape[0] > p["points"]:
            P = P[np.sort(np.random.default_rng(cfg.seed).choice(P.shape[0], p["points"], replace=False))]
    e, _ = est.capacity_energy(P, p["alpha"], D.dim, iters=p["iters"])
    return e


def _op_hitting(p, cfg):
    D = p["domain"]
    return est.hitting_probability(D, p["x"], _process(p, D), p["n"], cfg, p["method"])


def _op_sausage(p, cfg):
    shape = Rectangle.centered(p["box"]) if p["box"] is not None else p["radius"]
    return est.sausage_expectation(shape, p["t"], p["sausage_dt"], p["n"], cfg, p["grid_cells"])


def _op_carleman(p, cfg):
    M = p["M"]
    prof = (lambda x: np.full(np.shape(x), M)) if p["profile"] == "strip" else (lambda x: M / (1 + np.maximum(x, 0)))
    return est.Estimate(est.carleman_bound(prof, M, p["r0"], p["x0"], p["b"]), 0.0, 1, cfg.seed)


def _opt_domain(s):
    return None if s in (None, "", "none") else parse_domain(s)


def _opt_vector(s):
    return None if s in (None, "", "none") else parse_vector(s)


def _profile(s):
    if s not in ("strip", "funnel"):
        raise UsageError("profile must be strip or funnel")
    return s


_D = (parse_domain, None)
_N = (int, 10_000)
OPS: dict[str, Op] = {
    "harmonic-measure": Op(_op_harmonic, {"domain": _D, "x": (_opt_vector, "none"), "label": (str, "boundary"),
                                          "n": _N, "method": (str, "auto")}),
    "survival": Op(_op_survival, {"domain": _D, "x": (_opt_vector, "none"), "t": (float, None), "n": _N,
                                  "alpha": (float, 2.0)}),
    "exit-time": Op(_op_exit_time, {"domain": _D, "x": (_opt_vector, "none"), "n": _N, "alpha": (float, 2.0)}),
    "kac-eigenvalue": Op(_op_kac, {"domain": _D, "x": (_opt_vector, "none"), "t_grid": (_opt_vector, "none"),
                                   "n": (int, 100_000)}),
    "heat-content": Op(_op_heat, {"domain": _D, "t": (float, None), "box": (_opt_domain, "none"), "n": _N}),
    "capacity-spitzer": Op(_op_spitzer, {"domain": _D, "t_grid": (parse_vector, "1,4,9"),
                                         "box": (_opt_domain, "none"), "n": (int, 1_000_000)}),
    "capacity-energy": Op(_op_capacity_energy, {"domain": _D, "points": (int, 2000), "alpha": (float, 2.0),
                                                "iters": (int, 2000)}),
    "hitting-probability": Op(_op_hitting, {"domain": _D, "x": (parse_vector, None), "n": _N,
                                            "alpha": (float, 2.0), "method": (str, "auto")}),
    "sausage": Op(_op_sausage, {"radius": (float, 1.0), "box": (_opt_vector, "none"), "t": (float, None),
                                "sausage_dt": (float, 0.01), "n": (int, 200), "grid_cells": (int, 256)}),
    "carleman-bound": Op(_op_carleman, {"M": (float, None), "r0": (float, None), "x0": (float, 0.0),
                                        "b": (float, None), "profile": (_profile, "strip")}),
}


def _split_kv(extra: list[str]) -> dict:
    """``--key value`` pairs (dashes in keys become underscores)."""
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            try:
                val = next(it)
            except StopIteration:
                raise UsageError(f"missing value for --{key}") from None
        out[key.replace("-", "_")] = val
    return out


def resolve(op_name: str, raw: dict) -> tuple[Op, dict, dict]:
    """Split raw values into (op, typed op params, sim-config overrides); echo-able raw strings kept."""
    if op_name not in OPS:
        raise UsageError(f"unknown operation {op_name!r}; known: {sorted(OPS)}")
    op = OPS[op_name]
    sim, params, echo = {}, {}, {}
    for k, v in raw.items():
        if k in SIM_KEYS:
            sim[k] = SIM_KEYS[k](v)
        elif k not in op.params:
            raise UsageError(f"unknown parameter {k!r} for {op_name}; known: {sorted(op.params) + sorted(SIM_KEYS)}")
    for k, (parse, default) in op.params.items():
        v = raw.get(k, default)
        if v is None:
            raise UsageError(f"{op_name} needs --{k.replace('_', '-')}")
        try:
            params[k] = parse(v)
        except (TypeError, ValueError) as e:
            raise UsageError(f"bad value for --{k}: {e}") from None
        echo[k] = _echo_value(params[k], v)
    return op, params, {**sim, "_echo": echo}


def _echo_value(parsed, raw):
    if parsed is None:
        return None
    if isinstance(parsed, np.ndarray):
        return parsed.tolist()
    if isinstance(parsed, (bool, int, float, str)):
        return parsed
    return str(raw)


def _sim_config(sim: dict, seed: int, workers: int | None) -> SimConfig:
    try:
        return SimConfig(seed=seed, workers=workers, **{k: v for k, v in sim.items() if k != "_echo"})
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None


def run_estimate(op_name: str, raw: dict, seed: int, workers: int | None) -> dict:
    op, params, sim = resolve(op_name, raw)
    cfg = _sim_config(sim, seed, workers)
    try:
        e = op.fn(params, cfg)
    except (ValueError, KeyError, NotImplementedError) as exc:
        raise UsageError(f"{op_name}: {exc}") from None
    echo = dict(sim["_echo"])
    echo.update({k: getattr(cfg, k) for k in SIM_KEYS})
    rec = e.to_record(op_name, echo)
    rec["seed"] = seed
    return rec


# ---------------------------------------------------------------------------
# output
def _emit(records: list[dict], fmt: str, path: str | None, csv_writer=None) -> None:
    buf = io.StringIO()
    if fmt == "json":
        est.to_json(records, buf)
    else:
        (csv_writer or est.write_csv)(records, buf)
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None


# ---------------------------------------------------------------------------
# subcommands
def cmd_estimate(args, extra) -> int:
    rec = run_estimate(args.op, {**args.config_values, **_split_kv(extra)}, args.seed, args.workers)
    _emit([rec], args.format, args.output)
    return EXIT_OK


def cmd_sweep(args, extra) -> int:
    raw = {**args.config_values, **_split_kv(extra)}
    if args.vary is None:
        raise UsageError("sweep needs --vary NAME=V1,V2,...")
    name, eq, values = args.vary.partition("=")
    name = name.replace("-", "_")
    if not eq or not values:
        raise UsageError("sweep needs --vary NAME=V1,V2,...")
    if args.op not in OPS:
        raise UsageError(f"unknown operation {args.op!r}")
    if name not in OPS[args.op].params and name not in SIM_KEYS:
        raise UsageError(f"{name!r} is not a parameter of {args.op}")
    records = []
    grid = values.split(";") if ";" in values else values.split(",")
    for i, (v, child) in enumerate(zip(grid, np.random.SeedSequence(args.seed).spawn(len(grid)))):
        point_seed = int(child.generate_state(1)[0])
        rec = run_estimate(args.op, {**raw, name: v.strip()}, point_seed, args.workers)
        rec["params"]["sweep_index"] = i
        rec["params"]["base_seed"] = args.seed
        records.append(rec)
    _emit(records, args.format, args.output)
    return EXIT_OK


def cmd_symmetrize(args, extra) -> int:
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    try:
        A = load_raster(args.input)
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read {args.input}: {e}") from None
    try:
        if args.transform == "steiner":
            B = steiner(A, args.axis)
        elif args.transform == "circular":
            B = circular(A)
        elif args.transform == "polarize":
            if args.normal is None:
                raise UsageError("polarize needs --normal")
            B = polarize(A, Hyperplane(parse_vector(args.normal), args.offset))
        else:
            ball = schwarz_ball(A)
            B = rasterize(ball, grid=A.with_mask(np.zeros(A.shape, dtype=bool)))
    except ValueError as e:
        raise UsageError(str(e)) from None
    try:
        save_raster(B, args.out)
    except OSError as e:
        raise UsageError(f"cannot write {args.out}: {e}") from None
    rec = {"op": f"symmetrize-{args.transform}", "params": {"in": args.input, "out": args.out, "axis": args.axis},
           "cells_in": A.count, "cells_out": B.count, "volume_in": raster_volume(A), "volume_out": raster_volume(B),
           "seed": args.seed}
    _emit([rec], "json", args.output)
    return EXIT_OK


def load_suite(path: str | None):
    if path is None:
        return json.loads(resources.files("isop").joinpath("data/default.json").read_text())
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        # bare name of a shipped suite
        f = resources.files("isop").joinpath("data", Path(path).name)
        if f.is_file():
            return json.loads(f.read_text())
        raise UsageError(f"no suite file {path}") from None
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read suite {path}: {e}") from None


def cmd_verify(args, extra) -> int:
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    suite = load_suite(args.suite)
    try:
        verdicts = harness.run_suite(suite, args.seed, args.workers)
    except (KeyError, ValueError) as e:
        raise UsageError(str(e)) from None
    records = [v.to_record() for v in verdicts]
    _emit(records, args.format, args.output,
          csv_writer=lambda recs, fh: harness.write_summary_csv(verdicts, fh))
    if args.summary:
        buf = io.StringIO()
        harness.write_summary_csv(verdicts, buf)
        try:
            Path(args.summary).write_text(buf.getvalue())
        except OSError as e:
            raise UsageError(f"cannot write {args.summary}: {e}") from None
    return EXIT_VIOLATION if any(v.status == "violation" for v in verdicts) else EXIT_OK


# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: ISOP_DEFAULT_WORKERS or CPU count)")
    common.add_argument("--output", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--config", default=None, help="flat JSON file of parameter defaults")

    p = argparse.ArgumentParser(prog="isop", description="Monte Carlo potential theory and isoperimetric checks.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", parents=[common], help="run one estimator",
                       epilog="operations: " + ", ".join(sorted(OPS)) + ". Pass parameters as --name value.")
    e.add_argument("op")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", parents=[common], help="run one estimator over a grid of one parameter")
    s.add_argument("op")
    s.add_argument("--vary", help="NAME=V1,V2,... (use ';' between vector values)")
    s.set_defaults(func=cmd_sweep)

    y = sub.add_parser("symmetrize", parents=[common], help="symmetrize a raster file")
    y.add_argument("transform", choices=("steiner", "circular", "polarize", "schwarz"))
    y.add_argument("--in", dest="input", required=True)
    y.add_argument("--out", required=True)
    y.add_argument("--axis", type=int, default=0)
    y.add_argument("--normal", default=None, help="plane normal for polarize, e.g. 0,1")
    y.add_argument("--offset", type=float, default=0.0)
    y.set_defaults(func=cmd_symmetrize)

    v = sub.add_parser("verify", parents=[common], help="run a suite of inequality checks")
    v.add_argument("--suite", default=None, help="suite manifest (default: the shipped default.json)")
    v.add_argument("--summary", default=None, help="also write the summary CSV here")
    v.set_defaults(func=cmd_verify)
    return p


def _apply_config(args) -> None:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a flat JSON object")
    for key, default in (("seed", 0), ("workers", None), ("output", None), ("format", "json")):
        if getattr(args, key) is None:
            setattr(args, key, cfg.pop(key, default))
        else:
            cfg.pop(key, None)
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be at least 1")
    for path in (args.output, getattr(args, "out", None), getattr(args, "summary", None)):
        if path not in (None, "-") and not Path(path).resolve().parent.is_dir():
            raise UsageError(f"cannot write {path}: no such directory")
    args.config_values = {k.replace("-", "_"): v for k, v in cfg.items()}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        _apply_config(args)
        return args.func(args, extra)
    except UsageError as e:
        print(f"isop: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
