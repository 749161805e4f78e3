"""Command line front end.

Exit status contract:

* 0: the command ran and every check it performs passed;
* 1: a check failed (no reversal under ``--expect-reversal``, a Hardy
  violation, an equimeasurability mismatch);
* 2: usage, configuration, input or output error;
* 3: the parameters violate a hypothesis of the driven result (for example
  ``sigma * p <= 1`` for ``theorem2``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constants import DEFAULT_OMEGA_CONVENTION, OMEGA_CONVENTIONS, FracParams, alpha_n, omega_n
from .constants import sharp_sobolev_constant, sphere_measure
from .experiments import (
    CORPUS_SEED,
    DEFAULT_EPSILONS,
    SWEEP_COLUMNS,
    best_constant_descent,
    counterexample_sweep,
    default_corpus,
    family_ratios,
    theorem2_ratio_suite,
)
from .geometry import Domain, domain_from_json, symmetrize
from .grids import load_grid_function
from .kernel import hardy_pointwise_bound
from .quadrature import THREADS_ENV
from .rearrange import distribution, lp_norm, rearrange
from .report import write_csv, write_json
from .seminorm import energy_domain, energy_fullspace, energy_rearranged

log = logging.getLogger("gagliardo")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_HYPOTHESIS = 0, 1, 2, 3
HARDY_TOLERANCE = 1e-6
HARDY_POINTS = 50

DEFAULTS = {
    "domain": {"shape": "interval", "a": -1.0, "b": 1.0},
    "params": {"n": 1, "sigma": 0.6, "p": 2.0},
    "eps": list(DEFAULT_EPSILONS),
    "placement": "boundary",
    "grid_h": None,
    "seed": None,
    "omega_convention": DEFAULT_OMEGA_CONVENTION,
    "points": HARDY_POINTS,
    "iterations": 50,
}


class ConfigError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        try:
            user = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        unknown = sorted(set(user) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {unknown}")
        cfg.update(user)
    if args.grid_h is not None:
        cfg["grid_h"] = args.grid_h
    if args.eps is not None:
        cfg["eps"] = args.eps
    if args.placement is not None:
        cfg["placement"] = args.placement
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["command"] = args.command
    if getattr(args, "input", None) is not None:
        cfg["input"] = str(args.input)
    for k in ("n", "sigma", "p"):
        if k in vars(args) and getattr(args, k) is not None:
            cfg["params"] = dict(cfg["params"], **{k: getattr(args, k)})
    return cfg


def _params(cfg: dict) -> FracParams:
    try:
        p = cfg["params"]
        return FracParams(int(p["n"]), float(p["sigma"]), float(p["p"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params {cfg.get('params')!r}: {exc}") from None


def _domain(cfg: dict) -> Domain:
    try:
        return domain_from_json(cfg["domain"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid domain: {exc}") from None


def _placement(cfg: dict):
    pl = cfg["placement"]
    if isinstance(pl, str):
        try:
            return [float(v) for v in pl.split(",")]
        except ValueError:
            return pl
    return pl


def _threads(args: argparse.Namespace) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else None


def _out(args: argparse.Namespace) -> Path:
    return Path(args.out)


# ---------------------------------------------------------------- commands


def cmd_rearrange(args, cfg) -> int:
    if args.input is None:
        raise ConfigError("rearrange needs an input grid function file")
    u = load_grid_function(args.input)
    prof = rearrange(u)
    out = _out(args)
    write_csv(
        out / "profile.csv",
        ("shell", "r_inner", "r_outer", "level"),
        [
            (k, float(a), float(b), float(v))
            for k, (a, b, v) in enumerate(zip(prof.radii[:-1], prof.radii[1:], prof.levels))
        ],
        cfg,
    )
    vals = u.flat()
    same_multiset = bool(np.array_equal(np.sort(vals[vals > 0]), np.sort(prof.levels)))
    thresholds = sorted({float(t) for t in vals[vals > 0]})
    dist_ok = all(distribution(u, t) == distribution(prof, t) for t in thresholds)
    norms = {}
    for q in (1.0, 2.0, math.inf):
        a, b = lp_norm(u, q), lp_norm(prof, q)
        norms[str(q)] = {"grid": a, "profile": b, "rel_diff": abs(a - b) / a if a else abs(b)}
    norms_ok = all(v["rel_diff"] <= 1e-12 for v in norms.values())
    summary = {
        "cells": int(vals.size),
        "support_cells": int(np.count_nonzero(vals > 0)),
        "support_radius": prof.support_radius,
        "levels_match": same_multiset,
        "distribution_match": dist_ok,
        "norms": norms,
    }
    write_json(out / "rearrange.json", summary, cfg)
    ok = same_multiset and dist_ok and norms_ok
    print(f"rearrange: {len(prof.levels)} shells, checks {'passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_seminorm(args, cfg) -> int:
    if args.input is None:
        raise ConfigError("seminorm needs an input grid function file")
    u = load_grid_function(args.input)
    params = _params(cfg)
    d = _domain(cfg)
    threads = _threads(args)
    res = {
        "domain": energy_domain(u, d, params, threads).to_dict(timing=False),
        "fullspace": energy_fullspace(u, params, threads=threads).to_dict(timing=False),
        "rearranged_symmetrized": energy_rearranged(u, symmetrize(d), params, threads).to_dict(timing=False),
        "rearranged_fullspace": energy_rearranged(u, None, params, threads).to_dict(timing=False),
    }
    rows = [(k, v["value"], v["error_estimate"], v["h"]) for k, v in res.items()]
    out = _out(args)
    write_csv(out / "seminorm.csv", ("quantity", "value", "error_estimate", "h"), rows, cfg)
    write_json(out / "seminorm.json", res, cfg)
    for k, v, e, _ in rows:
        print(f"{k}: {v!r} +- {e:.3g}")
    return EXIT_OK


def cmd_counterexample(args, cfg) -> int:
    params = _params(cfg)
    d = _domain(cfg)
    eps = cfg["eps"]
    if not eps:
        raise ConfigError("need at least one epsilon")
    report = counterexample_sweep(d, params, eps, _placement(cfg), cfg["grid_h"], _threads(args))
    out = _out(args)
    write_csv(out / "counterexample.csv", SWEEP_COLUMNS, report.rows(), cfg)
    write_json(out / "counterexample.json", report.as_dict(), cfg)
    for r in report.records:
        mark = "reversal" if r.flagged else "-"
        print(f"eps={r.epsilon!r}: rhs-lhs={r.margin:.6g} combined error={r.combined_error:.3g} {mark}")
    if report.slope_domain is not None:
        print(f"slopes: domain side {report.slope_domain:.4f}, symmetrized side {report.slope_star:.4f}")
    if args.expect_reversal:
        return EXIT_OK if report.any_flagged else EXIT_CHECK
    return EXIT_OK


def _interior_points(d: Domain, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(v, float) for v in d.bbox())
    pts: list[np.ndarray] = []
    margin = 1e-3 * float(np.max(hi - lo))
    for _ in range(1000):
        cand = rng.uniform(lo, hi, size=(4 * count, d.n))
        for x in cand[np.asarray(d.contains(cand), dtype=bool)]:
            if d.boundary_distance(x) > margin:
                pts.append(x)
            if len(pts) == count:
                return np.array(pts)
    raise ConfigError("could not sample interior points; is the domain empty?")


def cmd_hardy(args, cfg) -> int:
    params = _params(cfg)
    d = _domain(cfg)
    X = _interior_points(d, int(cfg["points"]), int(cfg["seed"] or 0))
    lhs, rhs = hardy_pointwise_bound(d, X, params)
    ok = lhs <= rhs * (1.0 + HARDY_TOLERANCE)
    cols = tuple(f"x{k}" for k in range(d.n)) + ("F", "bound", "ok")
    rows = [tuple(float(v) for v in x) + (float(a), float(b), bool(o)) for x, a, b, o in zip(X, lhs, rhs, ok)]
    write_csv(_out(args) / "hardy.csv", cols, rows, cfg)
    print(f"hardy: {int(ok.sum())}/{len(ok)} points satisfy the bound")
    return EXIT_OK if ok.all() else EXIT_CHECK


def cmd_theorem2(args, cfg) -> int:
    params = _params(cfg)
    if not params.sp > 1.0:
        raise HypothesisError(
            f"theorem2 requires sigma * p > 1 (got sigma * p = {params.sp:g}); the estimate is not claimed otherwise"
        )
    threads = _threads(args)
    h = cfg["grid_h"] if cfg["grid_h"] is not None else 1.0 / 256.0
    seed = CORPUS_SEED if cfg["seed"] is None else int(cfg["seed"])
    labels, cases = default_corpus(h=h, seed=seed)
    corpus = theorem2_ratio_suite(cases, params, labels, threads)
    family = family_ratios(_domain(cfg), params, cfg["eps"], _placement(cfg), None, threads)
    out = _out(args)
    write_csv(out / "theorem2_corpus.csv", ("case", "ratio", "error"), corpus.rows(), cfg)
    write_csv(out / "theorem2_family.csv", ("case", "ratio", "error"), family.rows(), cfg)
    write_json(out / "theorem2.json", {"corpus": corpus.as_dict(), "family": family.as_dict()}, cfg)
    print(f"theorem2: corpus max ratio {corpus.max_ratio:.6g}; family ratios {[round(r, 6) for r in family.ratios]}")
    finite = all(math.isfinite(r) for r in corpus.ratios + family.ratios)
    return EXIT_OK if finite else EXIT_CHECK


def cmd_constants(args, cfg) -> int:
    n = int(cfg["params"]["n"])
    sigma = float(cfg["params"]["sigma"])
    conv = cfg.get("omega_convention", DEFAULT_OMEGA_CONVENTION)
    if conv not in OMEGA_CONVENTIONS:
        raise ConfigError(f"unknown omega convention {conv!r}; expected one of {OMEGA_CONVENTIONS}")
    print(f"alpha_{n} = {alpha_n(n):.15g}")
    print(f"|S^{n - 1}| = {sphere_measure(n):.15g}")
    print(f"omega_{n} ({conv}) = {omega_n(n, conv):.15g}")
    if n > 2.0 * sigma:
        print(f"S({n}, {sigma}) = {sharp_sobolev_constant(n, sigma, conv):.15g}")
    else:
        print(f"S({n}, {sigma}) undefined: need n > 2 sigma")
    return EXIT_OK


def cmd_descend(args, cfg) -> int:
    params = _params(cfg)
    d = _domain(cfg)
    h = cfg["grid_h"]
    if h is None:
        lo, hi = d.bbox()
        h = float(np.max(np.asarray(hi) - np.asarray(lo))) / 24.0
    try:
        res = best_constant_descent(d, params, float(h), int(cfg["iterations"]))
    except ValueError as exc:
        raise HypothesisError(str(exc)) from None
    out = _out(args)
    write_csv(out / "descent.csv", ("iteration", "quotient"), list(enumerate(res.trace)), cfg)
    g = res.final.grid
    keep = res.final.support()
    cols = tuple(f"x{k}" for k in range(g.n)) + ("value",)
    rows = [tuple(float(c) for c in x) + (float(v),) for x, v in zip(g.centers()[keep], res.final.flat()[keep])]
    write_csv(out / "descent_final.csv", cols, rows, cfg)
    print(f"descent: quotient {res.trace[0]:.6g} -> {res.trace[-1]:.6g}; whole-space sharp constant {res.sharp_constant:.6g}")
    return EXIT_OK


COMMANDS = {
    "rearrange": cmd_rearrange,
    "seminorm": cmd_seminorm,
    "counterexample": cmd_counterexample,
    "hardy": cmd_hardy,
    "theorem2": cmd_theorem2,
    "constants": cmd_constants,
    "descend": cmd_descend,
}


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _eps_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gagliardo", description="Fractional Gagliardo energies and rearrangement.")
    ap.add_argument("--version", action="version", version=f"gagliardo {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--grid-h", dest="grid_h", type=float, help="grid spacing")
    common.add_argument("--eps", type=_eps_list, help="comma-separated bump radii")
    common.add_argument("--placement", help="boundary, center, origin, auto or comma-separated coordinates")
    common.add_argument("--expect-reversal", dest="expect_reversal", action="store_true")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=_positive_int, help=f"worker threads (fallback: ${THREADS_ENV})")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("rearrange", "seminorm"):
            sp.add_argument("input", nargs="?", help="grid function file (CSV or binary)")
        if name == "constants":
            sp.add_argument("--n", type=int)
            sp.add_argument("--sigma", type=float)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except HypothesisError as exc:
        print(f"gagliardo {args.command}: hypothesis not met: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ConfigError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"gagliardo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
