"""Command-line driver: ``qrlab <command> --config file.json [--seed S] [--out DIR]``.

Exit codes: 0 success, 1 a requested check failed, 2 configuration error,
3 numeric or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import acceptance
from . import continuity as C
from . import dynamics as D
from . import maps as Z
from . import metrics as M
from .errors import ConfigError, DomainError, NumericError, ParameterError, RangeError
from .io import write_csv, write_pgm

COMMANDS = ("dist", "holder", "exponent", "normality", "qf", "bloch", "growth",
            "bloch-check", "zalcman", "escher", "julia", "acceptance")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_num = {"type": "number"}
_int = {"type": "integer"}
_nums = {"type": "array", "items": _num, "minItems": 1}
_point = {"oneOf": [{"type": "array", "items": _num, "minItems": 1},
                    {"type": "string", "enum": ["inf"]}]}
_region = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["space", "sphere", "unit-ball", "ball", "box", "half-space"]},
        "center": _nums, "radius": _num, "lo": _nums, "hi": _nums, "axis": _int,
    },
}
_metric = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["euclidean", "spherical", "hyperbolic", "quasihyperbolic"]},
        "region": _region,
        "cells": _int, "levels": _int,
    },
}
MAP_KINDS = ["identity", "constant", "radial-power", "zorich", "zorich-bloch", "mobius-ball",
             "mobius-halfspace", "spherical-isometry", "translation", "rotation", "linear",
             "stretch", "planar-polynomial", "qc-conjugate", "exp", "exp-exp",
             "piecewise-linear"]
_map = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": MAP_KINDS},
        "t": _num, "K": _num, "m": _int, "value": _nums, "a": _nums, "p": _point,
        "matrix": {"type": "array", "items": _nums},
        "coeffs": {"type": "array", "items": {"oneOf": [_num, {"type": "array", "items": _num,
                                                                "minItems": 2, "maxItems": 2}]}},
        "stretch": _nums,
        "base": {"$ref": "#/$defs/map"},
    },
}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"map": _map},
    "type": "object",
    "additionalProperties": False,
    "required": ["dimension"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "dimension": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 0},
        "map": {"$ref": "#/$defs/map"},
        "metric": _metric, "metric_in": _metric, "metric_out": _metric,
        "tau_Y": _metric, "tau_Z": _metric,
        "x": _point, "y": _point, "x0": _point,
        "points": {"type": "array", "items": _nums},
        "region": _region,
        "alpha": _num,
        "pairs": _int, "samples": _int, "anchors": _int, "centers": _int,
        "ball_samples": _int, "sphere_samples": _int, "mc_samples": _int,
        "refinement": _int, "steps": _int,
        "scales": _nums, "deltas": _nums, "radii": _nums, "boundary_approach": _nums,
        "separations": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "isometries": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["hyperbolic", "translation", "spherical"]},
                           "spread": _num},
        },
        "search_radius": _num,
        "window": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        "resolution": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
        "origin": _nums,
        "axes": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
        "r_list": _nums, "m_list": {"type": "array", "items": _int, "minItems": 1},
        "threshold": _num, "slack": _num,
        "ray": {"type": "object", "additionalProperties": False, "required": ["center", "zeta"],
                "properties": {"center": _nums, "zeta": _point, "direction": _nums}},
        "probe": _point,
        "checks": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 13}},
        "expect": {
            "type": "object", "additionalProperties": False,
            "properties": {"value": _num, "tol": _num, "verdict": {"type": "string"},
                           "escher": {"type": "boolean"}, "yosida": {"type": "boolean"}},
        },
    },
}


# --------------------------------------------------------------------------
# building objects from config


def _point_value(v, n: int) -> np.ndarray:
    if isinstance(v, str):
        return np.full(n, np.inf)
    p = np.asarray(v, dtype=np.float64)
    if p.size != n:
        raise ConfigError(f"point {v} does not have {n} coordinates")
    return p


def build_region(spec: dict, n: int) -> M.Region:
    kind = spec["kind"]
    if kind == "space":
        return M.whole_space(n)
    if kind == "sphere":
        return M.riemann_sphere(n)
    if kind == "unit-ball":
        return M.unit_ball(n)
    if kind == "ball":
        return M.ball(spec.get("center", [0.0] * n), spec.get("radius", 1.0))
    if kind == "box":
        if "lo" not in spec or "hi" not in spec:
            raise ConfigError("a box region needs 'lo' and 'hi'")
        return M.box(spec["lo"], spec["hi"])
    return M.half_space(n, spec.get("axis", -1))


def build_metric(spec: dict, n: int) -> M.ConformalMetric:
    kind = spec["kind"]
    region = build_region(spec["region"], n) if "region" in spec else None
    if kind == "euclidean":
        return M.euclidean(n, region)
    if kind == "spherical":
        return M.spherical(n)
    if kind == "hyperbolic":
        return M.hyperbolic(n)
    if region is None:
        raise ConfigError("the quasihyperbolic metric needs a 'region'")
    return M.quasihyperbolic(region)


def build_map(spec: dict, n: int) -> Z.QRMap:
    kind = spec["kind"]

    def need(key):
        if key not in spec:
            raise ConfigError(f"map kind {kind!r} needs the key {key!r}")
        return spec[key]

    if kind == "identity":
        f = Z.identity(n)
    elif kind == "constant":
        f = Z.constant(n, spec.get("value"))
    elif kind == "radial-power":
        f = Z.radial_power(need("t"), n)
    elif kind == "zorich":
        f = Z.zorich()
    elif kind == "zorich-bloch":
        f = Z.zorich_bloch()
    elif kind == "mobius-ball":
        f = Z.mobius_ball_isometry(need("a"))
    elif kind == "mobius-halfspace":
        f = Z.mobius_ball_to_halfspace(n)
    elif kind == "spherical-isometry":
        f = Z.spherical_isometry_to_zero(_point_value(need("p"), n))
    elif kind == "translation":
        f = Z.translation(need("a"))
    elif kind == "rotation":
        f = Z.rotation(need("matrix"))
    elif kind == "linear":
        f = Z.linear(need("matrix"))
    elif kind == "stretch":
        f = Z.stretch_family(need("K"))
    elif kind == "planar-polynomial":
        coeffs = [complex(c[0], c[1]) if isinstance(c, list) else complex(c)
                  for c in need("coeffs")]
        f = Z.planar_polynomial(coeffs)
    elif kind == "qc-conjugate":
        f = Z.qc_conjugate(build_map(need("base"), n), need("stretch"))
    elif kind == "exp":
        f = Z.complex_exp()
    elif kind == "exp-exp":
        f = Z.exp_exp()
    else:
        f = Z.piecewise_linear(need("m"))
    if f.dim != n:
        raise ConfigError(f"map kind {kind!r} acts in dimension {f.dim}, config says {n}")
    return f


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<top level>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc


# --------------------------------------------------------------------------
# commands


def _require(cfg: dict, *keys):
    for k in keys:
        if k not in cfg:
            raise ConfigError(f"this command needs the key {k!r}")
    return [cfg[k] for k in keys]


def _check_value(cfg, value, checks):
    exp = cfg.get("expect", {})
    if "value" in exp:
        tol = exp.get("tol", 1e-9)
        checks.append({"name": "value", "passed": bool(abs(value - exp["value"]) <= tol)})


def cmd_dist(cfg, n, seed, out, threads, checks):
    (mspec, x, y) = _require(cfg, "metric", "x", "y")
    metric = build_metric(mspec, n)
    x, y = _point_value(x, n), _point_value(y, n)
    row = {"metric": metric.kind}
    if metric.kind == "quasihyperbolic":
        est = M.dist_quasihyperbolic(metric.region, x, y, cells=mspec.get("cells", 16),
                                     levels=mspec.get("levels", 3))
        value = est.value
        row.update(value=est.value, lower=est.lower_bound, upper=est.upper_bound)
    else:
        value = float(M.distance(metric, x, y))
        row.update(value=value)
    print(f"{value:.8g}")
    _check_value(cfg, value, checks)
    return {"dist.csv": [row]}


def _metrics_in_out(cfg, n):
    mi, mo = _require(cfg, "metric_in", "metric_out")
    return build_metric(mi, n), build_metric(mo, n)


def cmd_holder(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    mi, mo = _metrics_in_out(cfg, n)
    region = build_region(_require(cfg, "region")[0], n)
    alpha = cfg.get("alpha", f.alpha)
    anchor = _point_value(cfg["x0"], n) if "x0" in cfg else None
    fit = C.holder_constant(f, mi, mo, region, alpha, cfg.get("pairs", 4096), seed,
                            tuple(cfg.get("separations", (1e-4, 1.0))), anchor)
    print(f"{fit.L_hat:.8g}")
    _check_value(cfg, fit.L_hat, checks)
    return {"holder.csv": fit}


def cmd_exponent(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    mi, mo = _metrics_in_out(cfg, n)
    x0 = _point_value(cfg.get("x0", [0.0] * n), n)
    fit = C.local_holder_exponent(f, mi, mo, x0, cfg.get("scales"), cfg.get("samples", 64), seed)
    print(f"{fit.exponent_hat:.8g}")
    _check_value(cfg, fit.exponent_hat, checks)
    return {"exponent.csv": fit}


def _sampler(cfg, n, seed):
    spec = cfg.get("isometries", {"kind": "translation"})
    kw = {"spread": spec["spread"]} if "spread" in spec else {}
    return Z.IsometrySampler(spec["kind"], n, seed=seed, **kw)


def cmd_normality(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    mi, mo = _metrics_in_out(cfg, n)
    x0 = _point_value(cfg["x0"], n) if "x0" in cfg else None
    prof = C.continuity_profile(f, _sampler(cfg, n, seed), mi, mo,
                                cfg.get("deltas", [1.0, 0.1, 0.01, 0.001]),
                                cfg.get("samples", 2000), seed, cfg.get("anchors", 64),
                                x0=x0, threshold=cfg.get("threshold"))
    print(prof.verdict)
    exp = cfg.get("expect", {})
    if "verdict" in exp:
        checks.append({"name": "verdict", "passed": prof.verdict == exp["verdict"]})
    wit = [{"anchor": " ".join(format(v, ".17g") for v in w.anchor),
            "point": " ".join(format(v, ".17g") for v in w.point),
            "d_in": w.d_in, "d_out": w.d_out} for w in prof.witnesses]
    return {"profile.csv": prof, "witnesses.csv": wit}


def cmd_qf(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    mi, mo = _metrics_in_out(cfg, n)
    alpha = cfg.get("alpha", f.alpha)
    scales = np.asarray(cfg.get("scales", [1e-1, 1e-2, 1e-3, 1e-4]))
    pts = np.atleast_2d(cfg.get("points", [cfg.get("x0", [0.0] * n)]))
    rows = []
    for p in pts:
        rat = C.q_ratios(f, mi, mo, p, alpha, scales, cfg.get("samples", 64), seed)
        rows += [{"point": " ".join(format(v, ".17g") for v in p), "scale": s, "ratio": q}
                 for s, q in zip(scales, rat)]
    q = max(r["ratio"] for r in rows)
    print(f"{q:.8g}")
    _check_value(cfg, q, checks)
    return {"qf.csv": rows}


def cmd_bloch(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    st = C.bloch_R(f, cfg.get("centers", 1000),
                   cfg.get("boundary_approach", (0.0, 0.5, 0.9, 0.99, 0.999)),
                   cfg.get("ball_samples", 64), seed)
    print(f"{st.R_hat:.8g}")
    _check_value(cfg, st.R_hat, checks)
    summary = [{"R_hat": st.R_hat, "f0_norm": st.f0_norm,
                "bloch_radius_probe": st.bloch_radius_probe,
                "little_bloch_liminf": st.little_bloch_liminf}]
    return {"bloch.csv": summary, "little_bloch.csv": st}


def cmd_growth(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    radii = _require(cfg, "radii")[0]
    x0 = _point_value(cfg["x0"], n) if "x0" in cfg else None
    g = C.growth_suite(f, x0, radii, cfg.get("sphere_samples", 256), cfg.get("mc_samples", 0),
                       seed)
    print(f"{g.mu_hat:.8g}")
    _check_value(cfg, g.mu_hat, checks)
    return {"growth.csv": g, "order.csv": [{"mu_hat": g.mu_hat, "lambda_hat": g.lambda_hat,
                                            "omega_n": g.omega_n}]}


def cmd_bloch_check(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    st = C.bloch_R(f, cfg.get("centers", 1000),
                   cfg.get("boundary_approach", (0.0, 0.5, 0.9, 0.99, 0.999)),
                   cfg.get("ball_samples", 64), seed)
    rows = C.bloch_growth_check(f, cfg.get("radii", [0.9, 0.99, 0.999]), st,
                                cfg.get("sphere_samples", 512), seed, cfg.get("slack", 1.05))
    for r in rows:
        checks.append({"name": f"growth bound at r={r.r:g}", "passed": r.passed})
    return {"bloch_check.csv": [{"r": r.r, "M": r.M, "bound": r.bound, "pass": r.passed}
                                for r in rows]}


def cmd_zalcman(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    prof = C.continuity_profile(f, _sampler(cfg, n, seed), M.euclidean(n), M.spherical(n),
                                cfg.get("deltas", [1.0, 0.1, 0.01, 0.001]),
                                cfg.get("samples", 1000), seed, cfg.get("anchors", 64))
    seq = C.zalcman_rescale(f, cfg.get("alpha"), cfg.get("search_radius", 1.0),
                            cfg.get("refinement", 200), seed, prof.witnesses,
                            cfg.get("threshold", 10.0))
    print("yosida-evidence" if seq.yosida_evidence else f"rescaling sequence of length {len(seq)}")
    exp = cfg.get("expect", {})
    if "yosida" in exp:
        checks.append({"name": "yosida", "passed": seq.yosida_evidence == exp["yosida"]})
    if len(seq):
        checks.append({"name": "scale identity",
                       "passed": bool(np.max(seq.identity_residuals()) <= 1e-9)})
        return {"zalcman.csv": seq}
    return {"zalcman.csv": [{"m": -1, "rho": float("nan"), "M": seq.max_ratio,
                             "certificate": float("nan"), "holder_excess": float("nan")}]}


def cmd_escher(cfg, n, seed, out, threads, checks):
    ty, tz, ray = _require(cfg, "tau_Y", "tau_Z", "ray")
    r = [np.asarray(ray["center"], float), _point_value(ray["zeta"], n)]
    if "direction" in ray:
        r.append(np.asarray(ray["direction"], float))
    prof = M.escher_ratio_profile(build_metric(ty, n), build_metric(tz, n), tuple(r),
                                  steps=cfg.get("steps", 6))
    print("escher" if prof.escher else "not escher")
    exp = cfg.get("expect", {})
    if "escher" in exp:
        checks.append({"name": "escher", "passed": prof.escher == exp["escher"]})
    return {"escher.csv": prof}


def cmd_julia(cfg, n, seed, out, threads, checks):
    f = build_map(_require(cfg, "map")[0], n)
    window = _require(cfg, "window")[0]
    kw = dict(alpha=cfg.get("alpha"), r_list=cfg.get("r_list", D.DEFAULT_R),
              m_list=cfg.get("m_list", D.DEFAULT_M), samples=cfg.get("samples", 16),
              threshold=cfg.get("threshold", D.DEFAULT_THRESHOLD))
    grid = D.julia_grid(f, window, tuple(cfg.get("resolution", (256, 256))), seed=seed,
                        origin=cfg.get("origin"), axes=tuple(cfg.get("axes", (0, 1))),
                        threads=threads, **kw)
    frac = float(np.mean(grid.julia_mask))
    print(f"{frac:.8g}")
    outputs = {"julia.pgm": grid, "julia.csv": grid}
    if "probe" in cfg:
        outputs["probe.csv"] = D.julia_indicator(f, _point_value(cfg["probe"], n), seed=seed, **kw)
    return outputs


def cmd_acceptance(cfg, n, seed, out, threads, checks):
    results = acceptance.run_all(cfg.get("checks"))
    for r in results:
        checks.append({"name": f"{r.number} {r.name}", "passed": r.passed})
    return {"acceptance.csv": [{"number": r.number, "name": r.name, "passed": r.passed,
                                "seconds": r.seconds, "budget": r.budget} for r in results]}


HANDLERS = {"dist": cmd_dist, "holder": cmd_holder, "exponent": cmd_exponent,
            "normality": cmd_normality, "qf": cmd_qf, "bloch": cmd_bloch,
            "growth": cmd_growth, "bloch-check": cmd_bloch_check, "zalcman": cmd_zalcman,
            "escher": cmd_escher, "julia": cmd_julia, "acceptance": cmd_acceptance}


def _write(name: str, obj, path: Path) -> None:
    if name.endswith(".pgm"):
        write_pgm(obj, path)
    else:
        write_csv(obj, path)


def run(command: str, config=None, seed=None, out=None, threads=None) -> int:
    """Run one command; ``config`` is a path, a dict or None (acceptance only)."""
    t0 = time.perf_counter()
    try:
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
        if config is None:
            if command != "acceptance":
                raise ConfigError(f"command {command!r} needs --config")
            cfg = {"dimension": 3}
        elif isinstance(config, dict):
            cfg = dict(config)
            validate_config(cfg)
        else:
            cfg = load_config(config)
        if "command" in cfg and cfg["command"] != command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
        if seed is not None:
            if not 0 <= int(seed) < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg["seed"] = int(seed)
        cfg.setdefault("seed", 0)
        cfg["command"] = command
        if threads is None:
            threads = cfg.get("threads", 1)
        nthreads = (os.cpu_count() or 1) if threads == 0 else max(int(threads), 1)
        out_dir = Path(out if out is not None else "qrlab-out")
        checks: list = []
        try:
            outputs = HANDLERS[command](cfg, cfg["dimension"], cfg["seed"], out_dir,
                                       nthreads, checks)
        except (ParameterError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, RangeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
        written = ["config.json"]
        for name, obj in outputs.items():
            _write(name, obj, out_dir / name)
            written.append(name)
        passed = all(c["passed"] for c in checks)
        report = {"command": command, "seed": cfg["seed"],
                  "wall_time_s": time.perf_counter() - t0,
                  "outputs": written + ["report.json"], "checks": checks, "passed": passed}
        (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n",
                                             encoding="utf-8")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if passed else EXIT_CHECK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qrlab", description="Numerical experiments with "
                                 "quasiregular maps and conformal metrics.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--out", help="output directory (default qrlab-out)")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads, 0 = all cores; results do not depend on it")
    args = ap.parse_args(argv)
    return run(args.command, args.config, args.seed, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
