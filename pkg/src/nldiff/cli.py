"""Command-line entry point ``nldiff``.

Every command accepts ``--config FILE`` (YAML); flags given on the command line
override keys from the file.  Artifacts go to ``--out`` (relative paths are
resolved against ``$NLDIFF_OUTPUT_ROOT`` when set).  Exit status: 0 when every
report passes, 1 when a report fails, 2 for configuration errors, 3 for
numerical failures (partial artifacts are kept).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import pathlib
import sys

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__
from . import asymptotics as asy
from . import geometry as geo
from . import pde
from . import selfsimilar as ss
from .nonlinearity import PhiTransform, from_name

log = logging.getLogger("nldiff")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "NLDIFF_OUTPUT_ROOT"

COMMANDS = ("profile", "constant", "pde", "verify-varadhan", "verify-curvature", "verify-asympvol",
            "verify-barriers", "verify-stationarity", "verify-ordering")

DEFAULTS = {
    "nl": "heat", "nl_param": {}, "c": 1.0, "kind": "half", "tail_tolerance": None, "xi_max": None,
    "N": 2, "domain": "half-space", "normal": None, "offset": 0.0, "center": None, "radius": 1.0,
    "rho": 0.5, "slope": 0.0, "intercept": 0.0, "amplitude": 0.3, "frequency": 1.0,
    "origin": None, "extent": None, "n": None, "problem": "ibvp", "times": None,
    "closure": "pinned", "edges": None, "ratio": 1.2, "dt0": None,
    "band": [0.2, 0.5], "R": 0.25, "contact": None, "s_factors": [1e-2, 1e-3, 1e-4],
    "tolerance": None, "epsilon": 0.1, "eta": None, "region": None, "x_range": None,
    "offsets": [0.1, 0.0, -0.1], "slack": 1e-8, "seed": 0, "out": None, "threads": 1,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing

def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    k, v = text.split("=", 1)
    return k, float(v)


def build_parser():
    p = argparse.ArgumentParser(prog="nldiff", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=pathlib.Path)
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--nl")
        s.add_argument("--nl-param", type=_kv, action="append", dest="nl_param")
        s.add_argument("--tolerance", type=float)
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("profile", "constant", "verify-barriers"):
            s.add_argument("--kind", choices=["half", "whole"])
        if name == "profile":
            s.add_argument("--c", type=float)
            s.add_argument("--tail-tolerance", type=float, dest="tail_tolerance")
            s.add_argument("--xi-max", type=float, dest="xi_max")
        if name in ("constant", "verify-asympvol"):
            s.add_argument("--N", type=int)
        if name not in ("profile", "constant"):
            s.add_argument("--domain", choices=["half-space", "ball-interior", "ball-exterior",
                                                "parabola", "affine", "sinusoid"])
            s.add_argument("--normal", type=_floats)
            s.add_argument("--offset", type=float)
            s.add_argument("--center", type=_floats)
            s.add_argument("--radius", type=float)
            s.add_argument("--rho", type=float)
            s.add_argument("--slope", type=float)
            s.add_argument("--intercept", type=float)
            s.add_argument("--amplitude", type=float)
            s.add_argument("--frequency", type=float)
        if name not in ("profile", "constant", "verify-asympvol"):
            s.add_argument("--origin", type=_floats)
            s.add_argument("--extent", type=_floats)
            s.add_argument("--n", type=lambda t: [int(v) for v in _floats(t)])
            s.add_argument("--times", type=_floats)
            s.add_argument("--problem", choices=["ibvp", "cauchy"])
            s.add_argument("--closure", choices=["pinned", "ghost"])
            s.add_argument("--ratio", type=float)
            s.add_argument("--dt0", type=float)
        if name in ("verify-curvature", "verify-asympvol", "verify-stationarity"):
            s.add_argument("--R", type=float)
        if name in ("verify-curvature", "verify-asympvol"):
            s.add_argument("--contact", type=_floats)
        if name == "verify-asympvol":
            s.add_argument("--s-factors", type=_floats, dest="s_factors")
        if name == "verify-varadhan":
            s.add_argument("--band", type=_floats)
        if name == "verify-barriers":
            s.add_argument("--epsilon", type=float)
            s.add_argument("--eta", type=float)
            s.add_argument("--region", type=_floats)
        if name == "verify-stationarity":
            s.add_argument("--x-range", type=_floats, dest="x_range")
        if name == "verify-ordering":
            s.add_argument("--offsets", type=_floats)
            s.add_argument("--slack", type=float)
    return p


def load_config(args):
    """Merge defaults, the YAML file and explicit flags (in that order)."""
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            data = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        unknown = set(data) - set(cfg) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k.replace("-", "_"): v for k, v in data.items() if k != "command"})
    for k, v in vars(args).items():
        if k in ("command", "config", "verbose") or v is None:
            continue
        cfg[k] = dict(v) if k == "nl_param" else v
    cfg["command"] = args.command
    validate(cfg)
    return cfg


def validate(cfg):
    for key in ("tolerance", "slack", "ratio", "dt0", "tail_tolerance", "xi_max", "R", "epsilon", "eta"):
        v = cfg.get(key)
        if v is not None and (not isinstance(v, (int, float)) or not v > 0):
            raise ConfigError(f"{key} must be positive")
    for key in ("times", "s_factors"):
        v = cfg.get(key)
        if v is not None:
            arr = np.asarray(v, dtype=float)
            if arr.ndim != 1 or arr.size == 0 or np.any(arr <= 0):
                raise ConfigError(f"{key} must be a non-empty list of positive numbers")
            if key == "times" and np.any(np.diff(arr) <= 0):
                raise ConfigError("times must be strictly increasing")
    if cfg["kind"] not in ("half", "whole", "half_line", "whole_line"):
        raise ConfigError("kind must be half or whole")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")


# ---------------------------------------------------------------------------
# builders

def build_nonlinearity(cfg):
    try:
        return from_name(cfg["nl"], **cfg["nl_param"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad nonlinearity: {exc}") from exc


def build_domain(cfg, dim=2):
    kind = cfg["domain"]
    try:
        if kind == "half-space":
            normal = cfg["normal"] or list(np.eye(dim)[-1])
            return geo.DomainGeometry.half_space(normal, cfg["offset"])
        if kind in ("ball-interior", "ball-exterior"):
            center = cfg["center"] or [0.0] * dim
            make = geo.DomainGeometry.ball_interior if kind == "ball-interior" else geo.DomainGeometry.ball_exterior
            return make(center, cfg["radius"])
        if kind == "parabola":
            graph = geo.QuadraticGraph.isotropic(cfg["rho"], dim - 1)
        elif kind == "affine":
            graph = geo.AffineGraph([cfg["slope"]] * (dim - 1), cfg["intercept"])
        elif kind == "sinusoid":
            graph = geo.SinusoidGraph(cfg["amplitude"], cfg["frequency"], dim - 1)
        else:
            raise ConfigError(f"unknown domain {kind!r}")
        return geo.DomainGeometry.graph_domain(graph)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad domain: {exc}") from exc


def build_grid(cfg):
    if cfg["origin"] is None or cfg["extent"] is None or cfg["n"] is None:
        raise ConfigError("grid needs origin, extent and n")
    try:
        return pde.Grid(cfg["origin"], cfg["extent"], cfg["n"])
    except ValueError as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def _times(cfg):
    if cfg["times"] is None:
        raise ConfigError("times are required")
    return np.asarray(cfg["times"], dtype=float)


def _problem_kind(cfg):
    return ss.HALF_LINE if cfg["kind"] in ("half", "half_line") else ss.WHOLE_LINE


def _contact(cfg, dom):
    if cfg["contact"] is not None:
        return np.asarray(cfg["contact"], dtype=float)
    if dom.kind == geo.HALF_SPACE:
        n = dom.params["normal"]
        return n * dom.params["offset"]
    if dom.kind == geo.GRAPH_DOMAIN:
        return dom.boundary_point(np.zeros(dom.dimension - 1))
    raise ConfigError("contact point required for this domain")


def _solve(cfg, nl, dom, grid, times, problem=None):
    return pde.solve(nl, dom, grid, problem or cfg["problem"], times, closure=cfg["closure"],
                     edges=cfg["edges"], ratio=cfg["ratio"], dt0=cfg["dt0"])


# ---------------------------------------------------------------------------
# commands

def cmd_profile(cfg, out):
    nl = build_nonlinearity(cfg)
    est = ss.SelfSimilarProfile(nl, cfg["c"], _problem_kind(cfg), cfg["tail_tolerance"], cfg["xi_max"]).fit()
    p = est.profile_
    np.savetxt(out / "profile.csv", p.to_rows(), delimiter=",", fmt="%.17g", header="xi,f", comments="")
    tol = cfg["tolerance"] or 1e-6
    summary = p.summary()
    summary["passed"] = bool(summary["mass_residual"] <= tol)
    summary["tolerance"] = tol
    return [summary], summary["passed"]


def cmd_constant(cfg, out):
    nl = build_nonlinearity(cfg)
    kind = _problem_kind(cfg)
    value = ss.asymptotic_constant(nl, cfg["N"], kind)
    rec = {"c_phi_N": value, "N": cfg["N"], "kind": kind, "passed": bool(np.isfinite(value) and value > 0)}
    if kind == ss.WHOLE_LINE:
        rec["interpretation"] = "whole-line profile moment taken over xi > 0"
    return [rec], rec["passed"]


def cmd_pde(cfg, out):
    nl = build_nonlinearity(cfg)
    grid = build_grid(cfg)
    dom = build_domain(cfg, grid.dimension)
    f = _solve(cfg, nl, dom, grid, _times(cfg))
    f.export_csv(out)
    rec = json.loads(f.metadata_json())
    rec["passed"] = True
    return [rec], True


def _write_series(out, reports):
    with open(out / "series.csv", "w") as fh:
        for i, r in enumerate(reports):
            if i:
                fh.write("\n")
            fh.write(r.series_csv())


def cmd_verify_varadhan(cfg, out):
    nl = build_nonlinearity(cfg)
    grid = build_grid(cfg)
    dom = build_domain(cfg, grid.dimension)
    f = _solve(cfg, nl, dom, grid, _times(cfg))
    rep = asy.verify_varadhan(f, PhiTransform(nl).fit(), f.grid.domain, tuple(cfg["band"]),
                              tolerance=cfg["tolerance"] or 0.10)
    _write_series(out, [rep])
    return [rep.to_dict()], rep.passed


def cmd_verify_curvature(cfg, out):
    nl = build_nonlinearity(cfg)
    grid = build_grid(cfg)
    dom = build_domain(cfg, grid.dimension)
    ball = geo.TouchingBall.at(dom, _contact(cfg, dom), cfg["R"])
    rep = asy.verify_curvature_asymptotics(nl, dom, ball, cfg["problem"], _times(cfg), grid=grid,
                                           closure=cfg["closure"], ratio=cfg["ratio"], dt0=cfg["dt0"],
                                           tolerance=cfg["tolerance"] or 0.10)
    _write_series(out, [rep])
    return [rep.to_dict()], rep.passed


def cmd_verify_asympvol(cfg, out):
    dom = build_domain(cfg, cfg["N"])
    ball = geo.TouchingBall.at(dom, _contact(cfg, dom), cfg["R"])
    rep = asy.verify_asympvol(dom, ball, cfg["s_factors"], tolerance=cfg["tolerance"] or 0.01, seed=cfg["seed"])
    _write_series(out, [rep])
    return [rep.to_dict()], rep.passed


def cmd_verify_barriers(cfg, out):
    nl = build_nonlinearity(cfg)
    grid = build_grid(cfg)
    dom = build_domain(cfg, grid.dimension)
    times = _times(cfg)
    kind = _problem_kind(cfg)
    problem = pde.IBVP if kind == ss.HALF_LINE else pde.CAUCHY
    pair = ss.barrier_profiles(nl, cfg["epsilon"], cfg["eta"], kind)
    f = _solve(cfg, nl, dom, grid, times, problem)
    region = cfg["region"] or [pair.eta * math.sqrt(times[-1]), 0.1]
    tau, rows = asy.scan_sandwich_tau(f, pair, f.grid.domain, region)
    reports = []
    if tau > 0:
        reports.append(asy.barrier_sandwich_check(f, pair, f.grid.domain, region, (times[0], tau)))
    recs = [r.to_dict() for r in reports]
    recs.append({"tau": tau, "scan": [list(r) for r in rows], "passed": tau > 0})
    if reports:
        _write_series(out, reports)
    return recs, bool(tau > 0 and all(r.passed for r in reports))


def cmd_verify_stationarity(cfg, out):
    nl = build_nonlinearity(cfg)
    grid = build_grid(cfg)
    dom = build_domain(cfg, grid.dimension)
    f = _solve(cfg, nl, dom, grid, _times(cfg))
    rep = asy.stationarity_score(f, f.grid.domain, cfg["R"], x_range=cfg["x_range"],
                                 tolerance=cfg["tolerance"] or 1e-3)
    _write_series(out, [rep])
    return [rep.to_dict()], rep.passed


def cmd_verify_ordering(cfg, out):
    """Nested half spaces ``{x_N > offset}``: larger offsets give smaller domains and larger solutions."""
    nl = build_nonlinearity(cfg)
    grid = build_grid(cfg)
    times = _times(cfg)
    offsets = sorted(cfg["offsets"], reverse=True)
    normal = list(np.eye(grid.dimension)[-1])
    reports = []
    for problem in (pde.IBVP, pde.CAUCHY):
        fields = [_solve(cfg, nl, geo.DomainGeometry.half_space(normal, o), grid, times, problem)
                  for o in offsets]
        for big, small in zip(fields, fields[1:]):
            rep = asy.verify_ordering(small, big, cfg["slack"])
            rep.details["problem"] = problem
            reports.append(rep)
    _write_series(out, reports)
    return [r.to_dict() for r in reports], all(r.passed for r in reports)


HANDLERS = {
    "profile": cmd_profile,
    "constant": cmd_constant,
    "pde": cmd_pde,
    "verify-varadhan": cmd_verify_varadhan,
    "verify-curvature": cmd_verify_curvature,
    "verify-asympvol": cmd_verify_asympvol,
    "verify-barriers": cmd_verify_barriers,
    "verify-stationarity": cmd_verify_stationarity,
    "verify-ordering": cmd_verify_ordering,
}


def output_dir(cfg):
    out = pathlib.Path(cfg["out"] or f"nldiff-{cfg['command']}")
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = pathlib.Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _public_config(cfg):
    return {k: v for k, v in sorted(cfg.items()) if k not in ("out", "threads")}


def write_report(out, cfg, records, passed, error=None):
    doc = {
        "command": cfg["command"],
        "seed": cfg["seed"],
        "config": _public_config(cfg),
        "reports": records,
        "passed": bool(passed),
    }
    if error is not None:
        doc["error"] = error
    doc["metadata"] = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__}
    # json writes floats with repr, the shortest string that round-trips exactly
    (out / "report.json").write_text(json.dumps(asy._jsonable(doc), indent=2, allow_nan=True) + "\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        out = output_dir(cfg)
    except ConfigError as exc:
        print(f"nldiff: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=cfg["threads"]):
            records, passed = HANDLERS[cfg["command"]](cfg, out)
    except (ConfigError, pde.ResolutionError, geo.GeometryError) as exc:
        print(f"nldiff: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, AssertionError, ValueError, np.linalg.LinAlgError) as exc:
        log.exception("numerical failure")
        write_report(out, cfg, [], False, error=f"{type(exc).__name__}: {exc}")
        print(f"nldiff: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_report(out, cfg, records, passed)
    for rec in records:
        log.info("%s", rec)
    print(f"{'PASS' if passed else 'FAIL'} {cfg['command']} -> {out / 'report.json'}")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
