"""Config-driven experiment runner.

Experiments: ``check`` (assumption report), ``expand`` (coefficient
recursion), ``sweep`` (truncation error against the certified bound),
``monotone`` (energy decay along a decreasing coefficient schedule),
``precond`` (CG/PCG contrast benchmark), and ``oracle`` (dense brute-force
cross-check suite). Each run writes ``report.json`` plus experiment CSVs
under the output directory; ``sweep`` and ``precond`` also emit an SVG
log-log plot. Exit codes: 0 success, 1 experiment failure (details land in
report.json), 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import diffusion, expansion, precond
from .errors import ConfigInvalid, ExperimentFailed, ExpressionError, HcfemError
from .expr import parse_expression
from .forms import Basis, FormPair
from .linalg import SymMatrix
from .oracle import run_oracle_suite
from .svg import emit_svg_loglog

EXPERIMENTS = ("check", "expand", "sweep", "monotone", "precond", "oracle")

_TOY_NAMES = ("coupled2", "diag2")


@dataclass
class ExperimentConfig:
    """Validated experiment description (see :func:`validate_config`)."""

    experiment: str
    mesh: dict = None
    diffusivity: dict = None
    epsilons: list = None
    order: int = 1
    load: str = "1"
    seed: int = 0
    out: str = "./out"
    toy: str = None
    raw: dict = field(default_factory=dict, repr=False)


def _reject_unknown(section: dict, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigInvalid(
            f"unknown key(s) {sorted(unknown)} in {where}; allowed: "
            f"{sorted(allowed)}"
        )


def _epsilon_list(spec) -> list:
    if isinstance(spec, list):
        eps = [float(e) for e in spec]
    elif isinstance(spec, dict):
        _reject_unknown(spec, {"start", "stop", "points"}, "epsilons")
        try:
            start = float(spec["start"])
            stop = float(spec["stop"])
            points = int(spec["points"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad epsilons range: {exc}") from exc
        if points < 2 or start <= 0 or stop <= 0 or start <= stop:
            raise ConfigInvalid(
                "epsilons range needs start > stop > 0 and points >= 2"
            )
        eps = list(np.geomspace(start, stop, points))
    else:
        raise ConfigInvalid("epsilons must be a list or a {start, stop, points} range")
    if any(e <= 0 for e in eps):
        raise ConfigInvalid("epsilons must be positive")
    if any(a <= b for a, b in zip(eps, eps[1:])):
        raise ConfigInvalid("epsilons must be strictly descending")
    return eps


def _parse_field(text, where: str):
    try:
        return parse_expression(str(text))
    except ExpressionError as exc:
        raise ConfigInvalid(f"bad expression in {where}: {exc}") from exc


def validate_config(raw: dict) -> ExperimentConfig:
    """Strict validation: unknown keys are rejected at every level."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    _reject_unknown(
        raw,
        {"experiment", "mesh", "diffusivity", "epsilons", "order", "load",
         "seed", "out", "toy"},
        "config",
    )
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid(
            f"experiment must be one of {EXPERIMENTS}, got {experiment!r}"
        )

    toy = raw.get("toy")
    if toy is not None and toy not in _TOY_NAMES:
        raise ConfigInvalid(f"toy must be one of {_TOY_NAMES}, got {toy!r}")
    if toy is not None and ("mesh" in raw or "diffusivity" in raw):
        raise ConfigInvalid("a toy problem replaces mesh and diffusivity")

    mesh_cfg = raw.get("mesh")
    if mesh_cfg is not None:
        _reject_unknown(mesh_cfg, {"dim", "cells", "geometry"}, "mesh")
        if mesh_cfg.get("dim") not in (1, 2):
            raise ConfigInvalid("mesh.dim must be 1 or 2")
        if not isinstance(mesh_cfg.get("cells"), int) or mesh_cfg["cells"] < 2:
            raise ConfigInvalid("mesh.cells must be an integer >= 2")
        geo = mesh_cfg.get("geometry")
        if not isinstance(geo, dict):
            raise ConfigInvalid("mesh.geometry must be an object")
        _reject_unknown(geo, {"kind", "box", "axis", "fraction"}, "mesh.geometry")
        if geo.get("kind") not in ("interior_box", "boundary_strip"):
            raise ConfigInvalid(
                "geometry.kind must be 'interior_box' or 'boundary_strip'"
            )

    diff_cfg = raw.get("diffusivity")
    if diff_cfg is not None:
        _reject_unknown(diff_cfg, {"p1", "p2", "orientation"}, "diffusivity")
        orientation = diff_cfg.get("orientation", "lions_interior")
        if orientation not in ("lions_interior", "swapped"):
            raise ConfigInvalid(
                "diffusivity.orientation must be 'lions_interior' or 'swapped'"
            )
        _parse_field(diff_cfg.get("p1", "1"), "diffusivity.p1")
        _parse_field(diff_cfg.get("p2", "1"), "diffusivity.p2")

    if experiment != "oracle" and toy is None and mesh_cfg is None:
        raise ConfigInvalid(f"experiment {experiment!r} needs a mesh or a toy")

    epsilons = None
    if "epsilons" in raw:
        epsilons = _epsilon_list(raw["epsilons"])

    order = raw.get("order", 1)
    if not isinstance(order, int) or not (-1 <= order <= expansion.MAX_ORDER):
        raise ConfigInvalid(
            f"order must be an integer in [-1, {expansion.MAX_ORDER}]"
        )

    load = raw.get("load", "1")
    _parse_field(load, "load")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigInvalid("seed must be an integer")

    out = raw.get("out", "./out")
    if not isinstance(out, str):
        raise ConfigInvalid("out must be a path string")

    return ExperimentConfig(
        experiment=experiment,
        mesh=mesh_cfg,
        diffusivity=diff_cfg,
        epsilons=epsilons,
        order=order,
        load=str(load),
        seed=seed,
        out=out,
        toy=toy,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# Problem construction

def toy_problem(name: str):
    """Builtin 2x2 instances with a one-dimensional subspace."""
    if name == "coupled2":
        S1 = SymMatrix(np.array([[2.0, 0.0], [0.0, 0.0]]))
        S2 = SymMatrix(np.array([[1.0, 1.0], [1.0, 2.0]]))
    elif name == "diag2":
        S1 = SymMatrix(np.diag([1.0, 0.0]))
        S2 = SymMatrix(np.diag([0.0, 1.0]))
    else:
        raise ConfigInvalid(f"unknown toy {name!r}")
    B = Basis(np.array([[0.0], [1.0]]))
    return FormPair(S1, S2, B), np.array([1.0, 1.0])


def _build_geometry(geo: dict) -> diffusion.GeometryConfig:
    if geo["kind"] == "interior_box":
        box = geo.get("box")
        if box is None:
            raise ConfigInvalid("interior_box geometry needs a box")
        if isinstance(box[0], (int, float)):
            box = [box]
        return diffusion.GeometryConfig.interior_box(*box)
    return diffusion.GeometryConfig.boundary_strip(
        geo.get("axis", 0), geo.get("fraction")
    )


def _build_problem(config: ExperimentConfig):
    """(FormPair, load vector, mesh or None) for the configured problem."""
    if config.toy is not None:
        fp, eta = toy_problem(config.toy)
        return fp, eta, None
    geo = _build_geometry(config.mesh["geometry"])
    mesh = diffusion.build_mesh(config.mesh["dim"], config.mesh["cells"], geo)
    diff = config.diffusivity or {}
    spec = diffusion.DiffusivitySpec(
        p1=_wrap_field(diff.get("p1", "1"), mesh.dim),
        p2=_wrap_field(diff.get("p2", "1"), mesh.dim),
        orientation=diff.get("orientation", "lions_interior"),
    )
    fp = diffusion.assemble_forms(mesh, spec)
    eta = diffusion.load_vector(mesh, _wrap_field(config.load, mesh.dim))
    return fp, eta, mesh


def _wrap_field(text, dim: int):
    expr = parse_expression(str(text))
    if dim == 1:
        return lambda x: expr(x, 0.0)
    return lambda x, y: expr(x, y)


# ---------------------------------------------------------------------------
# Report plumbing

def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    return value


def _write_report(outdir: str, payload: dict) -> str:
    payload = dict(payload)
    payload["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    path = os.path.join(outdir, "report.json")
    with open(path, "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _constants(fp: FormPair) -> dict:
    rep = fp.assumptions()
    return {
        "alpha": rep.alpha,
        "alpha2": rep.alpha2,
        "C1": rep.C1,
        "C2": rep.C2,
        "kernel_match": rep.kernel_match,
        "passed": rep.passed,
    }


# ---------------------------------------------------------------------------
# Experiment implementations

def _run_check(config, outdir):
    fp, _, mesh = _build_problem(config)
    payload = {"constants": _constants(fp), "dim_X1": fp.m, "n": fp.n}
    if mesh is not None:
        payload["mesh"] = {"dim": mesh.dim, "cells": mesh.cells_per_side,
                           "interior_nodes": mesh.num_interior}
    return payload, fp.assumptions().passed


def _run_expand(config, outdir):
    fp, eta, _ = _build_problem(config)
    result = expansion.laurent_coefficients(fp, eta, config.order)
    result.to_csv(os.path.join(outdir, "expansion.csv"))
    norms = [float(np.linalg.norm(c)) for c in result.coeffs]
    payload = {
        "constants": _constants(fp),
        "order": config.order,
        "bound_constant": result.bound_constant,
        "coefficient_norms": norms,
    }
    return payload, True


def _run_sweep(config, outdir):
    fp, eta, _ = _build_problem(config)
    epsilons = config.epsilons or list(np.geomspace(1e-1, 1e-6, 6))
    table = expansion.expansion_error_sweep(fp, eta, config.order, epsilons)
    table.to_csv(os.path.join(outdir, "sweep.csv"))
    warnings = emit_svg_loglog(
        [("error", table.epsilons, table.errors),
         ("bound", table.epsilons, table.bounds)],
        os.path.join(outdir, "sweep.svg"),
        title=f"truncation error vs contrast (k={config.order})",
        xlabel="epsilon",
        ylabel="l2 error",
    )
    within = [
        err <= bnd * (1.0 + 1e-8)
        for err, bnd, ok in zip(table.errors, table.bounds, table.above_floor)
        if ok
    ]
    payload = {
        "constants": _constants(fp),
        "order": config.order,
        "fitted_order": table.fitted_order,
        "errors_within_bound": bool(all(within)) if within else True,
        "points_above_floor": int(sum(table.above_floor)),
        "warnings": warnings,
    }
    return payload, payload["errors_within_bound"]


def _run_monotone(config, outdir):
    if config.toy is not None:
        raise ConfigInvalid("monotone experiment needs a mesh, not a toy")
    geo = _build_geometry(config.mesh["geometry"])
    mesh = diffusion.build_mesh(config.mesh["dim"], config.mesh["cells"], geo)
    diff = config.diffusivity or {}
    pbar = _piecewise_field(mesh, diff)
    bump = (mesh.element_labels == 2).astype(float)
    deltas = config.epsilons or [0.5 * 2.0 ** (-j) for j in range(6)]
    rhs = diffusion.load_vector(mesh, _wrap_field(config.load, mesh.dim))
    values = diffusion.monotone_experiment(mesh, pbar, bump, deltas, rhs)

    with open(os.path.join(outdir, "monotone.csv"), "w", newline="") as fh:
        fh.write("delta,value\n")
        for d, v in zip(deltas, values):
            fh.write(f"{d:.17g},{v:.17g}\n")

    diffs = [a - b for a, b in zip(values, values[1:])]
    slack = 1e-12 * max(abs(v) for v in values)
    monotone = all(d >= -slack for d in diffs)
    payload = {
        "deltas": deltas,
        "values": values,
        "differences": diffs,
        "monotone": bool(monotone),
    }
    return payload, monotone


def _run_precond(config, outdir):
    fp, eta, mesh = _build_problem(config)
    epsilons = config.epsilons or list(np.geomspace(1e-2, 1e-8, 7))
    orientation = "lions_interior"
    if config.diffusivity:
        orientation = config.diffusivity.get("orientation", "lions_interior")

    def system_for(eps):
        return diffusion.epsilon_system(fp, eps, orientation)

    def precond_for(eps):
        return precond.build_expansion_preconditioner(fp, config.order, eps)

    report = precond.pcg_benchmark(epsilons, system_for, precond_for, eta)
    report.to_csv(os.path.join(outdir, "bench.csv"))
    warnings = emit_svg_loglog(
        [("plain CG", epsilons, [float(i) for i in report.iters_plain]),
         ("PCG", epsilons, [float(i) for i in report.iters_precond])],
        os.path.join(outdir, "bench.svg"),
        title=f"iterations vs contrast (k={config.order})",
        xlabel="epsilon",
        ylabel="iterations",
    )
    payload = {
        "constants": _constants(fp),
        "order": config.order,
        "epsilons": epsilons,
        "iters_plain": report.iters_plain,
        "iters_precond": report.iters_precond,
        "deviation": report.deviation,
        "max_over_min_precond": (
            max(report.iters_precond) / max(min(report.iters_precond), 1)
        ),
        "warnings": warnings,
    }
    return payload, True


def _run_oracle(config, outdir):
    report = run_oracle_suite(seed=config.seed or 20240901)
    payload = {
        "cases": report.cases,
        "checks": report.checks,
        "failures": report.failures,
        "passed": report.passed,
    }
    return payload, report.passed


def _piecewise_field(mesh, diff_cfg):
    p1 = _wrap_field(diff_cfg.get("p1", "1"), mesh.dim)
    p2 = _wrap_field(diff_cfg.get("p2", "1"), mesh.dim)
    cents = mesh.centroids()
    if mesh.dim == 1:
        v1 = np.broadcast_to(np.asarray(p1(cents[:, 0]), dtype=float),
                             (mesh.num_elements,))
        v2 = np.broadcast_to(np.asarray(p2(cents[:, 0]), dtype=float),
                             (mesh.num_elements,))
    else:
        v1 = np.broadcast_to(np.asarray(p1(cents[:, 0], cents[:, 1]), dtype=float),
                             (mesh.num_elements,))
        v2 = np.broadcast_to(np.asarray(p2(cents[:, 0], cents[:, 1]), dtype=float),
                             (mesh.num_elements,))
    return np.where(mesh.element_labels == 1, v1, v2)


_RUNNERS = {
    "check": _run_check,
    "expand": _run_expand,
    "sweep": _run_sweep,
    "monotone": _run_monotone,
    "precond": _run_precond,
    "oracle": _run_oracle,
}


def run(config: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit code."""
    outdir = config.out
    os.makedirs(outdir, exist_ok=True)
    base = {
        "experiment": config.experiment,
        "seed": config.seed,
        "config": config.raw,
    }
    try:
        payload, ok = _RUNNERS[config.experiment](config, outdir)
    except ConfigInvalid:
        raise
    except HcfemError as exc:
        base.update({"passed": False,
                     "failure": f"{type(exc).__name__}: {exc}"})
        _write_report(outdir, base)
        _summary_line(config.experiment, False)
        return 1
    base.update(payload)
    base.setdefault("passed", bool(ok))
    base["passed"] = bool(ok)
    base.setdefault("failure", None)
    _write_report(outdir, base)
    _summary_line(config.experiment, bool(ok))
    if config.experiment == "oracle" and not ok:
        return 1
    return 0


def _summary_line(name: str, ok: bool) -> None:
    status = "ok" if ok else "FAILED"
    if os.environ.get("NO_COLOR"):
        print(f"[{name}] {status}")
    else:
        color = "\x1b[32m" if ok else "\x1b[31m"
        print(f"[{name}] {color}{status}\x1b[0m")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hcfem",
        description="High-contrast diffusion experiments: assumption checks, "
                    "expansion sweeps, monotone schedules, preconditioner "
                    "benchmarks, and oracle cross-checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to a JSON config")

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment with defaults")
        p.add_argument("--toy", choices=_TOY_NAMES, default=None)
        p.add_argument("--out", default="./out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--order", type=int, default=1)
        p.add_argument("--cells", type=int, default=16)
        p.add_argument("--dim", type=int, choices=(1, 2), default=2)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            try:
                with open(args.config) as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigInvalid(f"cannot read config: {exc}") from exc
            config = validate_config(raw)
        else:
            raw = {"experiment": args.command, "out": args.out,
                   "seed": args.seed, "order": args.order}
            if args.toy is not None:
                raw["toy"] = args.toy
            elif args.command != "oracle":
                if args.dim == 1:
                    geometry = {"kind": "interior_box", "box": [0.25, 0.75]}
                else:
                    geometry = {"kind": "interior_box",
                                "box": [[0.25, 0.75], [0.25, 0.75]]}
                raw["mesh"] = {"dim": args.dim, "cells": args.cells,
                               "geometry": geometry}
                raw["diffusivity"] = {"p1": "1", "p2": "1",
                                      "orientation": "lions_interior"}
            config = validate_config(raw)
        return run(config)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
