"""Command-line front end.

Subcommands: `cell` (homogenized tensor), `psi` (singularity costs),
`minimize` (single energy descent), `balls` (merging-disk timeline),
`scaling` (full study), `flat` (distance between two measure CSVs).
Each reads a strict-JSON config and writes its artifacts under --out.
Exit codes: 0 success, 2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Any, Optional

import numpy as np

from .ball_construction import WeightedBall, evolve
from .cell_problem import homogenized_tensor, refine_tensor
from .experiments import (
    ConfigError,
    coefficient_from_spec,
    emit_report,
    parse_config,
    run_scaling_study,
)
from .gl_solver import (
    GLParameters,
    MinimizeBudget,
    default_grid,
    gl_energy,
    minimize_gl,
    recovery_field,
)
from .singularity_cost import capital_psi, psi_of_z
from .solvers import SolverError
from .vortex_analysis import Rectangle, VortexMeasure, flat_distance

__all__ = ["main"]


def _load_json(path: Optional[str]) -> dict:
    if path is None:
        raise ConfigError("--config is required for this subcommand")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be an object")
    return data


def _write_json(payload: Any, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _domain_from(data: dict) -> Rectangle:
    if "domain" in data:
        dom = data["domain"]
        return Rectangle(tuple(dom["origin"]), tuple(dom["extent"]))
    return Rectangle((0.0, 0.0), (1.0, 1.0))


def _atoms_from(data: dict) -> tuple:
    entries = data.get("vortices")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'vortices' must be a nonempty list")
    atoms = []
    for entry in entries:
        atoms.append(((float(entry["x"]), float(entry["y"])), int(entry["charge"])))
    return tuple(atoms)


def _cmd_cell(args: argparse.Namespace) -> int:
    data = _load_json(args.config)
    coeff = coefficient_from_spec(data.get("coefficient"))
    payload: dict[str, Any]
    if "resolutions" in data:
        resolutions = [int(n) for n in data["resolutions"]]
        refinement = refine_tensor(coeff, resolutions)
        payload = {
            "tensor": refinement.tensor.to_json_dict(),
            "table": [t.to_json_dict() for t in refinement.table],
            "orders": dict(refinement.orders),
            "warning": refinement.warning,
        }
        tensor = refinement.tensor
    else:
        n = int(data.get("resolution", 256))
        tensor = homogenized_tensor(coeff, n=n)
        payload = {"tensor": tensor.to_json_dict()}
    path = _write_json(payload, args.out, "tensor.json")
    print(
        f"tensor: a11={tensor.a11:.7f} a12={tensor.a12:.3e} "
        f"a22={tensor.a22:.7f} det={tensor.det:.7f} -> {path}"
    )
    return 0


def _cmd_psi(args: argparse.Namespace) -> int:
    data = _load_json(args.config)
    z_values = [int(z) for z in data.get("z_values", [1])]
    if any(z == 0 for z in z_values):
        raise ConfigError("'z_values' must be nonzero integers")
    ratios = [float(r) for r in data.get("ratios", [10.0, 30.0, 100.0])]
    fixed_trace = bool(data.get("fixed_trace", False))
    n_theta = int(data.get("n_theta", 256))
    delta = data.get("delta")

    kwargs: dict[str, Any] = {"fixed_trace": fixed_trace, "n_theta": n_theta}
    if delta is not None:
        if "coefficient" not in data:
            raise ConfigError("oscillating mode ('delta' set) needs 'coefficient'")
        kwargs["coefficient"] = coefficient_from_spec(data["coefficient"])
        kwargs["delta"] = float(delta)
        if "cells_per_period" in data:
            kwargs["cells_per_period"] = float(data["cells_per_period"])
    elif "tensor" in data:
        spec = data["tensor"]
        from .cell_problem import HomogenizedTensor

        kwargs["tensor"] = HomogenizedTensor(
            float(spec["a11"]), float(spec.get("a12", 0.0)), float(spec["a22"]),
            0, 0.0,
        )
    elif "coefficient" in data:
        coeff = coefficient_from_spec(data["coefficient"])
        kwargs["tensor"] = homogenized_tensor(
            coeff, n=int(data.get("tensor_resolution", 256))
        )
    else:
        raise ConfigError("need 'delta'+'coefficient', 'tensor', or 'coefficient'")

    estimates = {}
    for k in sorted({abs(z) for z in z_values}):
        estimates[k] = psi_of_z(k, ratios, **kwargs)
    table = {k: est.value for k, est in estimates.items()}
    capitals = {}
    for z in z_values:
        # splitting search may need costs up to |z| even if only z requested
        for k in range(1, abs(z) + 1):
            if k not in table:
                estimates[k] = psi_of_z(k, ratios, **kwargs)
                table[k] = estimates[k].value
        value, split = capital_psi(table, z)
        capitals[z] = {"value": value, "splitting": list(split)}

    payload = {
        "psi": {str(k): est.to_json_dict() for k, est in estimates.items()},
        "capital_psi": {str(z): info for z, info in capitals.items()},
    }
    path = _write_json(payload, args.out, "psi.json")
    for k in sorted(estimates):
        print(f"psi({k}) = {estimates[k].value:.7f}")
    for z in z_values:
        info = capitals[z]
        print(f"Psi({z}) = {info['value']:.7f} splitting={info['splitting']}")
    print(f"-> {path}")
    return 0


def _cmd_minimize(args: argparse.Namespace) -> int:
    data = _load_json(args.config)
    coeff = coefficient_from_spec(data.get("coefficient"))
    epsilon = float(data.get("epsilon", 2.0**-6))
    delta = float(data.get("delta", epsilon))
    domain = _domain_from(data)
    mu = VortexMeasure(_atoms_from(data), domain)
    grid = default_grid(domain, epsilon, int(data.get("cells_per_epsilon", 4)))
    params = GLParameters(epsilon, delta, coeff, grid)
    relocate = bool(data.get("relocate", False))
    v0 = recovery_field(
        mu, params,
        s=data.get("s"), eta=data.get("eta"), relocate_cores=relocate,
    )
    if args.seed is not None:
        rng = np.random.default_rng(args.seed)
        noise = 1e-3 * rng.standard_normal(v0.values.shape)
        noise[0, :] = noise[-1, :] = 0.0
        noise[:, 0] = noise[:, -1] = 0.0
        v0 = type(v0)(v0.grid, v0.values + noise, s1_valued=False)
    budget = MinimizeBudget(max_iterations=int(data.get("max_iterations", 2000)))
    initial = gl_energy(v0, params)
    report = minimize_gl(v0, params, budget)

    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    with open(trace_path, "w", encoding="utf-8") as handle:
        handle.write("iteration,energy\n")
        for i, e in enumerate(report.trace):
            handle.write(f"{i},{e:.12g}\n")
    vortices_path = os.path.join(args.out, "vortices.csv")
    report.vortices.to_csv(vortices_path)
    payload = {
        "epsilon": epsilon,
        "delta": delta,
        "initial_energy": initial.total,
        "final_energy": report.energy.total,
        "gradient_term": report.energy.gradient_term,
        "potential_term": report.energy.potential_term,
        "iterations": report.iterations,
        "converged": report.converged,
        "vortices": [
            {"x": p[0], "y": p[1], "charge": z} for p, z in report.vortices.atoms
        ],
    }
    path = _write_json(payload, args.out, "minimize.json")
    print(
        f"energy {initial.total:.6f} -> {report.energy.total:.6f} in "
        f"{report.iterations} iterations (converged={report.converged}) -> {path}"
    )
    return 0


def _cmd_balls(args: argparse.Namespace) -> int:
    data = _load_json(args.config)
    entries = data.get("balls")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'balls' must be a nonempty list")
    try:
        balls = [
            WeightedBall(
                (float(b["x"]), float(b["y"])), float(b["radius"]),
                int(b["weight"]),
            )
            for b in entries
        ]
        timeline = evolve(balls, float(data.get("t_final", 1.0)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid ball family: {exc}") from exc
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "balls.csv")
    timeline.export_events_csv(csv_path)
    print(
        f"{len(balls)} balls, {len(timeline.events)} merge events up to "
        f"t={timeline.t_final:g} -> {csv_path}"
    )
    return 0


def _cmd_scaling(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    result = run_scaling_study(config, threads=args.threads, seed=args.seed)
    csv_path, json_path = emit_report(result.rows, result.summary, args.out)
    for row in result.rows:
        status = row.flag if row.flag else f"rel_gap={row.rel_gap:+.4f}"
        print(
            f"eps=2^{math.log2(row.epsilon):+.0f} delta={row.delta:.5g} "
            f"lambda={row.lambda_effective:.3f} E/|log eps|="
            f"{row.energy_per_log:.5f} predicted={row.predicted:.5f} {status}"
        )
    print(f"-> {csv_path}, {json_path}")
    return 0


def _cmd_flat(args: argparse.Namespace) -> int:
    domain = Rectangle((0.0, 0.0), (1.0, 1.0))
    if args.config:
        domain = _domain_from(_load_json(args.config))
    try:
        mu1 = VortexMeasure.from_csv(args.first, domain)
        mu2 = VortexMeasure.from_csv(args.second, domain)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load measures: {exc}") from exc
    result = flat_distance(mu1, mu2)
    print(f"flat distance = {result.value:.12g}")
    if args.out:
        payload = {
            "value": result.value,
            "breakdown": dict(result.breakdown),
            "plan": [
                {
                    "source": list(src) if src is not None else None,
                    "target": list(dst) if dst is not None else None,
                    "mass": mass,
                }
                for src, dst, mass in result.plan
            ],
        }
        path = _write_json(payload, args.out, "flat.json")
        print(f"-> {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="Vortex energy laboratory for periodically heterogeneous media",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument("--config", required=config_required,
                       help="path to a JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent rows")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for minimizer initialization perturbations")

    common(sub.add_parser("cell", help="solve the periodic cell problem"))
    common(sub.add_parser("psi", help="estimate singularity costs"))
    common(sub.add_parser("minimize", help="descend the energy once"))
    common(sub.add_parser("balls", help="grow and merge a ball family"))
    common(sub.add_parser("scaling", help="run a scaling study"))
    flat = sub.add_parser("flat", help="flat distance between two measure CSVs")
    flat.add_argument("first", help="CSV of the first measure (x,y,charge)")
    flat.add_argument("second", help="CSV of the second measure")
    common(flat, config_required=False)
    return parser


_HANDLERS = {
    "cell": _cmd_cell,
    "psi": _cmd_psi,
    "minimize": _cmd_minimize,
    "balls": _cmd_balls,
    "scaling": _cmd_scaling,
    "flat": _cmd_flat,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
