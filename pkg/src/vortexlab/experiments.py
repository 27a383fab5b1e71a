"""Config-driven scaling studies: schedule epsilon, pick delta by regime,
measure vortex energies, compare against the predicted limits, and emit
CSV/JSON reports.

A study is one coefficient, one vortex configuration, one delta-vs-epsilon
regime, and a geometric epsilon schedule.  Per epsilon the energy is
measured through one of three channels: the prescribed-degree proxy (a
single linear solve — the default, and the quantitative one), the energy
of the assembled recovery field, or a full minimization started from it.
Each row records energy/|log eps| next to the predicted limit

    2 pi ((1 - lambda) ess inf a + lambda sqrt(det A_hom)) |mu|,

with lambda = min(|log delta|/|log eps|, 1) computed from the actual
schedule, and A_hom always the tensor solved numerically in the same run.

Config files are strict JSON: unknown keys are rejected with their
location, so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__
from .cell_problem import HomogenizedTensor, homogenized_tensor
from .coefficients import (
    PeriodicCoefficient,
    checkerboard,
    constant,
    laminate,
    raster_from_file,
    smooth_trigonometric,
)
from .fields import CartesianGrid
from .gl_solver import (
    GLParameters,
    MinimizeBudget,
    core_radius_energy,
    default_grid,
    gl_energy,
    minimize_gl,
    recovery_field,
    relocated_measure,
)
from .singularity_cost import predicted_gamma_limit
from .solvers import SolverError
from .vortex_analysis import Rectangle, VortexMeasure

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ScalingRow",
    "StudyResult",
    "coefficient_from_spec",
    "parse_config",
    "run_scaling_study",
    "emit_report",
]

REGIMES = ("delta_proportional", "power_law", "log_slow")
CHANNELS = ("core_radius", "gl_recovery", "gl_minimize")

CSV_COLUMNS = (
    "epsilon",
    "delta",
    "lambda",
    "energy",
    "energy_per_log",
    "predicted",
    "rel_gap",
    "flag",
)


class ConfigError(ValueError):
    """Raised for malformed or schema-violating experiment configs."""


@dataclass(frozen=True)
class ExperimentConfig:
    coefficient: PeriodicCoefficient
    atoms: tuple[tuple[tuple[float, float], int], ...]
    domain: Rectangle
    regime: str
    regime_parameter: float
    epsilons: tuple[float, ...]
    channel: str = "core_radius"
    cells_per_epsilon: int = 4
    tensor_resolution: int = 256
    rtol: float = 1e-8
    max_iterations: int = 2000
    label: str = ""

    def measure(self) -> VortexMeasure:
        return VortexMeasure(self.atoms, self.domain)

    def echo(self) -> dict[str, Any]:
        """Effective configuration with defaults applied, for the summary."""
        return {
            "label": self.label,
            "coefficient": {
                "kind": self.coefficient.kind,
                "params": dict(self.coefficient.params),
            },
            "vortices": [
                {"x": p[0], "y": p[1], "charge": z} for p, z in self.atoms
            ],
            "domain": {
                "origin": list(self.domain.origin),
                "extent": list(self.domain.extent),
            },
            "regime": {"kind": self.regime, "parameter": self.regime_parameter},
            "epsilons": list(self.epsilons),
            "channel": self.channel,
            "cells_per_epsilon": self.cells_per_epsilon,
            "tensor_resolution": self.tensor_resolution,
            "rtol": self.rtol,
            "max_iterations": self.max_iterations,
        }


@dataclass(frozen=True)
class ScalingRow:
    epsilon: float
    delta: float
    lambda_effective: float
    energy: float
    energy_per_log: float
    predicted: float
    rel_gap: float
    flag: str = ""

    def __post_init__(self) -> None:
        if not (0.0 <= self.lambda_effective <= 1.0):
            raise ValueError(
                f"lambda_effective out of [0,1]: {self.lambda_effective}"
            )
        if not self.flag and not self.predicted > 0.0:
            raise ValueError(f"predicted limit must be positive: {self.predicted}")


@dataclass
class StudyResult:
    rows: list[ScalingRow]
    summary: dict[str, Any]


# -- config parsing -------------------------------------------------------------


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' at {where}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"missing key '{key}' at {where}")


def _number(obj: dict, key: str, where: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' at {where} must be a number, got {value!r}")
    return float(value)


def coefficient_from_spec(spec: Any, where: str = "coefficient") -> PeriodicCoefficient:
    """Build a coefficient from its JSON description.

    Kinds: constant {value}, checkerboard {alpha, beta}, laminate
    {alpha, beta, direction?, fraction?}, smooth {c0?, c1?}, raster {path}.
    """
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    kind = spec.get("kind")
    if kind == "constant":
        _require_keys(spec, {"kind", "value"}, {"value"}, where)
        return constant(_number(spec, "value", where))
    if kind == "checkerboard":
        _require_keys(spec, {"kind", "alpha", "beta"}, {"alpha", "beta"}, where)
        return checkerboard(_number(spec, "alpha", where), _number(spec, "beta", where))
    if kind == "laminate":
        _require_keys(
            spec,
            {"kind", "alpha", "beta", "direction", "fraction"},
            {"alpha", "beta"},
            where,
        )
        direction = tuple(spec.get("direction", (0, 1)))
        fraction = float(spec.get("fraction", 0.5))
        return laminate(
            _number(spec, "alpha", where),
            _number(spec, "beta", where),
            direction=direction,
            fraction=fraction,
        )
    if kind == "smooth":
        _require_keys(spec, {"kind", "c0", "c1"}, set(), where)
        return smooth_trigonometric(
            float(spec.get("c0", 2.0)), float(spec.get("c1", 1.0))
        )
    if kind == "raster":
        _require_keys(spec, {"kind", "path"}, {"path"}, where)
        return raster_from_file(str(spec["path"]))
    raise ConfigError(
        f"unknown coefficient kind {kind!r} at {where} "
        f"(expected constant/checkerboard/laminate/smooth/raster)"
    )


def _atoms_from_spec(spec: Any, where: str) -> tuple:
    if not isinstance(spec, list) or not spec:
        raise ConfigError(f"{where} must be a nonempty list")
    atoms = []
    for i, entry in enumerate(spec):
        sub = f"{where}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{sub} must be an object")
        _require_keys(entry, {"x", "y", "charge"}, {"x", "y", "charge"}, sub)
        charge = entry["charge"]
        if isinstance(charge, bool) or not isinstance(charge, int) or charge == 0:
            raise ConfigError(f"'charge' at {sub} must be a nonzero integer")
        atoms.append(
            ((_number(entry, "x", sub), _number(entry, "y", sub)), charge)
        )
    return tuple(atoms)


def _epsilons_from_spec(spec: Any, where: str) -> tuple[float, ...]:
    if isinstance(spec, dict):
        _require_keys(spec, {"k_min", "k_max"}, {"k_min", "k_max"}, where)
        k_min, k_max = spec["k_min"], spec["k_max"]
        for name, k in (("k_min", k_min), ("k_max", k_max)):
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise ConfigError(f"'{name}' at {where} must be an integer >= 1")
        if k_min > k_max:
            raise ConfigError(f"k_min > k_max at {where}")
        return tuple(2.0**-k for k in range(k_min, k_max + 1))
    if isinstance(spec, list) and spec:
        eps = []
        for i, value in enumerate(spec):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}[{i}] must be a number")
            value = float(value)
            if not (0.0 < value < 1.0):
                raise ConfigError(
                    f"{where}[{i}] must lie in (0,1), got {value}"
                )
            eps.append(value)
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"{where} must be strictly decreasing")
        return tuple(eps)
    raise ConfigError(
        f"{where} must be a {{k_min,k_max}} object or a decreasing list"
    )


def _regime_from_spec(spec: Any, where: str) -> tuple[str, float]:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    kind = spec.get("kind")
    if kind == "delta_proportional":
        _require_keys(spec, {"kind", "factor"}, set(), where)
        factor = float(spec.get("factor", 1.0))
        if factor <= 0:
            raise ConfigError(f"'factor' at {where} must be positive")
        return kind, factor
    if kind == "power_law":
        _require_keys(spec, {"kind", "lambda"}, {"lambda"}, where)
        lam = _number(spec, "lambda", where)
        if not (0.0 <= lam < 1.0):
            raise ConfigError(
                f"'lambda' at {where} must lie in [0,1), got {lam}"
            )
        return kind, lam
    if kind == "log_slow":
        _require_keys(spec, {"kind"}, set(), where)
        return kind, 0.0
    raise ConfigError(
        f"unknown regime kind {kind!r} at {where} (expected one of {REGIMES})"
    )


def parse_config(path: str) -> ExperimentConfig:
    """Read and validate a study config; ConfigError carries the location."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be an object")
    allowed = {
        "coefficient", "vortices", "domain", "regime", "epsilons",
        "channel", "solver", "label",
    }
    _require_keys(
        data, allowed, {"coefficient", "vortices", "regime", "epsilons"}, "top level"
    )

    coeff = coefficient_from_spec(data["coefficient"])
    atoms = _atoms_from_spec(data["vortices"], "vortices")
    if "domain" in data:
        dom = data["domain"]
        _require_keys(dom, {"origin", "extent"}, {"origin", "extent"}, "domain")
        domain = Rectangle(tuple(dom["origin"]), tuple(dom["extent"]))
    else:
        domain = Rectangle((0.0, 0.0), (1.0, 1.0))
    regime, parameter = _regime_from_spec(data["regime"], "regime")
    epsilons = _epsilons_from_spec(data["epsilons"], "epsilons")

    channel = data.get("channel", "core_radius")
    if channel not in CHANNELS:
        raise ConfigError(
            f"unknown channel {channel!r} (expected one of {CHANNELS})"
        )

    solver = data.get("solver", {})
    _require_keys(
        solver,
        {"cells_per_epsilon", "tensor_resolution", "rtol", "max_iterations"},
        set(),
        "solver",
    )
    cells = solver.get("cells_per_epsilon", 4)
    if isinstance(cells, bool) or not isinstance(cells, int) or cells < 4:
        raise ConfigError("'cells_per_epsilon' at solver must be an integer >= 4")
    tensor_n = solver.get("tensor_resolution", 256)
    if isinstance(tensor_n, bool) or not isinstance(tensor_n, int) or tensor_n < 16:
        raise ConfigError("'tensor_resolution' at solver must be an integer >= 16")
    rtol = float(solver.get("rtol", 1e-8))
    if not (0 < rtol < 1):
        raise ConfigError("'rtol' at solver must lie in (0,1)")
    max_iterations = solver.get("max_iterations", 2000)
    if (
        isinstance(max_iterations, bool)
        or not isinstance(max_iterations, int)
        or max_iterations < 1
    ):
        raise ConfigError("'max_iterations' at solver must be a positive integer")

    config = ExperimentConfig(
        coefficient=coeff,
        atoms=atoms,
        domain=domain,
        regime=regime,
        regime_parameter=parameter,
        epsilons=epsilons,
        channel=channel,
        cells_per_epsilon=cells,
        tensor_resolution=tensor_n,
        rtol=rtol,
        max_iterations=max_iterations,
        label=str(data.get("label", "")),
    )
    try:
        config.measure()  # validates atom placement inside the domain
    except ValueError as exc:
        raise ConfigError(f"vortices: {exc}") from exc
    return config


# -- study execution ------------------------------------------------------------


def _delta_for(config: ExperimentConfig, epsilon: float) -> float:
    if config.regime == "delta_proportional":
        return config.regime_parameter * epsilon
    if config.regime == "power_law":
        return epsilon**config.regime_parameter
    return 1.0 / abs(math.log(epsilon))


def _lambda_effective(epsilon: float, delta: float) -> float:
    return min(abs(math.log(delta)) / abs(math.log(epsilon)), 1.0)


def _grid_cells(config: ExperimentConfig, epsilon: float) -> int:
    lx = max(config.domain.extent)
    return 1 << max(4, math.ceil(math.log2(config.cells_per_epsilon * lx / epsilon)))


def _measure_one(
    config: ExperimentConfig,
    tensor: HomogenizedTensor,
    epsilon: float,
    seed: Optional[int],
) -> ScalingRow:
    delta = _delta_for(config, epsilon)
    lam = _lambda_effective(epsilon, delta)
    mu = config.measure()
    predicted = predicted_gamma_limit(config.coefficient, tensor, lam, mu)
    log_eps = abs(math.log(epsilon))
    relocate = config.regime in ("power_law", "log_slow")
    try:
        if config.channel == "core_radius":
            placeholder = CartesianGrid(config.domain.origin, config.domain.extent, (4, 4))
            params = GLParameters(epsilon, delta, config.coefficient, placeholder)
            used = (
                relocated_measure(mu, config.coefficient, delta) if relocate else mu
            )
            energy, _ = core_radius_energy(
                used, params, n=_grid_cells(config, epsilon), rtol=config.rtol
            )
        else:
            grid = default_grid(config.domain, epsilon, config.cells_per_epsilon)
            params = GLParameters(epsilon, delta, config.coefficient, grid)
            v = recovery_field(mu, params, relocate_cores=relocate)
            if config.channel == "gl_minimize":
                if seed is not None:
                    rng = np.random.default_rng(
                        [seed, int(round(-math.log2(epsilon)))]
                    )
                    noise = 1e-3 * rng.standard_normal(v.values.shape)
                    noise[0, :] = noise[-1, :] = 0.0
                    noise[:, 0] = noise[:, -1] = 0.0
                    v = type(v)(v.grid, v.values + noise, s1_valued=False)
                report = minimize_gl(
                    v, params, MinimizeBudget(max_iterations=config.max_iterations)
                )
                energy = report.energy.total
            else:
                energy = gl_energy(v, params).total
    except (SolverError, ValueError) as exc:
        return ScalingRow(
            epsilon, delta, lam, math.nan, math.nan, predicted, math.nan,
            flag=f"{type(exc).__name__}: {exc}",
        )
    per_log = energy / log_eps
    return ScalingRow(
        epsilon, delta, lam, energy, per_log, predicted,
        (per_log - predicted) / predicted,
    )


def run_scaling_study(
    config: ExperimentConfig,
    threads: int = 1,
    seed: Optional[int] = None,
) -> StudyResult:
    """Measure every epsilon in the schedule and assemble the summary.

    Rows are independent and scheduled across `threads` workers; the
    homogenized tensor is solved once up front and shared.  A failed row
    is flagged and the study continues.
    """
    t_start = time.perf_counter()
    tensor = homogenized_tensor(
        config.coefficient, n=config.tensor_resolution, rtol=1e-9
    )
    tensor_time = time.perf_counter() - t_start

    def job(epsilon: float) -> tuple[ScalingRow, float]:
        t0 = time.perf_counter()
        row = _measure_one(config, tensor, epsilon, seed)
        return row, time.perf_counter() - t0

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(job, config.epsilons))
    else:
        outcomes = [job(eps) for eps in config.epsilons]

    rows = [row for row, _ in outcomes]
    rows.sort(key=lambda r: -r.epsilon)
    timings = {f"{row.epsilon:.10g}": dt for row, dt in outcomes}

    clean = [r for r in rows if not r.flag]
    slope = None
    if len(clean) >= 2:
        x = np.array([1.0 / abs(math.log(r.epsilon)) for r in clean])
        y = np.array([r.energy_per_log - r.predicted for r in clean])
        slope = float(np.polyfit(x, y, 1)[0])

    summary: dict[str, Any] = {
        "config": config.echo(),
        "tensor": tensor.to_json_dict(),
        "trend_slope": slope,
        "rows_total": len(rows),
        "rows_flagged": sum(1 for r in rows if r.flag),
        "seed": seed,
        "threads": threads,
        "versions": {
            "vortexlab": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
        "timings_seconds": {
            "tensor": tensor_time,
            "rows": timings,
            "total": time.perf_counter() - t_start,
        },
    }
    return StudyResult(rows, summary)


# -- reporting -----------------------------------------------------------------


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else format(value, ".12g")


def emit_report(rows: list[ScalingRow], summary: dict, out_dir: str) -> tuple[str, str]:
    """Write scaling.csv and summary.json under out_dir; return their paths.

    The CSV is byte-deterministic for identical configs and solver seeds:
    fixed column order, fixed float formatting, no timestamps (wall-clock
    timings live in the JSON sidecar only).
    """
    if not rows:
        raise ValueError("no rows to report")
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "scaling.csv")
    json_path = os.path.join(out_dir, "summary.json")
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                (
                    _fmt(row.epsilon),
                    _fmt(row.delta),
                    _fmt(row.lambda_effective),
                    _fmt(row.energy),
                    _fmt(row.energy_per_log),
                    _fmt(row.predicted),
                    "" if row.flag else _fmt(row.rel_gap),
                    row.flag.replace(",", ";"),
                )
            )
        )
    with open(csv_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
    with open(json_path, "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return csv_path, json_path
