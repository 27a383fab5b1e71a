"""Heterogeneous Ginzburg-Landau energy: evaluation, recovery fields,
minimization, and the prescribed-degree (core-radius) proxy energy.

The energy of a two-component field v on a rectangle is

    E(v) = integral a(x/delta) |grad v|^2 + (1/eps^2) integral (1-|v|^2)^2.

Quadrature is edge-based for the gradient term (each edge weighted by the
coefficient at its midpoint and by the number of adjacent plaquettes) and
nodal for the potential; that combination has no spurious zero-energy
modes and gives exact values on affine fields.

`recovery_field` assembles the near-optimal competitor around a vortex
measure: a linear-modulus core of radius eps, a pure phase annulus, an
exact phase-corrector annulus solved with the fixed-trace annulus
minimizer when the coefficient oscillates, and the superposition of angle
fields far away.  `core_radius_energy` measures the prescribed-degree
minimum over unit-modulus fields outside eps-disks — a single linear
solve, and the quantitative measurement channel of the scaling studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import PeriodicCoefficient
from .fields import CartesianGrid, PolarGrid, VectorField2D
from .singularity_cost import (
    AnnulusProblem,
    min_annulus_energy,
    oscillating_annulus_grid,
)
from .solvers import SolveInfo, SolverError, dct2_preconditioner, pcg
from .vortex_analysis import Rectangle, VortexMeasure, detect_vortices

__all__ = [
    "GLParameters",
    "EnergyBreakdown",
    "MinimizeBudget",
    "MinimizationReport",
    "default_grid",
    "gl_energy",
    "relocated_measure",
    "recovery_field",
    "core_radius_energy",
    "minimize_gl",
]


@dataclass(frozen=True)
class GLParameters:
    """Problem data: coherence length, coefficient period, coefficient, grid.

    The domain is the grid's rectangle; boundary conditions are carried by
    the fields themselves (minimization holds boundary nodes fixed)."""

    epsilon: float
    delta: float
    coefficient: PeriodicCoefficient
    grid: CartesianGrid

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def domain(self) -> Rectangle:
        return Rectangle(self.grid.origin, self.grid.extent)


def default_grid(
    domain: Rectangle, epsilon: float, cells_per_eps: int = 4
) -> CartesianGrid:
    """Power-of-two grid satisfying the core resolution rule h <= eps/4."""
    target = max(domain.extent) * cells_per_eps / epsilon
    n = 1 << max(3, math.ceil(math.log2(target)))
    ny = round(n * domain.extent[1] / domain.extent[0])
    return CartesianGrid(domain.origin, domain.extent, (n, ny))


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    gradient_term: float
    potential_term: float


def _edge_coefficients(
    grid: CartesianGrid, coeff: PeriodicCoefficient, delta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient sampled at x-edge and y-edge midpoints, scaled by 1/delta."""
    x, y = grid.node_axes()
    h = grid.h
    mx, my = np.meshgrid(x[:-1] + 0.5 * h, y, indexing="ij")
    a_ex = coeff.eval(np.stack([mx, my], axis=-1).reshape(-1, 2) / delta)
    mx, my = np.meshgrid(x, y[:-1] + 0.5 * h, indexing="ij")
    a_ey = coeff.eval(np.stack([mx, my], axis=-1).reshape(-1, 2) / delta)
    nx, ny = grid.n
    return a_ex.reshape(nx, ny + 1), a_ey.reshape(nx + 1, ny)


def _node_area_weights(grid: CartesianGrid) -> np.ndarray:
    nx, ny = grid.n
    wx = np.ones(nx + 1)
    wx[0] = wx[-1] = 0.5
    wy = np.ones(ny + 1)
    wy[0] = wy[-1] = 0.5
    return grid.h**2 * wx[:, None] * wy[None, :]


def _edge_row_weights(grid: CartesianGrid) -> tuple[np.ndarray, np.ndarray]:
    """Plaquette-sharing weights: 1 for interior edge rows, 1/2 on the rim."""
    nx, ny = grid.n
    wx = np.ones((1, ny + 1))
    wx[0, 0] = wx[0, -1] = 0.5
    wy = np.ones((nx + 1, 1))
    wy[0, 0] = wy[-1, 0] = 0.5
    return wx, wy


def gl_energy(v: VectorField2D, params: GLParameters) -> EnergyBreakdown:
    """Energy of v with the parameters' coefficient, period, and eps."""
    grid = v.grid
    if not isinstance(grid, CartesianGrid):
        raise ValueError("the energy quadrature requires a Cartesian grid")
    w = v.values
    a_ex, a_ey = _edge_coefficients(grid, params.coefficient, params.delta)
    rx, ry = _edge_row_weights(grid)
    dx = w[1:, :, :] - w[:-1, :, :]
    dy = w[:, 1:, :] - w[:, :-1, :]
    grad = float(
        np.sum(a_ex * rx * np.sum(dx * dx, axis=-1))
        + np.sum(a_ey * ry * np.sum(dy * dy, axis=-1))
    )
    mod2 = np.sum(w * w, axis=-1)
    pot = float(
        np.sum(_node_area_weights(grid) * (1.0 - mod2) ** 2) / params.epsilon**2
    )
    return EnergyBreakdown(grad + pot, grad, pot)


# -- recovery construction -------------------------------------------------------


def relocated_measure(
    mu: VortexMeasure, coeff: PeriodicCoefficient, delta: float
) -> VortexMeasure:
    """Move each atom to the coefficient's minimum point of its delta-cell.

    The relocated position is delta * (floor(x/delta) + y_min) with y_min a
    minimum point of the coefficient on the unit cell; charges are kept.
    """
    ymin = coeff.min_point()
    atoms = []
    for (x, y), z in mu.atoms:
        p = (
            delta * (math.floor(x / delta) + ymin[0]),
            delta * (math.floor(y / delta) + ymin[1]),
        )
        if not mu.domain.contains(p):
            raise ValueError(
                f"relocated atom {p} leaves the domain; delta too coarse"
            )
        atoms.append((p, z))
    return VortexMeasure(tuple(atoms), mu.domain)


def _default_s(epsilon: float) -> float:
    loglog = math.log(max(abs(math.log(epsilon)), 1.0 + 1e-9))
    return min(max(1.0 - 1.0 / max(loglog, 1e-9), 0.05), 0.95)


def _interp_polar_phase(
    phi: np.ndarray, grid: PolarGrid, dx: np.ndarray, dy: np.ndarray
) -> np.ndarray:
    """Bilinear interpolation of a nodal (s, theta) table at offsets dx, dy."""
    ns, nt = phi.shape
    s = np.log(np.hypot(dx, dy) / grid.r_inner)
    ds = math.log(grid.r_outer / grid.r_inner) / (ns - 1)
    theta = np.mod(np.arctan2(dy, dx), 2.0 * math.pi)
    fs = np.clip(s / ds, 0.0, ns - 1 - 1e-12)
    js = np.floor(fs).astype(int)
    ts = fs - js
    ft = theta / grid.dtheta
    kt = np.floor(ft).astype(int) % nt
    tt = ft - np.floor(ft)
    kt1 = (kt + 1) % nt
    return (
        (1 - ts) * (1 - tt) * phi[js, kt]
        + ts * (1 - tt) * phi[js + 1, kt]
        + (1 - ts) * tt * phi[js, kt1]
        + ts * tt * phi[js + 1, kt1]
    )


def recovery_field(
    mu: VortexMeasure,
    params: GLParameters,
    s: Optional[float] = None,
    eta: Optional[float] = None,
    relocate_cores: bool = False,
) -> VectorField2D:
    """Near-optimal competitor field carrying the vortex measure mu.

    Around each atom (relocated to its coefficient-minimum cell point when
    `relocate_cores` is set): modulus ramp r/eps inside the eps-disk, pure
    phase out to r_mid = min(base^s, rho_bar/2) (base = delta when
    relocating, else eps), then — for non-constant coefficients — the
    fixed-trace annulus minimizer's phase corrector out to rho_bar, and the
    plain superposition of angle fields beyond.  rho_bar = min(rho, 1/2)
    with rho a third of the smallest pairwise/boundary distance.  `eta`
    only selects the minimum-cell level set and is accepted for interface
    stability (the analytic minimum point is used).

    Requires mu to be separated at scale eps and the grid to resolve the
    cores (h <= eps/4).
    """
    del eta  # analytic minimum point used; see relocated_measure
    grid = params.grid
    eps = params.epsilon
    if grid.h > eps / 4.0 * (1.0 + 1e-12):
        raise ValueError(
            f"grid spacing h={grid.h:.3e} violates the core resolution rule "
            f"h <= eps/4 = {eps / 4.0:.3e}"
        )
    if not mu.is_separated(eps):
        raise ValueError(
            f"measure separation {mu.separation():.3e} is below 2*eps; "
            "the construction needs disjoint core neighborhoods"
        )
    if relocate_cores:
        mu = relocated_measure(mu, params.coefficient, params.delta)

    if s is None:
        s = _default_s(eps)
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0,1), got {s}")

    atoms = mu.atoms
    xx, yy = grid.node_mesh()
    phase = np.zeros(grid.node_shape)
    for (ax, ay), z in atoms:
        phase += z * np.arctan2(yy - ay, xx - ax)
    modulus = np.ones(grid.node_shape)

    if atoms:
        dists = [mu.domain.boundary_distance(p) for p, _ in atoms]
        pos = [p for p, _ in atoms]
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                dists.append(math.dist(pos[i], pos[j]))
        rho_bar = min(min(dists) / 3.0, 0.5)
    else:
        rho_bar = 0.5

    base = params.delta if relocate_cores else eps
    r_mid = min(base**s, 0.5 * rho_bar)
    oscillating = params.coefficient.kind != "constant"

    for (ax, ay), z in atoms:
        dx = xx - ax
        dy = yy - ay
        r = np.hypot(dx, dy)
        core = r < eps
        modulus[core] = np.maximum(r[core], 1e-9 * grid.h) / eps
        if oscillating and r_mid > 1.5 * eps and r_mid < 0.75 * rho_bar:
            pgrid = oscillating_annulus_grid(
                r_mid, rho_bar, params.delta, center=(ax, ay)
            )
            problem = AnnulusProblem(
                pgrid, z, coefficient=params.coefficient,
                delta=params.delta, fixed_trace=True,
            )
            _, lifting = min_annulus_energy(problem)
            phi = lifting.values - z * pgrid.theta()[None, :]
            band = (r >= r_mid) & (r < rho_bar)
            if np.any(band):
                phase[band] += _interp_polar_phase(
                    phi, pgrid, dx[band], dy[band]
                )

    values = np.stack([modulus * np.cos(phase), modulus * np.sin(phase)],
                      axis=-1)
    return VectorField2D(grid, values, s1_valued=True)


# -- prescribed-degree proxy energy ------------------------------------------------


def _superposition_gradient(
    x: np.ndarray, y: np.ndarray, atoms
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the superposition of angle fields at given points."""
    g1 = np.zeros_like(x)
    g2 = np.zeros_like(x)
    for (ax, ay), z in atoms:
        dx = x - ax
        dy = y - ay
        r2 = dx * dx + dy * dy
        g1 += z * (-dy) / r2
        g2 += z * dx / r2
    return g1, g2


def core_radius_energy(
    mu: VortexMeasure,
    params: GLParameters,
    n: Optional[int] = None,
    rtol: float = 1e-8,
) -> tuple[float, SolveInfo]:
    """Minimum weighted Dirichlet energy of unit-modulus fields with the
    prescribed degrees, outside the union of eps-disks around the atoms.

    Writing the competitor's phase as (superposition of angle fields) +
    (single-valued correction) reduces the minimization to one linear
    solve on the cell-centered grid: n x n square cells over the domain,
    coefficient sampled at face midpoints, natural boundary conditions,
    DCT-preconditioned conjugate gradients on the active cells.
    """
    if not mu.atoms:
        raise ValueError("the proxy energy needs at least one atom")
    domain = mu.domain
    lx, ly = domain.extent
    if abs(lx - ly) > 1e-12 * lx:
        raise ValueError("the proxy solver expects a square domain")
    eps = params.epsilon
    if n is None:
        n = 1 << max(4, math.ceil(math.log2(4.0 * lx / eps)))
    h = lx / n
    ox, oy = domain.origin

    xc = ox + (np.arange(n) + 0.5) * h
    yc = oy + (np.arange(n) + 0.5) * h
    x1, x2 = np.meshgrid(xc, yc, indexing="ij")
    active = np.ones((n, n), dtype=bool)
    for (ax, ay), _ in mu.atoms:
        active &= (x1 - ax) ** 2 + (x2 - ay) ** 2 > eps**2
    nact = int(active.sum())
    if nact == 0:
        raise ValueError("no active cells: eps-disks cover the whole domain")

    coeff = params.coefficient
    delta = params.delta

    fx1, fx2 = np.meshgrid(ox + np.arange(1, n) * h, yc, indexing="ij")
    wx = coeff.eval(np.stack([fx1, fx2], axis=-1).reshape(-1, 2) / delta)
    wx = wx.reshape(n - 1, n) * (active[:-1, :] & active[1:, :])
    fy1, fy2 = np.meshgrid(xc, oy + np.arange(1, n) * h, indexing="ij")
    wy = coeff.eval(np.stack([fy1, fy2], axis=-1).reshape(-1, 2) / delta)
    wy = wy.reshape(n, n - 1) * (active[:, :-1] & active[:, 1:])

    gx = h * _superposition_gradient(fx1, fx2, mu.atoms)[0]
    gy = h * _superposition_gradient(fy1, fy2, mu.atoms)[1]

    def apply_a(phi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(phi)
        fx = wx * (phi[1:, :] - phi[:-1, :])
        out[:-1, :] -= fx
        out[1:, :] += fx
        fy = wy * (phi[:, 1:] - phi[:, :-1])
        out[:, :-1] -= fy
        out[:, 1:] += fy
        return out

    b = np.zeros((n, n))
    t = wx * gx
    b[:-1, :] += t
    b[1:, :] -= t
    t = wy * gy
    b[:, :-1] += t
    b[:, 1:] -= t
    b *= active

    abar = 0.5 * float(wx.mean() + wy.mean()) * n / (n - 1)
    precond = dct2_preconditioner((n, n), abar, restrict=active)

    def project(v: np.ndarray) -> np.ndarray:
        v *= active
        v -= v.sum() / nact
        v *= active
        return v

    phi, info = pcg(apply_a, b, precond, rtol=rtol, maxiter=50 * n,
                    project=project)
    dx = phi[1:, :] - phi[:-1, :]
    dy = phi[:, 1:] - phi[:, :-1]
    energy = float(np.sum(wx * (dx + gx) ** 2) + np.sum(wy * (dy + gy) ** 2))
    return energy, info


# -- minimization ---------------------------------------------------------------------


@dataclass(frozen=True)
class MinimizeBudget:
    max_iterations: int = 2000
    stall_window: int = 50
    stall_rtol: float = 1e-8
    armijo_slope: float = 1e-4
    initial_step: float = 1.0


@dataclass
class MinimizationReport:
    field: VectorField2D
    energy: EnergyBreakdown
    trace: list[float]
    vortices: VortexMeasure
    converged: bool
    iterations: int


def _energy_and_gradient(
    w: np.ndarray,
    a_ex: np.ndarray,
    a_ey: np.ndarray,
    rx: np.ndarray,
    ry: np.ndarray,
    node_w: np.ndarray,
    inv_eps2: float,
    need_gradient: bool,
) -> tuple[float, Optional[np.ndarray]]:
    dx = w[1:, :, :] - w[:-1, :, :]
    dy = w[:, 1:, :] - w[:, :-1, :]
    cx = (a_ex * rx)[..., None]
    cy = (a_ey * ry)[..., None]
    grad_term = float(np.sum(cx * dx * dx) + np.sum(cy * dy * dy))
    mod2 = np.sum(w * w, axis=-1)
    defect = 1.0 - mod2
    pot_term = inv_eps2 * float(np.sum(node_w * defect**2))
    energy = grad_term + pot_term
    if not need_gradient:
        return energy, None
    g = np.zeros_like(w)
    fx = 2.0 * cx * dx
    g[:-1, :, :] -= fx
    g[1:, :, :] += fx
    fy = 2.0 * cy * dy
    g[:, :-1, :] -= fy
    g[:, 1:, :] += fy
    g += (-4.0 * inv_eps2) * (node_w * defect)[..., None] * w
    return energy, g


def minimize_gl(
    initial: VectorField2D,
    params: GLParameters,
    budget: MinimizeBudget = MinimizeBudget(),
) -> MinimizationReport:
    """Descend the energy from `initial` with boundary nodes held fixed.

    Nonlinear conjugate gradients (Polak-Ribiere with restarts) and a
    backtracking line search that only ever accepts strict decreases, so
    the reported energy trace is monotone by construction.  Terminates
    when the relative decrease over `stall_window` iterations falls below
    `stall_rtol`, on budget exhaustion (convergence flag false), or on
    line-search failure (flag false — the usual cause is a grid too
    coarse for the requested eps).
    """
    grid = initial.grid
    if not isinstance(grid, CartesianGrid):
        raise ValueError("minimization requires a Cartesian grid")
    a_ex, a_ey = _edge_coefficients(grid, params.coefficient, params.delta)
    rx, ry = _edge_row_weights(grid)
    node_w = _node_area_weights(grid)
    inv_eps2 = 1.0 / params.epsilon**2

    interior = np.zeros(grid.node_shape, dtype=bool)
    interior[1:-1, 1:-1] = True

    w = initial.values.copy()
    energy, g = _energy_and_gradient(
        w, a_ex, a_ey, rx, ry, node_w, inv_eps2, True
    )
    g[~interior] = 0.0
    direction = -g
    trace = [energy]
    converged = False
    step = budget.initial_step

    for _ in range(budget.max_iterations):
        slope = float(np.sum(g * direction))
        if slope >= 0.0:
            direction = -g
            slope = -float(np.sum(g * g))
            if slope == 0.0:
                converged = True
                break
        step = min(step * 2.0, 1e6)
        accepted = False
        while step > 1e-18:
            trial = w + step * direction
            e_trial, _ = _energy_and_gradient(
                trial, a_ex, a_ey, rx, ry, node_w, inv_eps2, False
            )
            if e_trial <= energy + budget.armijo_slope * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w = w + step * direction
        energy_new, g_new = _energy_and_gradient(
            w, a_ex, a_ey, rx, ry, node_w, inv_eps2, True
        )
        g_new[~interior] = 0.0
        beta = max(
            0.0,
            float(np.sum(g_new * (g_new - g))) / max(float(np.sum(g * g)), 1e-300),
        )
        direction = -g_new + beta * direction
        g = g_new
        energy = energy_new
        trace.append(energy)
        win = budget.stall_window
        if len(trace) > win:
            drop = trace[-win - 1] - trace[-1]
            if drop < budget.stall_rtol * max(abs(trace[-1]), 1e-300):
                converged = True
                break

    final = VectorField2D(grid, w, s1_valued=False)
    breakdown = gl_energy(final, params)
    vortices = detect_vortices(final)
    return MinimizationReport(
        final, breakdown, trace, vortices, converged, len(trace) - 1
    )
