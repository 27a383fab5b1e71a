"""Per-vortex energy cost on annuli.

The cost of carrying winding number z across an annulus A(r, R) is

    psi_{r,R}(z) = (1/log(R/r)) * min { energy of w : w unit-modulus,
                                        degree z on the annulus },

with the energy either the oscillating-coefficient form
integral a(x/delta)|grad w|^2 or the constant-tensor quadratic form
integral <A grad w, grad w>.  The degree constraint is enforced by
construction: w = exp(i u) with u = z*theta + phi and phi single-valued,
which turns the nonconvex constraint set into an affine one and the
minimization into one linear solve.

Log-polar coordinates (s, theta) = (log rho, theta) make the Dirichlet
form conformally flat, so both solvers work on a plain rectangle:

  * oscillating mode: cell-centered finite volumes with the coefficient
    sampled at face midpoints.  The midpoint rule is exactly self-dual
    under a -> alpha*beta/a for two-valued coefficients, which keeps the
    effective behavior of under-resolved fine structure unbiased, unlike
    one-sided averaging of cell values.  FFT/DCT-preconditioned CG.
  * homogenized mode: bilinear (Q1) finite elements with exact 2x2 Gauss
    element integration of the rotated tensor Q(theta)^T A Q(theta); the
    exact integration leaves no spurious zero-energy (hourglass) modes.

The limit cost psi(z) is estimated from a schedule of increasing radius
ratios by fitting value(R) = psi + c/log R, matching the O(1/log R)
defect of the finite-annulus minimum.  The relaxed cost Psi(z) minimizes
sum_j psi(z_j) over integer splittings sum_j z_j = z.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cell_problem import HomogenizedTensor
from .coefficients import PeriodicCoefficient
from .fields import PolarGrid, ScalarField2D
from .solvers import SolverError, mixed_dct_fft_preconditioner, pcg

__all__ = [
    "AnnulusProblem",
    "PsiEstimate",
    "oscillating_annulus_grid",
    "min_annulus_energy",
    "psi_of_z",
    "capital_psi",
    "predicted_gamma_limit",
]

#: cells per coefficient period near the inner radius used by the grid
#: builder; the hard validation floor is 6 cells per period.
DEFAULT_CELLS_PER_PERIOD = 8.0
_MIN_CELLS_PER_PERIOD = 6.0


@dataclass(frozen=True)
class AnnulusProblem:
    """Degree-z minimization problem on an annulus.

    Exactly one of (`coefficient`, `delta`) — the oscillating mode — or
    `tensor` — the homogenized mode — must be set.  `fixed_trace` pins
    phi = 0 on both circles (trace w = (x/|x|)^z there); otherwise only
    the degree is prescribed and the boundaries are free.
    """

    grid: PolarGrid
    z: int
    coefficient: Optional[PeriodicCoefficient] = None
    delta: Optional[float] = None
    tensor: Optional[HomogenizedTensor] = None
    fixed_trace: bool = False

    def __post_init__(self) -> None:
        if self.z == 0:
            raise ValueError("charge z must be nonzero")
        oscillating = self.coefficient is not None
        if oscillating == (self.tensor is not None):
            raise ValueError(
                "set exactly one of coefficient+delta (oscillating) or "
                "tensor (homogenized)"
            )
        if oscillating:
            if self.delta is None or self.delta <= 0:
                raise ValueError("oscillating mode requires delta > 0")
            dmax = self.grid.r_inner * max(
                math.log(self.grid.r_outer / self.grid.r_inner) / (self.grid.n_r - 1),
                self.grid.dtheta,
            )
            if dmax > self.delta / _MIN_CELLS_PER_PERIOD * (1.0 + 1e-9):
                raise ValueError(
                    f"oscillation unresolved: cell size {dmax:.3e} near the "
                    f"inner radius exceeds delta/6 = {self.delta / 6.0:.3e}"
                )


def oscillating_annulus_grid(
    r_inner: float,
    r_outer: float,
    delta: float,
    cells_per_period: float = DEFAULT_CELLS_PER_PERIOD,
    center: tuple[float, float] = (0.0, 0.0),
) -> PolarGrid:
    """Annulus grid sized so cells near r_inner span delta/cells_per_period.

    Cell sizes grow proportionally to the radius, so the resolution rule
    is binding at the inner radius only; `cells_per_period` below 6
    violates the solver's validation floor.
    """
    if cells_per_period < _MIN_CELLS_PER_PERIOD:
        raise ValueError(
            f"cells_per_period must be >= {_MIN_CELLS_PER_PERIOD}, "
            f"got {cells_per_period}"
        )
    dmax = (delta / r_inner) / cells_per_period
    length = math.log(r_outer / r_inner)
    ns = max(7, math.ceil(length / dmax))
    nt = max(16, math.ceil(2.0 * math.pi / dmax))
    return PolarGrid(center, r_inner, r_outer, ns + 1, nt)


# -- oscillating mode: cell-centered finite volumes -----------------------------


def _oscillating_minimum(problem: AnnulusProblem) -> tuple[float, np.ndarray]:
    """Returns (energy, nodal phi) for the oscillating-coefficient mode."""
    grid = problem.grid
    coeff = problem.coefficient
    delta = problem.delta
    z = problem.z
    center = grid.center

    ns = grid.n_r - 1
    nt = grid.n_theta
    s0 = math.log(grid.r_inner)
    length = math.log(grid.r_outer / grid.r_inner)
    ds = length / ns
    dt = grid.dtheta
    sc = s0 + (np.arange(ns) + 0.5) * ds
    tc = (np.arange(nt) + 0.5) * dt

    def coeff_at(s: np.ndarray, t: np.ndarray) -> np.ndarray:
        rho = np.exp(s)
        pts = np.stack(
            [center[0] + rho * np.cos(t), center[1] + rho * np.sin(t)], axis=-1
        )
        return coeff.eval(pts.reshape(-1, 2)).reshape(s.shape)

    # face midpoints: radial faces between cell rows j and j+1 sit at node
    # radii; angular faces between cell columns k and k+1 sit at node angles
    sf, tf = np.meshgrid(s0 + np.arange(1, ns) * ds, tc, indexing="ij")
    ws = coeff_at(sf, tf)  # (ns-1, nt) interior radial faces
    sm, tm = np.meshgrid(sc, np.arange(1, nt + 1) * dt, indexing="ij")
    wt = coeff_at(sm, tm)  # (ns, nt), face k between columns k and k+1

    cs = dt / ds
    ct = ds / dt

    if problem.fixed_trace:
        # half-cell Dirichlet: boundary faces at the circles, phi = 0 there
        tb = tc[None, :]
        wb0 = coeff_at(np.full((1, nt), s0), tb)[0]
        wb1 = coeff_at(np.full((1, nt), s0 + length), tb)[0]

    def apply_a(phi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(phi)
        fs = ws * (phi[1:, :] - phi[:-1, :]) * cs
        out[:-1, :] -= fs
        out[1:, :] += fs
        ft = wt * (np.roll(phi, -1, axis=1) - phi) * ct
        out -= ft - np.roll(ft, 1, axis=1)
        if problem.fixed_trace:
            out[0, :] += 2.0 * cs * wb0 * phi[0, :]
            out[-1, :] += 2.0 * cs * wb1 * phi[-1, :]
        return out

    g = wt * (z * dt) * ct
    b = g - np.roll(g, 1, axis=1)

    abar = float(ws.mean()) if ws.size else float(wt.mean())
    if problem.fixed_trace:
        # boundary mass keeps the operator definite; hand the preconditioner
        # the constant mode's Rayleigh quotient instead of projecting it out
        ell0 = 2.0 * cs * float(wb0.mean() + wb1.mean()) / ns
        precond = mixed_dct_fft_preconditioner(
            (ns, nt), abar * cs, abar * ct, zero_mode_eigenvalue=ell0
        )
        project = None
    else:
        precond = mixed_dct_fft_preconditioner((ns, nt), abar * cs, abar * ct)
        def project(v: np.ndarray) -> np.ndarray:
            v -= v.mean()
            return v

    try:
        phi, info = pcg(
            apply_a, b, precond, rtol=1e-8, maxiter=max(50 * max(ns, nt), 2000),
            project=project,
        )
    except SolverError as exc:
        raise SolverError(
            f"annulus solve stalled at residual {exc.residual:.3e}",
            residual=exc.residual, iterations=exc.iterations,
        ) from exc

    dps = phi[1:, :] - phi[:-1, :]
    dpt = np.roll(phi, -1, axis=1) - phi
    energy = float(np.sum(ws * dps**2) * cs + np.sum(wt * (dpt + z * dt) ** 2) * ct)
    if problem.fixed_trace:
        energy += float(2.0 * cs * np.sum(wb0 * phi[0, :] ** 2))
        energy += float(2.0 * cs * np.sum(wb1 * phi[-1, :] ** 2))

    # cell-centered phi -> nodal phi by adjacent-cell averaging
    ext = np.concatenate([phi[:1, :], phi, phi[-1:, :]], axis=0)  # (ns+2, nt)
    if problem.fixed_trace:
        ext[0, :] = -phi[0, :]   # reflect through the pinned trace value 0
        ext[-1, :] = -phi[-1, :]
    mid = 0.5 * (ext[:-1, :] + ext[1:, :])  # (ns+1, nt) at node radii
    nodal = 0.5 * (mid + np.roll(mid, 1, axis=1))  # average in theta
    return energy, nodal


# -- homogenized mode: Q1 finite elements ----------------------------------------


def _q1_element_matrices(
    a_mat: np.ndarray, ds: float, dt: float, n_theta: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element stiffness, z-load and constant term per theta column.

    The rotated tensor M(theta) = Q(theta)^T A Q(theta), evaluated at each
    element's angular midpoint, is constant per element, so 2x2 Gauss
    integration of the bilinear form is exact.  Local node order:
    (0,0), (1,0), (0,1), (1,1) in (s, theta).
    """
    th = (np.arange(n_theta) + 0.5) * dt
    c, s = np.cos(th), np.sin(th)
    a00, a01, a11 = a_mat[0, 0], a_mat[0, 1], a_mat[1, 1]
    m11 = a00 * c * c + 2 * a01 * s * c + a11 * s * s
    m22 = a00 * s * s - 2 * a01 * s * c + a11 * c * c
    m12 = (a11 - a00) * s * c + a01 * (c * c - s * s)

    gauss = 0.5 * (1.0 - 1.0 / math.sqrt(3.0))
    pts = [(gauss, gauss), (gauss, 1 - gauss), (1 - gauss, gauss),
           (1 - gauss, 1 - gauss)]
    k_el = np.zeros((n_theta, 4, 4))
    f_el = np.zeros((n_theta, 4))
    for xi, eta in pts:
        dn_dxi = np.array([-(1 - eta), (1 - eta), -eta, eta])
        dn_deta = np.array([-(1 - xi), -xi, (1 - xi), xi])
        bs = dn_dxi / ds     # d/ds
        bt = dn_deta / dt    # d/dtheta
        w = 0.25 * ds * dt
        k_el += w * (
            m11[:, None, None] * (bs[:, None] * bs[None, :])[None]
            + m22[:, None, None] * (bt[:, None] * bt[None, :])[None]
            + m12[:, None, None]
            * (bs[:, None] * bt[None, :] + bt[:, None] * bs[None, :])[None]
        )
        f_el += w * (m12[:, None] * bs[None, :] + m22[:, None] * bt[None, :])
    const = float(np.sum(m22) * ds * dt)
    return k_el, f_el, const


def _homogenized_minimum(problem: AnnulusProblem) -> tuple[float, np.ndarray]:
    """Returns (energy, nodal phi) for the constant-tensor mode."""
    grid = problem.grid
    a_mat = problem.tensor.matrix()
    z = problem.z
    nr, nt = grid.n_r, grid.n_theta
    length = math.log(grid.r_outer / grid.r_inner)
    ds = length / (nr - 1)
    dt = grid.dtheta

    k_el, f_el, const = _q1_element_matrices(a_mat, ds, dt, nt)

    def node_id(j: np.ndarray, k: np.ndarray) -> np.ndarray:
        return j * nt + np.mod(k, nt)

    jj, kk = np.meshgrid(np.arange(nr - 1), np.arange(nt), indexing="ij")
    corners = np.stack(
        [
            node_id(jj, kk),
            node_id(jj + 1, kk),
            node_id(jj, kk + 1),
            node_id(jj + 1, kk + 1),
        ],
        axis=-1,
    )  # (nr-1, nt, 4)

    n_dof = nr * nt
    el_k = np.broadcast_to(k_el[None, :, :, :], (nr - 1, nt, 4, 4))
    rows = np.repeat(corners[:, :, :, None], 4, axis=3)
    cols = np.repeat(corners[:, :, None, :], 4, axis=2)
    k_mat = sp.coo_matrix(
        (el_k.ravel(), (rows.ravel(), cols.ravel())), shape=(n_dof, n_dof)
    ).tocsr()

    f_vec = np.zeros(n_dof)
    np.add.at(f_vec, corners.ravel(),
              np.broadcast_to(f_el[None, :, :], (nr - 1, nt, 4)).ravel() * z)

    if problem.fixed_trace:
        inner = np.arange(nt, n_dof - nt)
        phi = np.zeros(n_dof)
        k_in = k_mat[inner][:, inner]
        phi[inner] = spla.spsolve(k_in.tocsc(), -f_vec[inner])
    else:
        # pure free boundary: kernel = constants; pin one dof, then re-center
        keep = np.arange(1, n_dof)
        phi = np.zeros(n_dof)
        k_in = k_mat[keep][:, keep]
        phi[keep] = spla.spsolve(k_in.tocsc(), -f_vec[keep])
        phi -= phi.mean()

    energy = float(
        phi @ (k_mat @ phi) + 2.0 * (f_vec @ phi) + z * z * const * (nr - 1)
    )
    return energy, phi.reshape(nr, nt)


def min_annulus_energy(problem: AnnulusProblem) -> tuple[float, ScalarField2D]:
    """Minimum energy and minimizing phase lifting u = z*theta + phi.

    The lifting is returned on the problem's polar grid with a declared
    jump of 2*pi*z across the angular seam (the branch cut runs along
    theta = 0, i.e. the positive x-axis from the grid's center).
    """
    if problem.coefficient is not None:
        energy, phi = _oscillating_minimum(problem)
    else:
        energy, phi = _homogenized_minimum(problem)
    theta = problem.grid.theta()
    u = problem.z * theta[None, :] + phi
    lifting = ScalarField2D(problem.grid, u, jump=2.0 * math.pi * problem.z)
    return energy, lifting


# -- limit extrapolation -----------------------------------------------------------


@dataclass(frozen=True)
class PsiEstimate:
    """Limit estimate of the per-vortex cost with its schedule."""

    z: int
    value: float
    schedule: tuple[tuple[float, float, Optional[float], float], ...]
    #: rows (r_inner, r_outer, delta or None, raw value)
    fit_constant: float
    fit_residual: float
    warning: bool
    mode: str
    alpha: float
    beta: float

    def to_json_dict(self) -> dict:
        return {
            "z": self.z,
            "value": self.value,
            "mode": self.mode,
            "fit_constant": self.fit_constant,
            "fit_residual": self.fit_residual,
            "warning": self.warning,
            "alpha": self.alpha,
            "beta": self.beta,
            "schedule": [
                {"r": r, "R": bigr, "delta": d, "raw": raw}
                for (r, bigr, d, raw) in self.schedule
            ],
        }


def _homogenized_radial_nodes(ratio: float) -> int:
    return max(97, int(round(48.0 * math.log(ratio))) + 1)


def psi_of_z(
    z: int,
    ratios: list[float],
    *,
    tensor: Optional[HomogenizedTensor] = None,
    coefficient: Optional[PeriodicCoefficient] = None,
    delta: Optional[float] = None,
    fixed_trace: bool = False,
    n_theta: int = 256,
    cells_per_period: float = DEFAULT_CELLS_PER_PERIOD,
) -> PsiEstimate:
    """Estimate the limit cost psi(z) from a schedule of radius ratios.

    The inner radius is normalized to 1 (the minimum depends on the radii
    only through their ratio; in the oscillating mode `delta` is then
    measured in units of the inner radius).  Each ratio produces one
    annulus minimum; the limit is the intercept of the least-squares fit
    value(R) = psi + c/log R.  A non-monotone raw sequence sets the
    warning flag but the fit is still reported.
    """
    if len(ratios) < 3 or any(b <= a for a, b in zip(ratios, ratios[1:])):
        raise ValueError(f"need >= 3 increasing ratios, got {ratios}")
    oscillating = coefficient is not None
    rows = []
    for ratio in ratios:
        if oscillating:
            grid = oscillating_annulus_grid(1.0, ratio, delta, cells_per_period)
            problem = AnnulusProblem(grid, z, coefficient=coefficient,
                                     delta=delta, fixed_trace=fixed_trace)
        else:
            grid = PolarGrid((0.0, 0.0), 1.0, ratio,
                             _homogenized_radial_nodes(ratio), n_theta)
            problem = AnnulusProblem(grid, z, tensor=tensor,
                                     fixed_trace=fixed_trace)
        energy, _ = min_annulus_energy(problem)
        rows.append((1.0, float(ratio), delta if oscillating else None,
                     energy / math.log(ratio)))

    raw = np.array([row[3] for row in rows])
    diffs = np.diff(raw)
    scale = max(1.0, float(np.max(np.abs(raw))))
    moving = np.abs(diffs) > 1e-9 * scale
    warn = bool(moving.any() and np.ptp(np.sign(diffs[moving])) > 0)

    inv_log = 1.0 / np.log(np.array(ratios))
    design = np.stack([np.ones_like(inv_log), inv_log], axis=-1)
    coef, *_ = np.linalg.lstsq(design, raw, rcond=None)
    value, c_fit = float(coef[0]), float(coef[1])
    residual = float(np.linalg.norm(design @ coef - raw))

    if oscillating:
        alpha, beta = coefficient.alpha, coefficient.beta
        mode = "oscillating"
    else:
        alpha, beta = tensor.eig_min, tensor.eig_max
        mode = "homogenized"
    if warn:
        warnings.warn(
            f"psi schedule for z={z} is not monotone in log(R); limit fit "
            "may be unreliable",
            stacklevel=2,
        )
    return PsiEstimate(z, value, tuple(rows), c_fit, residual, warn, mode,
                       float(alpha), float(beta))


# -- splitting relaxation ------------------------------------------------------------


def capital_psi(
    psi_table: dict[int, float], z: int
) -> tuple[float, tuple[int, ...]]:
    """Exact minimum of sum_j psi(z_j) over integer splittings sum z_j = z.

    `psi_table` maps |charge| to its cost (costs are even in the charge).
    The search runs over all multisets of nonzero integers with
    sum |z_j| <= (beta_eff/alpha_eff) * |z|, where the effective bounds
    are read off the table itself via 2 pi alpha k^2 <= psi(k) <= 2 pi
    beta k^2; any longer splitting costs at least 2 pi beta_eff |z| and
    cannot beat the best short one.  Returns (value, charges sorted
    descending).
    """
    if z == 0:
        raise ValueError("charge z must be nonzero")
    table = {abs(int(k)): float(v) for k, v in psi_table.items()}
    missing = [k for k in range(1, abs(z) + 1) if k not in table]
    if missing:
        raise ValueError(f"psi_table is missing charges {missing}")
    for k, v in table.items():
        if v <= 0:
            raise ValueError(f"psi({k}) must be positive, got {v}")

    alpha_eff = min(v / (2.0 * math.pi * k * k) for k, v in table.items())
    beta_eff = max(v / (2.0 * math.pi * k * k) for k, v in table.items())
    budget = max(abs(z), math.floor((beta_eff / alpha_eff) * abs(z) + 1e-12))
    kmax = min(max(table), budget)

    candidates = []
    for k in range(kmax, 0, -1):
        candidates.extend([k, -k])

    best_value = math.inf
    best_split: tuple[int, ...] = ()

    def search(idx: int, remaining: int, left: int, cost: float,
               chosen: list[int]) -> None:
        nonlocal best_value, best_split
        if remaining == 0 and chosen:
            if cost < best_value:
                best_value = cost
                best_split = tuple(sorted(chosen, reverse=True))
            return
        if abs(remaining) > left:
            return
        for i in range(idx, len(candidates)):
            c = candidates[i]
            if abs(c) > left:
                continue
            nc = cost + table[abs(c)]
            if nc >= best_value:
                continue
            chosen.append(c)
            search(i, remaining - c, left - abs(c), nc, chosen)
            chosen.pop()

    search(0, z, budget, 0.0, [])
    return best_value, best_split


def predicted_gamma_limit(
    coeff: PeriodicCoefficient,
    tensor: HomogenizedTensor,
    lam: float,
    mu,
) -> float:
    """Predicted limit energy per |log eps|:
    2 pi ((1 - lambda) ess_inf(a) + lambda sqrt(det A)) * total variation."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return (
        2.0
        * math.pi
        * ((1.0 - lam) * coeff.ess_inf() + lam * math.sqrt(tensor.det))
        * mu.total_variation
    )
