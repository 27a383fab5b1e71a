"""Discretization substrate: grids, scalar/vector fields, calculus, quadrature.

Two grid families cover every computation in the package:

  * `CartesianGrid` — uniform square-cell grids on rectangles, fields stored
    on the (nx+1) x (ny+1) nodes;
  * `PolarGrid` — annulus grids with logarithmically spaced radial nodes and
    uniformly spaced periodic angular nodes.  Equal-log radial shells carry
    equal energy for fields whose energy density scales like 1/rho^2, which
    is exactly the regime of interest, so log spacing spends resolution
    where the energy lives.

Scalar fields may declare a constant jump across the angular seam of a
polar grid (the discrete form of a multivalued angle lifting); gradient
stencils unwrap the seam using that jump.  Vector fields may carry a node
mask; masked nodes are excluded from quadrature and stencils fall back to
one-sided differences at mask boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import PeriodicCoefficient

__all__ = [
    "CartesianGrid",
    "PolarGrid",
    "ScalarField2D",
    "VectorField2D",
    "gradient",
    "integrate",
    "dirichlet_energy",
    "export_csv",
]


# -- grids --------------------------------------------------------------------


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform grid with square cells on the rectangle origin + [0,Lx]x[0,Ly].

    `n` counts cells per axis; nodal fields hold (nx+1) x (ny+1) values.
    """

    origin: tuple[float, float]
    extent: tuple[float, float]
    n: tuple[int, int]

    def __post_init__(self) -> None:
        nx, ny = self.n
        lx, ly = self.extent
        if nx < 4 or ny < 4:
            raise ValueError(f"need at least 4 cells per axis, got {self.n}")
        if lx <= 0 or ly <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        hx, hy = lx / nx, ly / ny
        if abs(hx - hy) > 1e-12 * max(hx, hy):
            raise ValueError(
                f"cells must be square: Lx/nx={hx!r} differs from Ly/ny={hy!r}"
            )

    @property
    def h(self) -> float:
        return self.extent[0] / self.n[0]

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.n[0] + 1, self.n[1] + 1)

    def node_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1-d arrays of node coordinates along each axis."""
        nx, ny = self.n
        x = self.origin[0] + self.h * np.arange(nx + 1)
        y = self.origin[1] + self.h * np.arange(ny + 1)
        return x, y

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays X, Y of shape node_shape ('ij' indexing)."""
        x, y = self.node_axes()
        return np.meshgrid(x, y, indexing="ij")


@dataclass(frozen=True)
class PolarGrid:
    """Annulus grid: log-spaced radii, uniform periodic angles.

    Radial nodes rho_j = r_inner * (r_outer/r_inner)^(j/(n_r-1)) for
    j = 0..n_r-1; angular nodes theta_k = 2 pi k / n_theta for
    k = 0..n_theta-1 with periodic wraparound (no duplicated seam node).
    """

    center: tuple[float, float]
    r_inner: float
    r_outer: float
    n_r: int
    n_theta: int

    def __post_init__(self) -> None:
        if not (0.0 < self.r_inner < self.r_outer):
            raise ValueError(
                f"need 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}"
            )
        if self.n_r < 8:
            raise ValueError(f"need n_r >= 8, got {self.n_r}")
        if self.n_theta < 16:
            raise ValueError(f"need n_theta >= 16, got {self.n_theta}")

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    def rho(self) -> np.ndarray:
        j = np.arange(self.n_r)
        return self.r_inner * (self.r_outer / self.r_inner) ** (j / (self.n_r - 1))

    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinate arrays X, Y of shape (n_r, n_theta)."""
        rho = self.rho()[:, None]
        th = self.theta()[None, :]
        return (
            self.center[0] + rho * np.cos(th),
            self.center[1] + rho * np.sin(th),
        )


Grid = CartesianGrid | PolarGrid


# -- fields -------------------------------------------------------------------


def _check_shape(grid: Grid, values: np.ndarray, ncomp: int) -> None:
    want = grid.node_shape + ((ncomp,) if ncomp > 1 else ())
    if values.shape != want:
        raise ValueError(f"values shape {values.shape} does not match grid {want}")


@dataclass
class ScalarField2D:
    """Scalar nodal field; `jump` declares a 2*pi*z discontinuity across the
    angular seam of a polar grid (angle liftings), zero for single-valued
    fields."""

    grid: Grid
    values: np.ndarray
    jump: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        _check_shape(self.grid, self.values, 1)
        if self.jump != 0.0 and not isinstance(self.grid, PolarGrid):
            raise ValueError("seam jumps are only meaningful on polar grids")


@dataclass
class VectorField2D:
    """Two-component nodal field, optionally masked and optionally flagged
    as unit-circle valued (|v| = 1 within a tolerance tube, metadata only)."""

    grid: Grid
    values: np.ndarray
    mask: Optional[np.ndarray] = None
    s1_valued: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        _check_shape(self.grid, self.values, 2)
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.grid.node_shape:
                raise ValueError(
                    f"mask shape {self.mask.shape} does not match grid "
                    f"{self.grid.node_shape}"
                )


# -- differential operators ----------------------------------------------------


def _masked_diff(values: np.ndarray, coord: np.ndarray, axis: int,
                 active: np.ndarray) -> np.ndarray:
    """d(values)/d(coord) along `axis`, one-sided at mask boundaries.

    `coord` is the 1-d coordinate array for `axis` (uniform or not).
    Inactive nodes get derivative 0.
    """
    v = np.moveaxis(values, axis, 0)
    act = np.moveaxis(active, axis, 0)
    n = v.shape[0]
    dc = np.diff(coord)
    out = np.zeros_like(v)

    fwd = np.zeros_like(v)
    fwd_ok = np.zeros_like(act)
    fwd[:-1] = (v[1:] - v[:-1]) / dc[:, None] if v.ndim == 2 else (v[1:] - v[:-1]) / dc
    fwd_ok[:-1] = act[:-1] & act[1:]

    bwd = np.zeros_like(v)
    bwd_ok = np.zeros_like(act)
    bwd[1:] = fwd[:-1]
    bwd_ok[1:] = fwd_ok[:-1]

    both = fwd_ok & bwd_ok
    # central difference on nonuniform grids: weighted combination that is
    # exact for quadratics
    if np.any(both):
        hp = np.zeros(n)
        hm = np.zeros(n)
        hp[:-1] = dc
        hm[1:] = dc
        wgt_f = (hm / (hp + hm + (hp + hm == 0)))[:, None] if v.ndim == 2 else \
            hm / (hp + hm + (hp + hm == 0))
        out = np.where(both, wgt_f * fwd + (1.0 - wgt_f) * bwd, out)
    out = np.where(fwd_ok & ~bwd_ok, fwd, out)
    out = np.where(bwd_ok & ~fwd_ok, bwd, out)
    return np.moveaxis(out, 0, axis)


def _scalar_gradient(grid: Grid, values: np.ndarray, jump: float,
                     mask: Optional[np.ndarray]) -> np.ndarray:
    """Gradient of nodal scalar values; returns array of shape (*, *, 2) in
    physical components."""
    if isinstance(grid, CartesianGrid):
        if mask is None:
            gx = np.gradient(values, grid.h, axis=0)
            gy = np.gradient(values, grid.h, axis=1)
        else:
            x, y = grid.node_axes()
            gx = _masked_diff(values, x, 0, mask)
            gy = _masked_diff(values, y, 1, mask)
        return np.stack([gx, gy], axis=-1)

    rho = grid.rho()
    if mask is None:
        d_rho = np.gradient(values, rho, axis=0)
    else:
        d_rho = _masked_diff(values, rho, 0, mask)
    # periodic central difference in theta, unwrapping the declared seam jump
    vp = np.roll(values, -1, axis=1)
    vm = np.roll(values, 1, axis=1)
    if jump != 0.0:
        vp = vp.copy()
        vm = vm.copy()
        vp[:, -1] += jump
        vm[:, 0] -= jump
    d_theta = (vp - vm) / (2.0 * grid.dtheta)
    if mask is not None:
        amp = np.roll(mask, -1, axis=1)
        amm = np.roll(mask, 1, axis=1)
        fwd = (vp - values) / grid.dtheta
        bwd = (values - vm) / grid.dtheta
        d_theta = np.where(amp & amm, d_theta,
                           np.where(amp, fwd, np.where(amm, bwd, 0.0)))
        d_theta = np.where(mask, d_theta, 0.0)
        d_rho = np.where(mask, d_rho, 0.0)
    return np.stack([d_rho, d_theta / rho[:, None]], axis=-1)


def gradient(field: ScalarField2D,
             mask: Optional[np.ndarray] = None) -> VectorField2D:
    """Second-order gradient of a scalar field.

    Central differences in the interior, one-sided at non-periodic
    boundaries and next to masked-out nodes (mask True = valid).  On polar
    grids the result holds physical components (d/d rho, (1/rho) d/d
    theta) and the angular stencil is periodic, honoring any declared
    seam jump.
    """
    g = _scalar_gradient(field.grid, field.values, field.jump, mask)
    return VectorField2D(field.grid, g, mask=mask)


# -- quadrature ----------------------------------------------------------------


def _node_weights(grid: Grid) -> np.ndarray:
    """Trapezoidal quadrature weights per node (area elements included)."""
    if isinstance(grid, CartesianGrid):
        nx, ny = grid.n
        wx = np.full(nx + 1, grid.h)
        wx[0] = wx[-1] = 0.5 * grid.h
        wy = np.full(ny + 1, grid.h)
        wy[0] = wy[-1] = 0.5 * grid.h
        return wx[:, None] * wy[None, :]
    rho = grid.rho()
    wr = np.zeros_like(rho)
    wr[1:-1] = 0.5 * (rho[2:] - rho[:-2])
    wr[0] = 0.5 * (rho[1] - rho[0])
    wr[-1] = 0.5 * (rho[-1] - rho[-2])
    # periodic rectangle rule in theta; area element rho drho dtheta
    return (rho * wr)[:, None] * np.full((1, grid.n_theta), grid.dtheta)


def integrate(density: ScalarField2D, mask: Optional[np.ndarray] = None) -> float:
    """Quadrature of a nodal density over the grid domain.

    Exact for constants times area on Cartesian grids; second order for
    smooth densities.  Masked nodes (mask False) contribute nothing.
    """
    w = _node_weights(density.grid)
    vals = density.values
    if mask is not None:
        w = np.where(mask, w, 0.0)
    return float(np.sum(w * vals))


def dirichlet_energy(
    w: VectorField2D, coeff: PeriodicCoefficient, delta: float
) -> float:
    """Weighted gradient energy: quadrature of a(x/delta) |grad w|^2.

    The gradient of each component is evaluated with the same stencils as
    `gradient`; masked nodes, if any, are excluded from the quadrature and
    boundary-of-mask stencils degrade to one-sided differences.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    grid = w.grid
    mask = w.mask
    g1 = _scalar_gradient(grid, w.values[..., 0], 0.0, mask)
    g2 = _scalar_gradient(grid, w.values[..., 1], 0.0, mask)
    dens = np.sum(g1 * g1, axis=-1) + np.sum(g2 * g2, axis=-1)
    xx, yy = grid.node_mesh()
    pts = np.stack([xx, yy], axis=-1) / delta
    a = coeff.eval(pts.reshape(-1, 2)).reshape(xx.shape)
    return integrate(ScalarField2D(grid, dens * a), mask=mask)


# -- export ---------------------------------------------------------------------


def export_csv(field: ScalarField2D | VectorField2D, path: str) -> None:
    """Write nodes as CSV rows `x,y,value` (or `x,y,v1,v2`)."""
    xx, yy = field.grid.node_mesh()
    cols = [xx.ravel(), yy.ravel()]
    if isinstance(field, ScalarField2D):
        header = "x,y,value"
        cols.append(field.values.ravel())
    else:
        header = "x,y,v1,v2"
        cols.append(field.values[..., 0].ravel())
        cols.append(field.values[..., 1].ravel())
    data = np.column_stack(cols)
    np.savetxt(path, data, delimiter=",", header=header, comments="")
