"""Matrix-free preconditioned conjugate gradients on structured grids.

Every elliptic solve in the package is a five-point operator on a
rectangular index grid (periodic, reflective, or masked boundaries), so a
single CG driver plus a family of spectral preconditioners covers all of
them.  The preconditioners invert the constant-coefficient analogue of the
operator with the transform that diagonalizes it:

  * periodic x periodic       -> 2-d FFT
  * reflective x periodic     -> DCT-II along the reflective axis, FFT
                                 along the periodic one
  * reflective x reflective   -> 2-d DCT-II (also used for masked grids,
                                 where it preconditions the zero-filled
                                 extension)

All transforms are unitary up to diagonal scalings that commute with the
eigenvalue division, so each preconditioner is symmetric positive definite
on the relevant subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

__all__ = [
    "SolverError",
    "SolveInfo",
    "pcg",
    "periodic_fft_preconditioner",
    "mixed_dct_fft_preconditioner",
    "dct2_preconditioner",
]


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan"),
                 iterations: int = -1):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    relative_residual: float


def pcg(
    apply_operator: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    apply_preconditioner: Callable[[np.ndarray], np.ndarray],
    *,
    rtol: float,
    maxiter: int,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, SolveInfo]:
    """Preconditioned CG for symmetric positive (semi)definite operators.

    `project`, when given, maps onto the solvable subspace (typically
    mean-zero functions, possibly restricted to active cells); it is
    applied to the initial residual and to every iterate to keep kernel
    components from accumulating through roundoff.

    Returns (solution, info); raises SolverError if the relative residual
    has not dropped below `rtol` within `maxiter` iterations.
    """
    x = np.zeros_like(rhs)
    b = rhs if project is None else project(rhs.copy())
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, SolveInfo(0, 0.0)

    r = b.copy()
    z = apply_preconditioner(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    for it in range(1, maxiter + 1):
        ap = apply_operator(p)
        if project is not None:
            ap = project(ap)
        denom = float(np.sum(p * ap))
        if denom <= 0.0:
            raise SolverError(
                f"conjugate gradients lost positivity (iteration {it})",
                residual=float(np.linalg.norm(r)) / bnorm,
                iterations=it,
            )
        alpha = rz / denom
        x += alpha * p
        if project is not None:
            x = project(x)
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        if res <= rtol * bnorm:
            return x, SolveInfo(it, res / bnorm)
        z = apply_preconditioner(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"conjugate gradients did not reach rtol={rtol} in {maxiter} iterations",
        residual=float(np.linalg.norm(r)) / bnorm,
        iterations=maxiter,
    )


def _eig_periodic(n: int) -> np.ndarray:
    return 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _eig_reflective(n: int) -> np.ndarray:
    return 2.0 - 2.0 * np.cos(np.pi * np.arange(n) / n)


def periodic_fft_preconditioner(
    shape: tuple[int, int], scale: float
) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse of scale * (periodic 5-point Laplacian), zero mode projected."""
    lam1 = _eig_periodic(shape[0])
    lam2 = _eig_periodic(shape[1])
    ell = scale * (lam1[:, None] + lam2[None, :])
    ell[0, 0] = 1.0

    def apply(r: np.ndarray) -> np.ndarray:
        rh = sfft.fft2(r)
        rh /= ell
        rh[0, 0] = 0.0
        return sfft.ifft2(rh).real

    return apply


def mixed_dct_fft_preconditioner(
    shape: tuple[int, int], coeff_axis0: float, coeff_axis1: float,
    zero_mode_eigenvalue: Optional[float] = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse of the constant-coefficient operator with reflective axis 0
    and periodic axis 1, eigenvalue coeff0*lam_N(p) + coeff1*lam_P(q).

    The (0,0) eigenvalue of that model operator is zero.  For singular
    operators (paired with a mean-zero projection) leave
    `zero_mode_eigenvalue` unset and the constant mode is projected out;
    for operators made definite by boundary terms pass their constant-mode
    Rayleigh quotient so the preconditioner stays positive definite."""
    lam0 = coeff_axis0 * _eig_reflective(shape[0])
    lam1 = coeff_axis1 * _eig_periodic(shape[1])
    ell = lam0[:, None] + lam1[None, :]
    kill_zero = zero_mode_eigenvalue is None
    ell[0, 0] = 1.0 if kill_zero else zero_mode_eigenvalue

    def apply(r: np.ndarray) -> np.ndarray:
        w = sfft.dct(r, type=2, axis=0)
        w = sfft.fft(w, axis=1)
        w /= ell
        if kill_zero:
            w[0, 0] = 0.0
        w = sfft.ifft(w, axis=1).real
        return sfft.idct(w, type=2, axis=0)

    return apply


def dct2_preconditioner(
    shape: tuple[int, int], scale: float,
    restrict: Optional[np.ndarray] = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse of scale * (reflective 5-point Laplacian) via 2-d DCT-II.

    When `restrict` (a boolean active mask) is given, the result is
    restricted to the active cells and re-centered there, which keeps the
    preconditioner symmetric positive definite on the masked subspace.
    """
    lam1 = _eig_reflective(shape[0])
    lam2 = _eig_reflective(shape[1])
    ell = scale * (lam1[:, None] + lam2[None, :])
    ell[0, 0] = 1.0
    nact = int(restrict.sum()) if restrict is not None else 0

    def apply(r: np.ndarray) -> np.ndarray:
        w = sfft.dctn(r, type=2)
        w /= ell
        w[0, 0] = 0.0
        w = sfft.idctn(w, type=2)
        if restrict is not None:
            w *= restrict
            w -= w.sum() / nact
            w *= restrict
        return w

    return apply
