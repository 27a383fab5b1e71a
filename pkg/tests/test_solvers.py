"""CG driver and spectral preconditioners against direct solves."""

import numpy as np
import pytest

from vortexlab.solvers import (
    SolverError,
    dct2_preconditioner,
    mixed_dct_fft_preconditioner,
    pcg,
    periodic_fft_preconditioner,
)


def _periodic_laplacian(u):
    return (4.0 * u
            - np.roll(u, 1, axis=0) - np.roll(u, -1, axis=0)
            - np.roll(u, 1, axis=1) - np.roll(u, -1, axis=1))


def _reflective_laplacian_axis(u, axis):
    d = np.diff(u, axis=axis)
    out = np.zeros_like(u)
    sl_lo = [slice(None)] * u.ndim
    sl_hi = [slice(None)] * u.ndim
    sl_lo[axis] = slice(None, -1)
    sl_hi[axis] = slice(1, None)
    out[tuple(sl_lo)] -= d
    out[tuple(sl_hi)] += d
    return out


def test_pcg_matches_direct_solve():
    rng = np.random.default_rng(3)
    n = 40
    m = rng.standard_normal((n, n))
    a = m @ m.T + n * np.eye(n)  # SPD
    b = rng.standard_normal(n)
    x, info = pcg(lambda v: a @ v, b, lambda r: r.copy(),
                  rtol=1e-12, maxiter=500)
    assert np.allclose(x, np.linalg.solve(a, b), atol=1e-9)
    assert info.relative_residual <= 1e-12


def test_pcg_raises_on_budget():
    rng = np.random.default_rng(4)
    n = 60
    m = rng.standard_normal((n, n))
    a = m @ m.T + 0.01 * np.eye(n)  # badly conditioned
    b = rng.standard_normal(n)
    with pytest.raises(SolverError) as err:
        pcg(lambda v: a @ v, b, lambda r: r.copy(), rtol=1e-14, maxiter=2)
    assert err.value.iterations == 2
    assert np.isfinite(err.value.residual)


def test_pcg_projection_keeps_mean_zero():
    rng = np.random.default_rng(5)
    u = rng.standard_normal((16, 16))
    b = _periodic_laplacian(u)

    def project(v):
        v -= v.mean()
        return v

    x, _ = pcg(_periodic_laplacian, b,
               periodic_fft_preconditioner((16, 16), 1.0),
               rtol=1e-11, maxiter=200, project=project)
    assert abs(x.mean()) < 1e-12
    assert np.allclose(x, u - u.mean(), atol=1e-8)


def test_periodic_preconditioner_is_exact_inverse():
    rng = np.random.default_rng(6)
    r = rng.standard_normal((12, 20))
    r -= r.mean()
    pre = periodic_fft_preconditioner((12, 20), 2.5)
    back = 2.5 * _periodic_laplacian(pre(r))
    assert np.allclose(back, r, atol=1e-10)


def test_dct2_preconditioner_is_exact_inverse():
    rng = np.random.default_rng(7)
    r = rng.standard_normal((10, 14))
    r -= r.mean()
    pre = dct2_preconditioner((10, 14), 1.7)

    def op(u):
        return 1.7 * (_reflective_laplacian_axis(u, 0)
                      + _reflective_laplacian_axis(u, 1))

    back = op(pre(r))
    assert np.allclose(back - back.mean(), r, atol=1e-10)


def test_mixed_preconditioner_is_exact_inverse():
    rng = np.random.default_rng(8)
    r = rng.standard_normal((9, 16))
    r -= r.mean()
    pre = mixed_dct_fft_preconditioner((9, 16), 1.3, 0.6)

    def op(u):
        return (1.3 * _reflective_laplacian_axis(u, 0)
                + 0.6 * _periodic_laplacian_axis1(u))

    back = op(pre(r))
    assert np.allclose(back - back.mean(), r, atol=1e-10)


def _periodic_laplacian_axis1(u):
    return 2.0 * u - np.roll(u, 1, axis=1) - np.roll(u, -1, axis=1)


def test_mixed_preconditioner_zero_mode_eigenvalue():
    # with an explicit zero-mode eigenvalue, constants map to constants
    pre = mixed_dct_fft_preconditioner((8, 8), 1.0, 1.0,
                                       zero_mode_eigenvalue=0.25)
    out = pre(np.ones((8, 8)))
    assert np.allclose(out, 4.0, atol=1e-12)
    # default behavior projects constants out entirely
    pre0 = mixed_dct_fft_preconditioner((8, 8), 1.0, 1.0)
    assert np.allclose(pre0(np.ones((8, 8))), 0.0, atol=1e-12)


def test_masked_dct2_preconditioner_symmetry():
    rng = np.random.default_rng(9)
    mask = rng.uniform(size=(12, 12)) > 0.2
    pre = dct2_preconditioner((12, 12), 1.0, restrict=mask)
    u = rng.standard_normal((12, 12)) * mask
    v = rng.standard_normal((12, 12)) * mask
    u -= u[mask].mean()
    u *= mask
    v -= v[mask].mean()
    v *= mask
    # symmetric on the mean-zero masked subspace
    assert np.sum(v * pre(u)) == pytest.approx(np.sum(u * pre(v)), rel=1e-9)
