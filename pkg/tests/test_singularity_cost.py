"""Annulus minima, per-vortex cost limits, and the splitting relaxation."""

import math

import numpy as np
import pytest

from vortexlab import coefficients
from vortexlab.cell_problem import HomogenizedTensor
from vortexlab.fields import PolarGrid
from vortexlab.vortex_analysis import Rectangle, VortexMeasure
from vortexlab.singularity_cost import (
    AnnulusProblem,
    capital_psi,
    min_annulus_energy,
    oscillating_annulus_grid,
    predicted_gamma_limit,
    psi_of_z,
)

IDENTITY = HomogenizedTensor(1.0, 0.0, 1.0, 0, 0.0)


# -- problem validation -------------------------------------------------------------


def test_problem_validation():
    grid = PolarGrid((0.0, 0.0), 1.0, 10.0, 97, 64)
    with pytest.raises(ValueError):
        AnnulusProblem(grid, 0, tensor=IDENTITY)  # zero charge
    with pytest.raises(ValueError):
        AnnulusProblem(grid, 1)  # neither mode configured
    with pytest.raises(ValueError):
        AnnulusProblem(grid, 1, tensor=IDENTITY,
                       coefficient=coefficients.constant(1.0), delta=0.5)
    with pytest.raises(ValueError):
        AnnulusProblem(grid, 1, coefficient=coefficients.constant(1.0))
    # oscillation unresolved: cells near r_inner are far wider than delta/6
    with pytest.raises(ValueError, match="unresolved"):
        AnnulusProblem(grid, 1, coefficient=coefficients.constant(1.0),
                       delta=1e-3)


def test_grid_builder_resolves_inner_radius():
    g = oscillating_annulus_grid(1.0, 8.0, 0.5)
    # cell size near r_inner must not exceed delta / cells_per_period
    ds = math.log(8.0) / (g.n_r - 1)
    assert max(ds, g.dtheta) * 1.0 <= 0.5 / 8.0 * (1 + 1e-12)
    with pytest.raises(ValueError):
        oscillating_annulus_grid(1.0, 8.0, 0.5, cells_per_period=4.0)


# -- homogenized mode ----------------------------------------------------------------


def test_isotropic_annulus_is_exact():
    # for an isotropic tensor the pure phase u = z*theta is the minimizer,
    # and the element quadrature integrates it exactly
    grid = PolarGrid((0.0, 0.0), 1.0, 100.0, 222, 256)
    exact = 2.0 * math.pi * math.log(100.0)
    energy, lifting = min_annulus_energy(AnnulusProblem(grid, 1, tensor=IDENTITY))
    assert energy == pytest.approx(exact, rel=1e-12)
    assert lifting.jump == pytest.approx(2.0 * math.pi)
    energy2, _ = min_annulus_energy(AnnulusProblem(grid, 2, tensor=IDENTITY))
    assert energy2 == pytest.approx(4.0 * exact, rel=1e-12)


def test_anisotropic_limit_approaches_det_rule():
    # diag(1, 4): the large-annulus cost per log R tends to 2 pi sqrt(det)
    tensor = HomogenizedTensor(1.0, 0.0, 4.0, 0, 0.0)
    est = psi_of_z(1, [10.0, 31.6227766, 100.0], tensor=tensor)
    assert est.mode == "homogenized"
    assert est.value == pytest.approx(12.5342044, rel=1e-6)
    assert est.value == pytest.approx(4.0 * math.pi, rel=0.01)
    assert not est.warning
    assert est.alpha == pytest.approx(1.0)
    assert est.beta == pytest.approx(4.0)


def test_psi_identity_fit_is_flat():
    est = psi_of_z(1, [5.0, 10.0, 20.0], tensor=IDENTITY)
    assert est.value == pytest.approx(2.0 * math.pi, rel=1e-10)
    assert abs(est.fit_constant) < 1e-9
    assert est.fit_residual < 1e-9
    raw = [row[3] for row in est.schedule]
    assert np.allclose(raw, 2.0 * math.pi, rtol=1e-12)


def test_psi_schedule_validation():
    with pytest.raises(ValueError):
        psi_of_z(1, [10.0, 20.0], tensor=IDENTITY)  # too few ratios
    with pytest.raises(ValueError):
        psi_of_z(1, [10.0, 10.0, 20.0], tensor=IDENTITY)  # not increasing


def test_psi_json_round_trip():
    est = psi_of_z(1, [5.0, 10.0, 20.0], tensor=IDENTITY)
    d = est.to_json_dict()
    assert d["z"] == 1
    assert d["mode"] == "homogenized"
    assert len(d["schedule"]) == 3
    assert d["schedule"][0]["delta"] is None
    assert d["value"] == pytest.approx(est.value)


# -- oscillating mode ----------------------------------------------------------------


def test_constant_coefficient_annulus_exact_both_modes():
    # with a constant coefficient the corrector vanishes, so both boundary
    # treatments reproduce c * 2 pi z^2 log R to machine precision
    coeff = coefficients.constant(2.0)
    grid = oscillating_annulus_grid(1.0, 8.0, 0.5)
    exact = 2.0 * 2.0 * math.pi * math.log(8.0)
    for fixed in (False, True):
        problem = AnnulusProblem(grid, 1, coefficient=coeff, delta=0.5,
                                 fixed_trace=fixed)
        energy, _ = min_annulus_energy(problem)
        assert energy == pytest.approx(exact, rel=1e-12)


def test_checkerboard_annulus_bracketed_and_ordered():
    coeff = coefficients.checkerboard(1.0, 4.0)
    grid = oscillating_annulus_grid(1.0, 8.0, 0.25)
    free, _ = min_annulus_energy(
        AnnulusProblem(grid, 1, coefficient=coeff, delta=0.25))
    pinned, _ = min_annulus_energy(
        AnnulusProblem(grid, 1, coefficient=coeff, delta=0.25,
                       fixed_trace=True))
    log_r = math.log(8.0)
    assert 2.0 * math.pi * 1.0 * log_r <= free <= 2.0 * math.pi * 4.0 * log_r
    # pinning the boundary trace shrinks the admissible class
    assert pinned >= free - 1e-12
    assert free == pytest.approx(25.9508450, rel=1e-6)
    assert pinned == pytest.approx(26.2692483, rel=1e-6)


def test_oscillating_psi_reports_coefficient_bounds():
    coeff = coefficients.constant(3.0)
    est = psi_of_z(1, [4.0, 8.0, 16.0], coefficient=coeff, delta=0.5)
    assert est.mode == "oscillating"
    assert est.value == pytest.approx(3.0 * 2.0 * math.pi, rel=1e-10)
    assert est.alpha == pytest.approx(3.0)
    assert est.beta == pytest.approx(3.0)
    assert est.schedule[0][2] == pytest.approx(0.5)


# -- splitting relaxation ------------------------------------------------------------


def test_capital_psi_quadratic_table_splits_to_units():
    table = {k: 2.0 * math.pi * k * k for k in range(1, 5)}
    value, split = capital_psi(table, 3)
    assert value == pytest.approx(6.0 * math.pi)
    assert split == (1, 1, 1)
    value, split = capital_psi(table, -2)
    assert value == pytest.approx(4.0 * math.pi)
    assert split == (-1, -1)


def test_capital_psi_subadditive_table_keeps_large_cores():
    # psi(2) < 2 psi(1): pairing up is cheaper
    table = {1: 6.0, 2: 10.0, 3: 17.0}
    value, split = capital_psi(table, 2)
    assert value == pytest.approx(10.0)
    assert split == (2,)
    value, split = capital_psi(table, 3)
    assert value == pytest.approx(16.0)
    assert sorted(split, reverse=True) == [2, 1]


def test_capital_psi_can_use_cancelling_charges():
    table = {1: 5.0, 2: 6.0, 3: 40.0}
    value, split = capital_psi(table, 3)
    assert value == pytest.approx(min(40.0, 6.0 + 5.0, 3 * 5.0, 6.0 + 6.0 + 5.0))
    assert sum(split) == 3
    # expensive unit charge: representing 1 as 3 - 2 is strictly cheaper
    value, split = capital_psi({1: 6.0, 2: 2.0, 3: 2.0}, 1)
    assert value == pytest.approx(4.0)
    assert split == (3, -2)


def test_capital_psi_validation():
    with pytest.raises(ValueError):
        capital_psi({1: 1.0}, 0)
    with pytest.raises(ValueError, match="missing"):
        capital_psi({1: 1.0}, 2)
    with pytest.raises(ValueError):
        capital_psi({1: -1.0}, 1)


# -- predicted limit -----------------------------------------------------------------


def test_predicted_gamma_limit_closed_form():
    coeff = coefficients.checkerboard(1.0, 4.0)
    tensor = HomogenizedTensor(2.0, 0.0, 2.0, 0, 0.0)
    mu = VortexMeasure((((0.25, 0.25), 1), ((0.75, 0.75), -2)),
                       Rectangle((0.0, 0.0), (1.0, 1.0)))
    lam = 0.5
    want = 2.0 * math.pi * (0.5 * 1.0 + 0.5 * 2.0) * 3
    assert predicted_gamma_limit(coeff, tensor, lam, mu) == pytest.approx(want)
    assert predicted_gamma_limit(coeff, tensor, 0.0, mu) == pytest.approx(
        2.0 * math.pi * 1.0 * 3)
    with pytest.raises(ValueError):
        predicted_gamma_limit(coeff, tensor, 1.2, mu)
