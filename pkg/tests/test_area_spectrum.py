"""Tests for the area spectrum, its fit and the X-ray transform."""

import numpy as np
import pytest

from src.core.area_spectrum import (
    CONVENTION_KAPPA,
    chord_weight_profile,
    chord_weights,
    correction_functional_rows,
    correction_functionals,
    ellipse_xray,
    expansion_coefficients,
    fit_asymptotics,
    solve_orbits,
    spectrum_table,
    xray_matrix,
    xray_transform,
)
from src.core.curve_geometry import fit_reference_ellipse
from src.core.errors import DomainSpecError, FitError
from src.core.fourier_maps import EvenFourierMap
from src.core.orbit_solver import ExpansionAnchor, max_area_orbit


@pytest.fixture(scope="module")
def circle_table(circle, settings):
    return spectrum_table(circle, 128, 3, settings=settings)


def test_circle_spectrum_oracle(circle_table):
    q = circle_table.periods
    np.testing.assert_allclose(circle_table.actions, q * np.sin(2.0 * np.pi / q), atol=1e-9)
    assert circle_table.is_monotone()
    assert set(circle_table.orbits) == set(range(3, 129))
    assert list(circle_table.csv_rows())[0][0] == 3


def test_spectrum_is_affine_invariant(circle_table, ellipse, settings):
    table = spectrum_table(ellipse, 32, 3, settings=settings)
    np.testing.assert_allclose(table.actions, circle_table.actions[:30], atol=1e-9)


@pytest.mark.parametrize("q_max, q_min", [(2, 2), (10, 11), (10, 1)])
def test_spectrum_rejects_ranges(circle, q_max, q_min):
    with pytest.raises(DomainSpecError):
        spectrum_table(circle, q_max, q_min)


def test_parallel_solve_keeps_order(bumpy, settings):
    periods = [9, 3, 5, 4]
    serial = solve_orbits(bumpy, periods, 1, settings)
    pooled = solve_orbits(bumpy, periods, 4, settings)
    assert [o.q for o in pooled] == periods
    assert [o.action for o in pooled] == pytest.approx([o.action for o in serial], abs=1e-14)


def test_circle_fit(circle_table):
    fit = fit_asymptotics(circle_table, 16, 128)
    assert fit.c0 == pytest.approx(2.0 * np.pi, rel=1e-4)
    assert fit.c1 == pytest.approx(-4.0 * np.pi ** 3 / 3.0, rel=1e-4)
    assert fit.c2 == pytest.approx(4.0 * np.pi ** 5 / 15.0, rel=1e-4)
    assert fit.measured_kappa == pytest.approx((CONVENTION_KAPPA, CONVENTION_KAPPA), rel=1e-4)
    assert fit.a1_normalized == pytest.approx(2.0 * np.pi ** 3 / 3.0, rel=1e-4)
    assert fit.area_defect < 1e-6
    report = fit.to_report()
    assert report["kappa"] == CONVENTION_KAPPA
    assert len(report["nuisance"]) == 1


def test_plain_fit_without_tail(circle_table):
    fit = fit_asymptotics(circle_table, 32, 128, tail_terms=0)
    assert fit.nuisance == ()
    assert fit.c0 == pytest.approx(2.0 * np.pi, rel=1e-6)


@pytest.mark.parametrize("q_min, q_max", [(16, 40), (30, 100)])
def test_fit_rejects_narrow_ranges(circle_table, q_min, q_max):
    with pytest.raises(FitError):
        fit_asymptotics(circle_table, q_min, q_max)


def test_fit_area_on_perturbed_domain(bumpy, settings):
    table = spectrum_table(bumpy, 96, 12, settings=settings)
    fit = fit_asymptotics(table, 12, 96)
    assert fit.area_defect < 1e-6


def test_chord_weights_on_ellipse(ellipse, settings):
    for q in (3, 8, 21):
        weights = chord_weights(ellipse, max_area_orbit(ellipse, q, settings=settings))
        np.testing.assert_allclose(weights, 2.0 * np.sin(2.0 * np.pi / q), rtol=1e-8)


@pytest.mark.parametrize("modes", [{0: 1.0}, {1: 1.0}, {3: 1.0}, {6: 1.0}, {0: 0.5, 4: -1.0}])
def test_xray_on_ellipse(ellipse, settings, modes):
    n = EvenFourierMap.from_modes(modes)
    for q in (3, 4, 6, 12):
        orbit = max_area_orbit(ellipse, q, settings=settings)
        assert xray_transform(ellipse, orbit, n) == pytest.approx(ellipse_xray(n, q), abs=1e-8)


def test_xray_matrix_matches_transform(bumpy, settings):
    orbit = max_area_orbit(bumpy, 7, settings=settings)
    matrix = xray_matrix(bumpy, orbit, 5)
    n = EvenFourierMap.from_modes({0: 1.0, 2: 0.3, 5: -0.2})
    assert matrix @ n.coefficients == pytest.approx(xray_transform(bumpy, orbit, n))


def test_ellipse_xray_small_periods():
    n = EvenFourierMap.from_modes({0: 1.0})
    assert ellipse_xray(n, 2) == 0.0
    assert ellipse_xray(n, 4) == pytest.approx(8.0)


def test_expansion_is_trivial_on_ellipse(ellipse):
    theta = np.arange(6) / 6
    for name, values in expansion_coefficients(ellipse, theta).items():
        np.testing.assert_allclose(values, 0.0, atol=1e-6, err_msg=name)


def test_bounce_anchor_drops_fourth_order(bumpy):
    theta = np.arange(6) / 6
    stated = expansion_coefficients(bumpy, theta, ExpansionAnchor.STATED)
    bounce = expansion_coefficients(bumpy, theta, ExpansionAnchor.BOUNCE)
    np.testing.assert_allclose(bounce["c2"], 0.0)
    np.testing.assert_allclose(stated["c1"], bounce["c1"])
    assert np.max(np.abs(stated["c2"])) > 0.0


def test_chord_weight_expansion_decays_fourth_order(bumpy, settings):
    residuals = [chord_weight_profile(bumpy, q, settings=settings).residual for q in (16, 32, 64)]
    assert residuals[0] / residuals[1] > 10.0
    assert residuals[1] / residuals[2] > 10.0


def test_correction_functionals_are_linear(bumpy):
    n = EvenFourierMap.from_modes({0: 1.0, 2: 0.5, 4: -0.25})
    shift, alpha1, alpha2 = correction_functional_rows(bumpy, 4)
    corrections = correction_functionals(bumpy, n)
    assert corrections.shift == pytest.approx(shift)
    assert corrections.alpha1 == pytest.approx(float(alpha1 @ n.coefficients))
    assert corrections.alpha2 == pytest.approx(float(alpha2 @ n.coefficients))


def test_correction_functionals_vanish_on_ellipse(ellipse):
    corrections = correction_functionals(ellipse, EvenFourierMap.from_modes({0: 1.0, 3: 1.0}))
    assert corrections.shift == pytest.approx(0.0, abs=1e-12)
    assert corrections.alpha1 == pytest.approx(0.0, abs=1e-6)
    assert corrections.alpha2 == pytest.approx(0.0, abs=1e-6)


def _xray_defects(curve, n, periods, settings):
    """a_q(n) - a_E,q(n) against the reference ellipse."""
    curvature = fit_reference_ellipse(curve).curvature
    orbits = solve_orbits(curve, periods, 1, settings)
    return np.array([
        xray_transform(curve, orbit, n) - ellipse_xray(n, orbit.q, curvature) for orbit in orbits
    ])


def test_alpha1_matches_extracted_coefficient(wobbly, settings):
    n = EvenFourierMap.from_modes({3: 1.0})
    periods = (32, 64, 128)
    q = np.array(periods, dtype=float)
    scaled = q ** 2 * _xray_defects(wobbly, n, periods, settings)
    design = np.column_stack([np.ones(3), 1.0 / q, 1.0 / q ** 2])
    extracted = np.linalg.solve(design, scaled)[0]
    alpha1 = correction_functionals(wobbly, n).alpha1
    assert abs(alpha1) > 0.1
    assert extracted == pytest.approx(alpha1, rel=1e-3)


@pytest.mark.slow
def test_xray_remainder_is_bounded(wobbly, settings):
    n = EvenFourierMap.from_modes({3: 1.0})
    periods = (8, 16, 32, 64, 128, 256)
    q = np.array(periods, dtype=float)
    corrections = correction_functionals(wobbly, n)
    remainder = (
        _xray_defects(wobbly, n, periods, settings)
        - corrections.alpha1 / q ** 2
        - corrections.alpha2 / q ** 3
    )
    scaled = q ** 3.5 * np.abs(remainder)
    assert np.max(scaled) < 5.0
    assert scaled[-1] < scaled[0]
