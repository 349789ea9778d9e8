"""Tests for maximal symmetric orbits and their asymptotic profiles."""

import numpy as np
import pytest

from src.core.errors import DegeneratePolygonError, DomainSpecError
from src.core.orbit_solver import (
    ExpansionAnchor,
    action,
    bounce_residuals,
    correction_profiles,
    ellipse_orbit,
    full_parameters,
    max_area_orbit,
    orbit_asymptotics,
    orbit_rows,
)


def test_full_parameters_are_symmetric():
    np.testing.assert_allclose(full_parameters(np.array([1.0, 2.0]), 5, 10.0), [0.0, 1.0, 2.0, 8.0, 9.0])
    np.testing.assert_allclose(full_parameters(np.array([1.0]), 4, 10.0), [0.0, 1.0, 5.0, 9.0])


@pytest.mark.parametrize("q", [2, 3, 4, 5, 12])
def test_circle_orbits(circle, settings, q):
    orbit = max_area_orbit(circle, q, settings=settings)
    np.testing.assert_allclose(orbit.params, 2.0 * np.pi * np.arange(q) / q, atol=1e-10)
    assert orbit.action == pytest.approx(q * np.sin(2.0 * np.pi / q), abs=1e-12)
    assert orbit.residual < 1e-9


def test_ellipse_closed_form_matches_solver(ellipse, settings):
    closed = ellipse_orbit(ellipse, 7)
    solved = max_area_orbit(ellipse, 7, settings=settings)
    assert closed.method == "closed-form"
    np.testing.assert_allclose(solved.params, closed.params, atol=1e-9)
    assert solved.action == pytest.approx(closed.action, abs=1e-12)


def test_ellipse_orbit_requires_ellipse(bumpy):
    with pytest.raises(DomainSpecError):
        ellipse_orbit(bumpy, 5)


def test_perturbed_start_returns_to_equidistribution(ellipse, settings):
    q = 9
    initial = ellipse.affine_perimeter * np.arange(1, 5) / q + 1e-2
    orbit = max_area_orbit(ellipse, q, initial=initial, settings=settings)
    np.testing.assert_allclose(orbit.params, ellipse.affine_perimeter * np.arange(q) / q, atol=1e-8)


@pytest.mark.parametrize("q", [3, 6, 11, 24])
def test_perturbed_domain_orbit(bumpy, settings, q):
    orbit = max_area_orbit(bumpy, q, settings=settings)
    perimeter = bumpy.affine_perimeter
    assert orbit.residual < 1e-9
    assert np.all(orbit.gaps > 0.0)
    assert orbit.gaps.sum() == pytest.approx(perimeter)
    np.testing.assert_allclose(orbit.params[1:], perimeter - orbit.params[1:][::-1], atol=1e-12)
    assert orbit.spacing_constant < 2.0 * perimeter
    assert np.max(np.abs(bounce_residuals(bumpy, orbit.params))) == pytest.approx(orbit.residual)


def test_orbit_is_a_local_maximum(bumpy, settings):
    orbit = max_area_orbit(bumpy, 7, settings=settings)
    rng = np.random.default_rng(1)
    for _ in range(5):
        free = orbit.params[1:4] + 1e-3 * rng.standard_normal(3)
        assert action(bumpy, full_parameters(free, 7, bumpy.affine_perimeter)) < orbit.action


@pytest.mark.parametrize("q", [0, 1])
def test_period_too_small(circle, q):
    with pytest.raises(DomainSpecError):
        max_area_orbit(circle, q)


def test_bad_initial_values(circle, settings):
    with pytest.raises(DomainSpecError, match="free parameters"):
        max_area_orbit(circle, 7, initial=np.array([1.0, 2.0]), settings=settings)
    with pytest.raises(DegeneratePolygonError) as info:
        max_area_orbit(circle, 7, initial=np.array([2.0, 1.0, 3.0]), settings=settings)
    assert info.value.q == 7


def test_orbit_rows(circle, settings):
    orbit = max_area_orbit(circle, 4, settings=settings)
    rows = list(orbit_rows(circle, orbit))
    assert [row[1] for row in rows] == [0, 1, 2, 3]
    q, j, t, x, y, gap = rows[1]
    assert (q, j) == (4, 1)
    assert (t, x, y, gap) == pytest.approx((np.pi / 2, 0.0, 1.0, np.pi / 2), abs=1e-10)


def test_profiles_vanish_on_ellipse(ellipse):
    theta = np.arange(8) / 8
    for anchor in ExpansionAnchor:
        for name, values in correction_profiles(ellipse, theta, anchor).items():
            np.testing.assert_allclose(values, 0.0, atol=1e-6, err_msg=name)


def test_anchor_conventions(bumpy):
    theta = np.arange(16) / 16
    stated = correction_profiles(bumpy, theta, ExpansionAnchor.STATED)
    bounce = correction_profiles(bumpy, theta, ExpansionAnchor.BOUNCE)
    np.testing.assert_allclose(bounce["a1"], 0.0)
    np.testing.assert_allclose(stated["b1"], -bounce["b1"])
    np.testing.assert_allclose(stated["a0"], bounce["a0"])
    assert stated["a0"][0] == pytest.approx(0.0, abs=1e-14)
    assert np.max(np.abs(stated["b0"])) > 1e-3


def test_asymptotics_need_a_ladder(bumpy, settings):
    with pytest.raises(DomainSpecError, match="ladder"):
        orbit_asymptotics(bumpy, (16, 24, 40), settings=settings)


@pytest.mark.parametrize("q_range", [(8, 16, 32), (128, 256, 1024), ()])
def test_asymptotics_range_enforced(bumpy, settings, q_range):
    with pytest.raises(DomainSpecError, match="must lie in"):
        orbit_asymptotics(bumpy, q_range, settings=settings)


@pytest.mark.slow
def test_orbit_profiles_converge(bumpy, settings):
    result = orbit_asymptotics(bumpy, (16, 32, 64), settings=settings)
    assert result.levels == (16, 32, 64)
    assert result.relation_residual < 1e-6
    assert result.relation_scale > 1e-3
    assert result.empirical_relation_residual < 5e-2 * result.relation_scale
    assert result.level_residuals[64] < result.level_residuals[32] < result.level_residuals[16]
    rows = list(result.rows())
    assert len(rows) == 16 and len(rows[0]) == 9
