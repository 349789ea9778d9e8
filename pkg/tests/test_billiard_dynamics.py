"""Tests for the symplectic billiard map and the glancing expansion."""

import numpy as np
import pytest

from src.core.billiard_dynamics import (
    PhaseChord,
    check_variational,
    generating_function,
    glancing_sixth_order,
    in_phase_space,
    lazutkin_defect,
    orbit_trace,
    step,
    tangent_antipode,
    trace_rows,
)
from src.core.curve_geometry import apply_area_preserving_affine, build_domain
from src.core.errors import PhaseSpaceError

from conftest import make_spec


def test_circle_antipode(circle):
    assert tangent_antipode(circle, 0.3) == pytest.approx(0.3 + np.pi, abs=1e-10)


def test_circle_step_rotates(circle, settings):
    chord = step(circle, PhaseChord(0.0, 0.7), settings)
    assert chord.t0 == pytest.approx(0.7)
    assert chord.t1 == pytest.approx(1.4, abs=1e-10)


@pytest.mark.parametrize("t0, gap", [(0.0, 0.4), (1.1, 1.5), (2.9, 0.05)])
def test_step_solves_bounce_condition(bumpy, settings, t0, gap):
    chord = PhaseChord(t0, t0 + gap)
    image = step(bumpy, chord, settings)
    assert image.t0 == chord.t1
    assert chord.t1 < image.t1 < tangent_antipode(bumpy, chord.t1)
    assert abs(check_variational(bumpy, chord.t0, chord.t1, image.t1)) < 1e-10
    assert in_phase_space(bumpy, image)


def test_phase_space_boundary(bumpy, settings):
    assert step(bumpy, PhaseChord(1.0, 1.0), settings) == PhaseChord(1.0, 1.0)
    antipode = tangent_antipode(bumpy, 1.0)
    image = step(bumpy, PhaseChord(1.0, antipode), settings)
    assert image.t1 == pytest.approx(1.0 + bumpy.affine_perimeter)


def test_chords_outside_phase_space_rejected(bumpy, settings):
    with pytest.raises(PhaseSpaceError):
        step(bumpy, PhaseChord(1.0, 0.5), settings)
    with pytest.raises(PhaseSpaceError):
        step(bumpy, PhaseChord(0.0, 0.9 * bumpy.affine_perimeter), settings)


def test_generating_function(circle):
    assert generating_function(circle, 0.0, np.pi / 2) == pytest.approx(1.0)
    values = generating_function(circle, np.zeros(3), np.array([0.5, 1.0, 1.5]))
    np.testing.assert_allclose(values, np.sin([0.5, 1.0, 1.5]), atol=1e-12)


def test_orbit_trace_on_circle(circle):
    trace = orbit_trace(circle, PhaseChord(0.0, 2.0 * np.pi / 5), 5)
    assert len(trace) == 6
    assert trace[-1].t0 == pytest.approx(2.0 * np.pi, abs=1e-9)
    rows = list(trace_rows(circle, trace))
    assert rows[0][:4] == pytest.approx((0, 0.0, 1.0, 0.0), abs=1e-12)
    assert all(row[4] == pytest.approx(2.0 * np.pi / 5) for row in rows)


def test_glancing_coefficient(circle, wobbly):
    assert glancing_sixth_order(circle, 0.4) == pytest.approx(0.0, abs=1e-12)
    anchors = wobbly.affine_perimeter * np.arange(16) / 16
    assert max(abs(glancing_sixth_order(wobbly, t)) for t in anchors) > 1e-5


def test_lazutkin_defect_vanishes_on_circle(circle, settings):
    assert abs(lazutkin_defect(circle, 0.3, 0.1, settings)) < 1e-12


@pytest.mark.slow
def test_lazutkin_defect_is_sixth_order(wobbly, settings):
    anchors = wobbly.affine_perimeter * np.arange(16) / 16
    t = float(anchors[np.argmax([abs(glancing_sixth_order(wobbly, s)) for s in anchors])])
    eps = np.logspace(-3, -1, 9)
    defects = [abs(lazutkin_defect(wobbly, t, e, settings)) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(defects), 1)[0]
    assert 5.7 <= slope <= 6.3


@pytest.fixture(scope="module")
def oval(settings):
    """Centrally symmetric second-harmonic domain."""
    return build_domain(make_spec(j2=0.02), settings)


@pytest.mark.parametrize("name", ["bumpy", "oval", "wobbly"])
def test_step_sweeps_the_boundary(request, settings, name):
    curve = request.getfixturevalue(name)
    for t0 in curve.affine_perimeter * np.arange(97) / 97:
        for gap in (0.05, 0.5):
            image = step(curve, PhaseChord(t0, t0 + gap), settings)
            assert abs(check_variational(curve, t0, t0 + gap, image.t1)) < 1e-10
            assert in_phase_space(curve, image)


def test_antipode_on_centrally_symmetric_domain(bumpy):
    half = 0.5 * bumpy.affine_perimeter
    for t in (0.0, 1.0, 4.0):
        assert tangent_antipode(bumpy, t) == pytest.approx(t + half, abs=1e-9)


def test_trace_on_centrally_symmetric_domain(bumpy, settings):
    trace = orbit_trace(bumpy, PhaseChord(0.0, 0.1), 200)
    assert len(trace) == 201
    assert all(chord.gap > 0.0 for chord in trace)


@pytest.mark.parametrize("gap", [0.1, 1.0, 2.0, 3.0, np.pi - 0.1])
def test_ellipse_preserves_gap(ellipse, settings, gap):
    for t0 in (0.0, 0.9, 3.3, 5.5):
        image = step(ellipse, PhaseChord(t0, t0 + gap), settings)
        assert image.gap == pytest.approx(gap, abs=1e-9)


@pytest.mark.parametrize("t0, gap", [(0.2, 0.3), (2.5, 1.7), (4.4, 2.9)])
def test_bounce_is_reversible(bumpy, settings, t0, gap):
    image = step(bumpy, PhaseChord(t0, t0 + gap), settings)
    assert abs(check_variational(bumpy, image.t1, image.t0, t0)) < 1e-10


def test_step_commutes_with_affine_maps(bumpy, settings):
    matrix = np.array([[2.0, 0.3], [0.0, 0.5]])
    image_curve = apply_area_preserving_affine(bumpy, matrix, (0.4, -1.2), settings)
    for t0, gap in ((0.0, 0.6), (1.7, 2.2), (5.0, 0.2)):
        chord = PhaseChord(t0, t0 + gap)
        assert step(image_curve, chord, settings).t1 == pytest.approx(step(bumpy, chord, settings).t1, abs=1e-8)
