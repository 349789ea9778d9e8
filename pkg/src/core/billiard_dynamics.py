"""
Symplectic billiard map, generating function and glancing asymptotics.

Parameters are affine arclength values; they are kept unwrapped along an
orbit (t0 < t1 < t2 ...) and reduced mod L only for evaluation.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional

import mpmath
import numpy as np
from scipy import optimize

from src.config.settings import Settings, get_settings
from src.core.curve_geometry import AffineCurve, omega
from src.core.errors import NumericalError, PhaseSpaceError

logger = logging.getLogger(__name__)

_ANTIPODE_SAMPLES = 64


@dataclass(frozen=True)
class PhaseChord:
    """Oriented chord gamma(t0) gamma(t1) with t0 <= t1."""
    t0: float
    t1: float

    @property
    def gap(self) -> float:
        return self.t1 - self.t0


def tangent_antipode(curve: AffineCurve, t: float) -> float:
    """
    The other parameter whose tangent is parallel to gamma'(t).

    Returns:
        t* in (t, t + L) with gamma'(t*) antiparallel to gamma'(t)

    Raises:
        NumericalError: no sign change or failed orientation check
    """
    period = curve.affine_perimeter
    tangent = curve.position(t, 1)
    tol = get_settings().solver.root_tol

    def cross(tau):
        return omega(tangent, curve.position(tau, 1))

    def scalar_cross(tau):
        return float(cross(tau))

    # Half-step nodes keep t + L/2 off the grid on centrally symmetric domains.
    nodes = t + period * (np.arange(_ANTIPODE_SAMPLES) + 0.5) / _ANTIPODE_SAMPLES
    values = cross(nodes)
    flips = np.nonzero((values[:-1] > 0.0) & (values[1:] <= 0.0))[0]
    if flips.size == 0:
        raise NumericalError(
            f"no antipode sign change found for t = {t:.12g}", (float(nodes[0]), float(nodes[-1]))
        )
    k = int(flips[0])
    lower, upper = float(nodes[k]), float(nodes[k + 1])
    upper_value = scalar_cross(upper)
    if upper_value > 0.0 and k + 2 < nodes.size:
        upper = float(nodes[k + 2])
        upper_value = scalar_cross(upper)
    if abs(upper_value) <= tol:
        antipode = upper
    else:
        try:
            antipode = optimize.brentq(scalar_cross, lower, upper, xtol=tol, maxiter=200)
        except (RuntimeError, ValueError) as e:
            raise NumericalError(f"antipode root finder failed: {e}", (lower, upper)) from e

    if float(np.dot(tangent, curve.position(antipode, 1))) >= 0.0:
        raise NumericalError("antipode tangent is not antiparallel", (lower, upper))
    return antipode


def in_phase_space(curve: AffineCurve, chord: PhaseChord) -> bool:
    """omega(gamma'(t0), gamma'(t1)) > 0."""
    return float(omega(curve.position(chord.t0, 1), curve.position(chord.t1, 1))) > 0.0


def step(curve: AffineCurve, chord: PhaseChord, settings: Optional[Settings] = None) -> PhaseChord:
    """
    One bounce of the symplectic billiard map, (t0, t1) -> (t1, t2).

    t2 is the root in (t1, t1*) of tau -> omega(gamma(tau) - gamma(t0), gamma'(t1)).
    The boundary of the phase space is handled by continuity: (t, t) is fixed
    and (t, t*) maps to (t*, t + L).

    Raises:
        PhaseSpaceError: the chord is not in the closed phase space
        NumericalError: both Newton and bracketing failed
    """
    settings = settings or get_settings()
    tol = settings.solver.root_tol
    gap = chord.gap
    if gap < 0.0:
        raise PhaseSpaceError(f"chord gap {gap:.6g} is negative")
    if gap <= tol:
        return PhaseChord(chord.t1, chord.t1)

    antipode = tangent_antipode(curve, chord.t0)
    if abs(chord.t1 - antipode) <= tol:
        return PhaseChord(chord.t1, chord.t0 + curve.affine_perimeter)
    if chord.t1 > antipode:
        raise PhaseSpaceError(
            f"chord ({chord.t0:.6g}, {chord.t1:.6g}) lies beyond the antipode {antipode:.6g}"
        )

    base = curve.position(chord.t0)
    tangent = curve.position(chord.t1, 1)

    def bounce(tau):
        return float(omega(curve.position(tau) - base, tangent))

    def slope(tau):
        return float(omega(curve.position(tau, 1), tangent))

    upper = tangent_antipode(curve, chord.t1)
    guess = chord.t1 + gap
    t2 = None
    try:
        candidate = optimize.newton(bounce, guess, fprime=slope, tol=tol, maxiter=50)
        if chord.t1 < candidate < upper:
            t2 = float(candidate)
    except (RuntimeError, OverflowError):
        logger.debug("newton failed at chord (%.12g, %.12g), bisecting", chord.t0, chord.t1)
    if t2 is None:
        try:
            t2 = optimize.brentq(bounce, chord.t1, upper, xtol=tol, maxiter=200)
        except (RuntimeError, ValueError) as e:
            raise NumericalError(f"bounce root finder failed: {e}", (chord.t1, upper)) from e
    return PhaseChord(chord.t1, t2)


def generating_function(curve: AffineCurve, t0, t1) -> np.ndarray:
    """S(t0, t1) = omega(gamma(t0), gamma(t1))."""
    value = omega(curve.position(t0), curve.position(t1))
    return float(value) if np.ndim(value) == 0 else value


def check_variational(curve: AffineCurve, t0: float, t1: float, t2: float) -> float:
    """Bounce residual omega(gamma(t2) - gamma(t0), gamma'(t1))."""
    chord = curve.position(t2) - curve.position(t0)
    return float(omega(chord, curve.position(t1, 1)))


def orbit_trace(curve: AffineCurve, chord: PhaseChord, steps: int) -> List[PhaseChord]:
    """The chord and its first `steps` images."""
    trace = [chord]
    for _ in range(steps):
        trace.append(step(curve, trace[-1]))
    return trace


def trace_rows(curve: AffineCurve, trace: List[PhaseChord]) -> Iterator[tuple]:
    """CSV rows (step, t, x, y, eps) for the starting point of each chord."""
    for index, chord in enumerate(trace):
        t = float(curve.reduce(chord.t0))
        x, y = curve.position(t)
        yield index, t, float(x), float(y), chord.gap


def glancing_sixth_order(curve: AffineCurve, t: float) -> float:
    """
    Coefficient of eps^6 in eps1 - eps at the bounce parameter t.

    (2 k k' + k''') / 630, with k' anchored at the bounce point.
    """
    k = float(curve.curvature(t))
    return (2.0 * k * float(curve.curvature(t, 1)) + float(curve.curvature(t, 3))) / 630.0


def lazutkin_defect(
    curve: AffineCurve,
    t: float,
    eps: float,
    settings: Optional[Settings] = None,
) -> float:
    """
    Defect eps1 - eps - k'(t + eps) eps^4 / 30 of the glancing expansion.

    The bounce (t, t + eps) -> (t + eps, t + eps + eps1) is solved in extended
    precision on the closed-form tangent-angle construction; k' comes from
    the spectral curvature table at the bounce point.
    """
    settings = settings or get_settings()
    spec = curve.parametrization.spec
    bounce_at = t + eps
    derivative = float(curve.curvature(bounce_at, 1))

    with mpmath.workdps(settings.solver.extended_precision):
        two_thirds = mpmath.mpf(2) / 3
        eps_mp = mpmath.mpf(eps)

        def speed(angle):
            return spec.radius_of_curvature_mp(angle) ** two_thirds

        def arclength(lower, upper):
            return mpmath.quad(speed, [lower, upper])

        def tangent(angle):
            return -mpmath.sin(angle), mpmath.cos(angle)

        phi0 = mpmath.mpf(float(curve.tangent_angle(t)))
        x0, y0 = spec.position_mp(phi0)

        def bounce(angle):
            x, y = spec.position_mp(angle)
            return (x - x0) * v - (y - y0) * u

        try:
            phi1 = mpmath.findroot(
                lambda angle: arclength(phi0, angle) - eps_mp,
                phi0 + eps_mp / speed(phi0),
            )
            u, v = tangent(phi1)
            phi2 = mpmath.findroot(bounce, 2 * phi1 - phi0)
        except (ValueError, ZeroDivisionError) as e:
            raise NumericalError(
                f"extended-precision bounce failed at t = {t:.12g}, eps = {eps:.3g}: {e}"
            ) from e
        eps1 = arclength(phi1, phi2)
        defect = eps1 - eps_mp - mpmath.mpf(derivative) * eps_mp ** 4 / 30
    return float(defect)
