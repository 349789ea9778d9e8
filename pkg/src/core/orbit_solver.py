"""
Symmetric maximal-area periodic orbits of rotation number 1/q.

The orbit t_0 = 0 < t_1 < ... < t_{q-1} < L is reflection symmetric,
t_{q-j} = L - t_j, so only t_1..t_m with m = (q - 1) // 2 are free. The
action is maximized by Newton's method on the reduced gradient with the
tridiagonal reduced Hessian, with a projected gradient ascent fallback.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, Optional, Sequence

import numpy as np
from scipy import linalg

from src.config.settings import Settings, get_settings
from src.core.curve_geometry import AffineCurve, ConicKind, detect_conic, omega
from src.core.errors import DegeneratePolygonError, DomainSpecError, OrbitSolverError
from src.core.spectral import TrigSeries

logger = logging.getLogger(__name__)

_POLISH_STEPS = 2
_MAX_HALVINGS = 40
_FALLBACK_HANDOFF = 1e-4
ASYMPTOTIC_RANGE = (16, 512)


@dataclass(frozen=True)
class SymmetricOrbit:
    """A q-periodic symmetric orbit with its action and bounce residual."""
    q: int
    params: np.ndarray
    action: float
    residual: float
    affine_perimeter: float
    iterations: int = 0
    method: str = "closed-form"

    @property
    def gaps(self) -> np.ndarray:
        """eps_j = t_{j+1} - t_j, cyclically (sums to L)."""
        return np.diff(np.append(self.params, self.affine_perimeter))

    @property
    def spacing_constant(self) -> float:
        """q * max_j eps_j, bounded uniformly in q."""
        return self.q * float(np.max(self.gaps))


def full_parameters(free: np.ndarray, q: int, perimeter: float) -> np.ndarray:
    """Expand t_1..t_m to the symmetric parameter sequence."""
    m = (q - 1) // 2
    t = np.empty(q)
    t[0] = 0.0
    t[1:m + 1] = free
    if q % 2 == 0:
        t[q // 2] = 0.5 * perimeter
    t[q - m:] = perimeter - free[::-1]
    return t


def action(curve: AffineCurve, params: np.ndarray) -> float:
    """Cyclic sum of the generating function along the polygon."""
    points = curve.position(params)
    return float(np.sum(omega(points, np.roll(points, -1, axis=0))))


def bounce_residuals(curve: AffineCurve, params: np.ndarray) -> np.ndarray:
    """omega(gamma'_j, gamma_{j+1} - gamma_{j-1}) for every vertex."""
    points = curve.position(params)
    chords = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
    return omega(curve.position(params, 1), chords)


class _SymmetricActionProblem:
    """Reduced action, gradient and banded Hessian for one (curve, q)."""

    def __init__(self, curve: AffineCurve, q: int):
        self.curve = curve
        self.q = q
        self.m = (q - 1) // 2
        self.perimeter = curve.affine_perimeter
        projection = np.zeros((q, self.m))
        for i in range(1, self.m + 1):
            projection[i, i - 1] = 1.0
            projection[q - i, i - 1] = -1.0
        self.projection = projection

    def expand(self, free: np.ndarray) -> np.ndarray:
        return full_parameters(free, self.q, self.perimeter)

    def ordered(self, free: np.ndarray) -> bool:
        limit = 0.5 * self.perimeter
        return bool(
            free[0] > 0.0 and np.all(np.diff(free) > 0.0) and free[-1] < limit
        )

    def value(self, free: np.ndarray) -> float:
        return action(self.curve, self.expand(free))

    def gradient(self, free: np.ndarray) -> np.ndarray:
        return self.projection.T @ bounce_residuals(self.curve, self.expand(free))

    def hessian_bands(self, free: np.ndarray) -> np.ndarray:
        """Reduced Hessian in solve_banded (1, 1) layout."""
        t = self.expand(free)
        points = self.curve.position(t)
        d1 = self.curve.position(t, 1)
        d2 = self.curve.position(t, 2)
        chords = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
        diagonal = omega(d2, chords)
        upper = omega(d1, np.roll(d1, -1, axis=0))
        full = np.diag(diagonal) + np.diag(upper[:-1], 1) + np.diag(upper[:-1], -1)
        full[self.q - 1, 0] = full[0, self.q - 1] = upper[-1]
        reduced = self.projection.T @ full @ self.projection
        bands = np.zeros((3, self.m))
        bands[0, 1:] = np.diag(reduced, 1)
        bands[1] = np.diag(reduced)
        bands[2, :-1] = np.diag(reduced, -1)
        return bands


def _line_search(problem: _SymmetricActionProblem, free, direction, current):
    """Largest halving of `direction` keeping order and not losing action."""
    scale = 1.0
    slack = 1e-14 * max(1.0, abs(current))
    for _ in range(_MAX_HALVINGS):
        trial = free + scale * direction
        if problem.ordered(trial):
            value = problem.value(trial)
            if value >= current - slack:
                return trial, value
        scale *= 0.5
    return None, current


def _newton(problem, free, settings, budget):
    """Newton iterations; returns (free, iterations, converged)."""
    tol = settings.solver.gradient_tol
    current = problem.value(free)
    for iteration in range(1, budget + 1):
        grad = problem.gradient(free)
        if np.max(np.abs(grad)) < tol:
            return _polish(problem, free), iteration, True
        direction = linalg.solve_banded((1, 1), problem.hessian_bands(free), -grad)
        if float(direction @ grad) <= 0.0:
            logger.debug("q=%d: Hessian not negative definite, using gradient", problem.q)
            direction = grad
        trial, value = _line_search(problem, free, direction, current)
        if trial is None:
            logger.debug("q=%d: Newton line search stalled at iteration %d", problem.q, iteration)
            return free, iteration, False
        free, current = trial, value
    grad = problem.gradient(free)
    return free, budget, bool(np.max(np.abs(grad)) < tol)


def _polish(problem, free):
    """Extra full Newton steps while the gradient keeps shrinking."""
    norm = np.max(np.abs(problem.gradient(free)))
    for _ in range(_POLISH_STEPS):
        direction = linalg.solve_banded((1, 1), problem.hessian_bands(free), -problem.gradient(free))
        trial = free + direction
        if not problem.ordered(trial):
            break
        trial_norm = np.max(np.abs(problem.gradient(trial)))
        if trial_norm > norm:
            break
        free, norm = trial, trial_norm
    return free


def _gradient_ascent(problem, free, settings):
    """Projected gradient ascent until the gradient is small enough for Newton."""
    current = problem.value(free)
    rate = 1.0
    for iteration in range(1, settings.solver.max_fallback + 1):
        grad = problem.gradient(free)
        if np.max(np.abs(grad)) < _FALLBACK_HANDOFF:
            return free, iteration
        trial, value = _line_search(problem, free, rate * grad, current)
        if trial is None:
            return free, iteration
        free, current = trial, value
        rate *= 1.5
    return free, settings.solver.max_fallback


def _closed_orbit(curve: AffineCurve, params: np.ndarray, q: int, iterations=0, method="closed-form"):
    return SymmetricOrbit(
        q=q,
        params=params,
        action=action(curve, params),
        residual=float(np.max(np.abs(bounce_residuals(curve, params)))),
        affine_perimeter=curve.affine_perimeter,
        iterations=iterations,
        method=method,
    )


def ellipse_orbit(curve: AffineCurve, q: int) -> SymmetricOrbit:
    """
    Equidistributed orbit t_j = L j / q of an ellipse.

    Raises:
        DomainSpecError: the curve is not an ellipse or q < 2
    """
    if q < 2:
        raise DomainSpecError(f"period must be at least 2, got {q}")
    if detect_conic(curve).kind is not ConicKind.ELLIPSE:
        raise DomainSpecError("ellipse_orbit requires an ellipse")
    params = curve.affine_perimeter * np.arange(q) / q
    return _closed_orbit(curve, params, q)


def max_area_orbit(
    curve: AffineCurve,
    q: int,
    initial: Optional[np.ndarray] = None,
    settings: Optional[Settings] = None,
) -> SymmetricOrbit:
    """
    Symmetric maximal-area q-periodic orbit.

    Args:
        curve: Domain boundary
        q: Period (q = 2 gives the diameter through O and O')
        initial: Optional starting values for t_1..t_m (equidistribution by default)
        settings: Solver settings

    Raises:
        OrbitSolverError: no convergence after Newton and fallback
        DegeneratePolygonError: the iterate lost its cyclic ordering
    """
    settings = settings or get_settings()
    if q < 2:
        raise DomainSpecError(f"period must be at least 2, got {q}")
    perimeter = curve.affine_perimeter
    if q == 2:
        return _closed_orbit(curve, np.array([0.0, 0.5 * perimeter]), 2)

    problem = _SymmetricActionProblem(curve, q)
    if initial is None:
        free = perimeter * np.arange(1, problem.m + 1) / q
    else:
        free = np.asarray(initial, dtype=float).copy()
        if free.shape != (problem.m,):
            raise DomainSpecError(f"expected {problem.m} free parameters, got {free.shape}")
    if problem.m == 0:
        return _closed_orbit(curve, problem.expand(free), q)
    if not problem.ordered(free):
        raise DegeneratePolygonError("initial polygon is not ordered", q, problem.expand(free))

    free, iterations, converged = _newton(problem, free, settings, settings.solver.max_newton)
    method = "newton"
    if not converged:
        logger.warning("q=%d: Newton did not converge, switching to gradient ascent", q)
        free, extra = _gradient_ascent(problem, free, settings)
        free, more, converged = _newton(problem, free, settings, settings.solver.max_newton)
        iterations += extra + more
        method = "fallback"

    params = problem.expand(free)
    if not np.all(np.diff(np.append(params, perimeter)) > 0.0):
        raise DegeneratePolygonError("vertices lost their cyclic order", q, params)
    if not converged:
        grad = np.max(np.abs(problem.gradient(free)))
        raise OrbitSolverError(f"reduced gradient stuck at {grad:.3g}", q, params)

    orbit = _closed_orbit(curve, params, q, iterations, method)
    if orbit.residual > settings.solver.bounce_tol:
        raise OrbitSolverError(f"bounce residual {orbit.residual:.3g} above tolerance", q, params)
    logger.debug("q=%d: action %.15g after %d iterations", q, orbit.action, iterations)
    return orbit


def orbit_rows(curve: AffineCurve, orbit: SymmetricOrbit) -> Iterator[tuple]:
    """CSV rows (q, j, t_j, x_j, y_j, eps_j)."""
    points = curve.position(orbit.params)
    for j, (t, gap) in enumerate(zip(orbit.params, orbit.gaps)):
        yield orbit.q, j, float(t), float(points[j, 0]), float(points[j, 1]), float(gap)


class ExpansionAnchor(str, Enum):
    """Where k' is anchored in the glancing expansion behind the orbit profiles."""
    STATED = "stated"
    BOUNCE = "bounce"


def correction_profiles(
    curve: AffineCurve,
    theta: np.ndarray,
    anchor: ExpansionAnchor = ExpansionAnchor.STATED,
) -> Dict[str, np.ndarray]:
    """
    Closed-form correction profiles a0, a1, b0, b1 at theta = t / L.

    STATED anchors k' at the first vertex of each gap; BOUNCE anchors it at
    the shared bounce vertex, which makes a1 vanish and flips the sign of b1.
    """
    theta = np.asarray(theta, dtype=float)
    perimeter = curve.affine_perimeter
    t = perimeter * theta
    kappa = curve.curvature_series
    mean = kappa.mean
    _, primitive = kappa.antiderivative()
    k_t = kappa(t)
    a0 = perimeter ** 2 / 30.0 * (primitive(t) - primitive(0.0))
    b0 = perimeter ** 3 / 30.0 * (k_t - mean)
    slope = kappa(t, 1)
    if anchor is ExpansionAnchor.STATED:
        a1 = -perimeter ** 3 / 30.0 * (k_t - float(kappa(0.0)))
        b1 = -perimeter ** 4 / 60.0 * slope
    else:
        a1 = np.zeros_like(theta)
        b1 = perimeter ** 4 / 60.0 * slope
    return {"a0": a0, "a1": a1, "b0": b0, "b1": b1}


@dataclass(frozen=True)
class OrbitAsymptotics:
    """Empirical and closed-form correction profiles on the coarsest grid."""
    theta: np.ndarray
    empirical: Dict[str, np.ndarray]
    closed: Dict[str, np.ndarray]
    residuals: Dict[str, float]
    level_residuals: Dict[int, float]
    relation_residual: float
    empirical_relation_residual: float
    relation_scale: float
    anchor: ExpansionAnchor
    levels: tuple

    def rows(self) -> Iterator[tuple]:
        """CSV rows (theta, a0_closed, a0_empirical, ..., b1_closed, b1_empirical)."""
        for i, theta in enumerate(self.theta):
            row = [float(theta)]
            for name in ("a0", "a1", "b0", "b1"):
                row.extend([float(self.closed[name][i]), float(self.empirical[name][i])])
            yield tuple(row)


def _richardson(values: Sequence[np.ndarray], qs: Sequence[int]) -> np.ndarray:
    """Fit c0 + c1 / q + c2 / q^2 pointwise; returns (c0, c1) rows."""
    design = np.array([[1.0, 1.0 / q, 1.0 / q ** 2] for q in qs])
    return np.linalg.solve(design, np.vstack(values))[:2]


def orbit_asymptotics(
    curve: AffineCurve,
    q_range: Sequence[int],
    anchor: ExpansionAnchor = ExpansionAnchor.STATED,
    settings: Optional[Settings] = None,
) -> OrbitAsymptotics:
    """
    Extract the correction profiles from maximal orbits and compare them
    with their closed forms.

    Args:
        curve: Domain boundary
        q_range: Periods; the three smallest of the form (q, 2q, 4q) drive the
            Richardson elimination, every period contributes a level residual
        anchor: Closed-form convention for a1 and b1

    Raises:
        DomainSpecError: q_range leaves [16, 512] or has no (q, 2q, 4q) ladder
        OrbitSolverError: propagated from the solver
    """
    qs = sorted(set(int(q) for q in q_range))
    if not qs or qs[0] < ASYMPTOTIC_RANGE[0] or qs[-1] > ASYMPTOTIC_RANGE[1]:
        raise DomainSpecError(f"q range {qs} must lie in {list(ASYMPTOTIC_RANGE)}")
    base = next((q for q in qs if 2 * q in qs and 4 * q in qs), None)
    if base is None:
        raise DomainSpecError(f"q range {qs} has no (q, 2q, 4q) ladder")
    perimeter = curve.affine_perimeter
    orbits = {q: max_area_orbit(curve, q, settings=settings) for q in qs}

    theta = np.arange(base) / base
    closed = correction_profiles(curve, theta, anchor)

    level_residuals = {}
    for q, orbit in orbits.items():
        grid = np.arange(q) / q
        profile = q ** 2 * (orbit.params - perimeter * grid)
        level_residuals[q] = float(np.max(np.abs(profile - correction_profiles(curve, grid, anchor)["a0"])))

    ladder = (base, 2 * base, 4 * base)
    positions, gaps = [], []
    for q in ladder:
        stride = q // base
        positions.append(q ** 2 * (orbits[q].params[::stride] - perimeter * theta))
        gaps.append(q ** 3 * (orbits[q].gaps[::stride] - perimeter / q))
    a0, a1 = _richardson(positions, ladder)
    b0, b1 = _richardson(gaps, ladder)
    empirical = {"a0": a0, "a1": a1, "b0": b0, "b1": b1}
    residuals = {name: float(np.max(np.abs(empirical[name] - closed[name]))) for name in empirical}

    # a0' = b0, with a0 differentiated spectrally from its table
    size = curve.grid_size
    fine_profiles = correction_profiles(curve, np.arange(size) / size, anchor)
    a0_table = TrigSeries.from_samples(fine_profiles["a0"], 1.0)
    relation = float(np.max(np.abs(a0_table.on_grid(size, 1) - fine_profiles["b0"])))
    # same relation on the extracted profiles
    a0_extracted = TrigSeries.from_samples(a0, 1.0, chop_factor=None)
    extracted = float(np.max(np.abs(a0_extracted.on_grid(base, 1) - b0)))
    return OrbitAsymptotics(
        theta=theta,
        empirical=empirical,
        closed=closed,
        residuals=residuals,
        level_residuals=level_residuals,
        relation_residual=relation,
        empirical_relation_residual=extracted,
        relation_scale=float(np.max(np.abs(fine_profiles["b0"]))),
        anchor=anchor,
        levels=ladder,
    )
