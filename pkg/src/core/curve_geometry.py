"""
Convex domains, affine arclength reparametrization and the affine frame.

A domain is generated in the tangent angle phi by the radius of curvature
of a reference ellipse plus cosine harmonics. The boundary is resampled on
a uniform affine arclength grid and interpolated trigonometrically, so every
derivative in t is spectral.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import mpmath
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.config.settings import Settings, get_settings
from src.core.errors import (
    ConsistencyError,
    DifferentiationAccuracyError,
    DomainSpecError,
    NonConvexDomainError,
    NumericalError,
)
from src.core.spectral import TrigSeries

logger = logging.getLogger(__name__)

_MAX_INVERSION_STEPS = 30


class Harmonic(BaseModel):
    """One cosine harmonic of the radius-of-curvature perturbation."""
    model_config = ConfigDict(frozen=True)

    j: int = Field(ge=2)
    delta: float


def _default_grid() -> int:
    return get_settings().get_grid_size()


class ConvexDomainSpec(BaseModel):
    """
    Axially symmetric domain: rho(phi) = rho_ellipse(phi) + sum delta_j cos(j phi).

    phi is the tangent angle, T(phi) = (-sin phi, cos phi); phi = 0 is the
    axis point (a, 0) of the reference ellipse.
    """
    model_config = ConfigDict(frozen=True)

    a: float = Field(1.0, gt=0)
    b: float = Field(1.0, gt=0)
    perturbation: Tuple[Harmonic, ...] = ()
    grid_size: int = Field(default_factory=_default_grid, ge=16)

    @field_validator("perturbation")
    @classmethod
    def _distinct_harmonics(cls, value: Tuple[Harmonic, ...]) -> Tuple[Harmonic, ...]:
        orders = [h.j for h in value]
        if len(orders) != len(set(orders)):
            raise ValueError(f"harmonics must be distinct, got {orders}")
        return value

    @classmethod
    def from_file(cls, path: Path) -> "ConvexDomainSpec":
        """Load a JSON domain description."""
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DomainSpecError(f"cannot read domain spec {path}: {e}") from e
        return cls.model_validate(data)

    @property
    def semi_axes(self) -> Tuple[float, float]:
        return self.a, self.b

    def with_amplitudes(self, amplitudes: dict) -> "ConvexDomainSpec":
        """Copy with the harmonic amplitudes replaced (missing orders added)."""
        merged = {h.j: h.delta for h in self.perturbation}
        merged.update(amplitudes)
        harmonics = tuple(Harmonic(j=j, delta=d) for j, d in sorted(merged.items()))
        return self.model_copy(update={"perturbation": harmonics})

    def radius_of_curvature(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        c, s = np.cos(phi), np.sin(phi)
        a2, b2 = self.a ** 2, self.b ** 2
        rho = a2 * b2 / (a2 * c ** 2 + b2 * s ** 2) ** 1.5
        for h in self.perturbation:
            rho = rho + h.delta * np.cos(h.j * phi)
        return rho

    def position(self, phi) -> np.ndarray:
        """Closed-form boundary point with tangent angle phi, shape (..., 2)."""
        phi = np.asarray(phi, dtype=float)
        c, s = np.cos(phi), np.sin(phi)
        a2, b2 = self.a ** 2, self.b ** 2
        norm = np.sqrt(a2 * c ** 2 + b2 * s ** 2)
        x = a2 * c / norm
        y = b2 * s / norm
        for h in self.perturbation:
            up, down = h.j + 1, h.j - 1
            x = x + 0.5 * h.delta * (np.cos(up * phi) / up - np.cos(down * phi) / down)
            y = y + 0.5 * h.delta * (np.sin(up * phi) / up + np.sin(down * phi) / down)
        return np.stack([x, y], axis=-1)

    def radius_of_curvature_mp(self, phi):
        """Extended-precision radius of curvature (current mpmath precision)."""
        c, s = mpmath.cos(phi), mpmath.sin(phi)
        a2, b2 = mpmath.mpf(self.a) ** 2, mpmath.mpf(self.b) ** 2
        rho = a2 * b2 / (a2 * c ** 2 + b2 * s ** 2) ** mpmath.mpf(1.5)
        for h in self.perturbation:
            rho += mpmath.mpf(h.delta) * mpmath.cos(h.j * phi)
        return rho

    def position_mp(self, phi) -> Tuple:
        """Extended-precision boundary point with tangent angle phi."""
        c, s = mpmath.cos(phi), mpmath.sin(phi)
        a2, b2 = mpmath.mpf(self.a) ** 2, mpmath.mpf(self.b) ** 2
        norm = mpmath.sqrt(a2 * c ** 2 + b2 * s ** 2)
        x = a2 * c / norm
        y = b2 * s / norm
        for h in self.perturbation:
            up, down = h.j + 1, h.j - 1
            half = mpmath.mpf(h.delta) / 2
            x += half * (mpmath.cos(up * phi) / up - mpmath.cos(down * phi) / down)
            y += half * (mpmath.sin(up * phi) / up + mpmath.sin(down * phi) / down)
        return x, y


@dataclass(frozen=True)
class ExactParametrization:
    """
    Link between the affine parameter and the closed-form construction.

    phi(t) = 2 pi t / L + phase(t); points are matrix @ spec.position(phi) + translation.
    """
    spec: ConvexDomainSpec
    phase: TrigSeries
    affine_perimeter: float
    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def tangent_angle(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return 2.0 * np.pi * t / self.affine_perimeter + self.phase(t)

    def transformed(self, matrix: np.ndarray, translation: np.ndarray) -> "ExactParametrization":
        return ExactParametrization(
            spec=self.spec,
            phase=self.phase,
            affine_perimeter=self.affine_perimeter,
            matrix=matrix @ self.matrix,
            translation=matrix @ self.translation + translation,
        )


@dataclass(frozen=True)
class CurveSamples:
    """Tables on the affine arclength grid."""
    t: np.ndarray
    position: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    rho: np.ndarray
    curvature: np.ndarray
    frame_curvature: np.ndarray


class AffineCurve:
    """
    Boundary curve parametrized by affine arclength t in [0, L).

    Immutable after construction. O sits at t = 0 and O' at t = L/2.
    """

    def __init__(
        self,
        x: TrigSeries,
        y: TrigSeries,
        rho: TrigSeries,
        parametrization: ExactParametrization,
        grid_size: int,
        chop_factor: Optional[float] = 64.0,
    ):
        self.x = x
        self.y = y
        self.rho = rho
        self.parametrization = parametrization
        self.grid_size = grid_size
        self.affine_perimeter = x.period

        m = grid_size
        t = x.grid(m)
        derivs = [
            np.stack([x.on_grid(m, order), y.on_grid(m, order)], axis=-1)
            for order in range(4)
        ]
        rho_t = rho.on_grid(m)
        kappa = _curvature_formula(rho_t, rho.on_grid(m, 1), rho.on_grid(m, 2))
        self.curvature_series = TrigSeries.from_samples(kappa, self.affine_perimeter, chop_factor)
        self.samples = CurveSamples(
            t=t,
            position=derivs[0],
            d1=derivs[1],
            d2=derivs[2],
            d3=derivs[3],
            rho=rho_t,
            curvature=kappa,
            frame_curvature=omega(derivs[2], derivs[3]),
        )

    @classmethod
    def from_tables(
        cls,
        position: np.ndarray,
        rho: np.ndarray,
        affine_perimeter: float,
        parametrization: ExactParametrization,
        chop_factor: Optional[float] = 64.0,
    ) -> "AffineCurve":
        """Interpolate position and radius-of-curvature tables on the t grid."""
        return cls(
            x=TrigSeries.from_samples(position[:, 0], affine_perimeter, chop_factor),
            y=TrigSeries.from_samples(position[:, 1], affine_perimeter, chop_factor),
            rho=TrigSeries.from_samples(rho, affine_perimeter, chop_factor),
            parametrization=parametrization,
            grid_size=position.shape[0],
            chop_factor=chop_factor,
        )

    @property
    def spec(self) -> ConvexDomainSpec:
        return self.parametrization.spec

    @property
    def origin_markers(self) -> Tuple[float, float]:
        """Parameters of O and O'."""
        return 0.0, 0.5 * self.affine_perimeter

    @property
    def origin_points(self) -> np.ndarray:
        return self.position(np.array(self.origin_markers))

    def position(self, t, order: int = 0) -> np.ndarray:
        """gamma^(order)(t), shape (..., 2)."""
        return np.stack([self.x(t, order), self.y(t, order)], axis=-1)

    def radius_of_curvature(self, t, order: int = 0) -> np.ndarray:
        return self.rho(t, order)

    def curvature(self, t, order: int = 0) -> np.ndarray:
        """Affine curvature k (or its derivatives) from the spectral table."""
        return self.curvature_series(t, order)

    def tangent_angle(self, t) -> np.ndarray:
        return self.parametrization.tangent_angle(t)

    def reduce(self, t):
        return np.mod(t, self.affine_perimeter)


def omega(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Standard area form det(u, v) on the last axis."""
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _curvature_formula(rho, drho, d2rho):
    return rho ** (-4.0 / 3.0) - d2rho / (3.0 * rho) + (2.0 / 9.0) * (drho / rho) ** 2


def build_domain(spec: ConvexDomainSpec, settings: Optional[Settings] = None) -> AffineCurve:
    """
    Reparametrize the domain boundary by affine arclength.

    Args:
        spec: Domain description
        settings: Tolerances (global settings by default)

    Returns:
        The affine curve on a grid of spec.grid_size points

    Raises:
        NonConvexDomainError: rho <= 0 somewhere on the phi grid
        ConsistencyError: det(gamma', gamma'') departs from 1 beyond tolerance
    """
    settings = settings or get_settings()
    geometry = settings.geometry
    m = spec.grid_size
    phi = 2.0 * np.pi * np.arange(m) / m

    rho_phi = spec.radius_of_curvature(phi)
    worst = int(np.argmin(rho_phi))
    if rho_phi[worst] <= 0.0:
        raise NonConvexDomainError(float(phi[worst]), float(rho_phi[worst]))

    # dt/dphi = rho^(2/3)
    speed = TrigSeries.from_samples(rho_phi ** (2.0 / 3.0), 2.0 * np.pi, geometry.chop_factor)
    slope, periodic = speed.antiderivative()
    offset = float(periodic(0.0))
    perimeter = 2.0 * np.pi * slope

    def affine_parameter(angle):
        return slope * angle + periodic(angle) - offset

    t_grid = perimeter * np.arange(m) / m
    t_table = slope * phi + periodic.on_grid(m) - offset
    angle = np.interp(
        t_grid, np.append(t_table, perimeter), np.append(phi, 2.0 * np.pi)
    )
    for _ in range(_MAX_INVERSION_STEPS):
        residual = affine_parameter(angle) - t_grid
        angle = angle - residual / spec.radius_of_curvature(angle) ** (2.0 / 3.0)
        if np.max(np.abs(residual)) < 8.0 * np.finfo(float).eps * perimeter:
            break
    else:
        raise NumericalError("affine arclength inversion did not converge")

    phase = TrigSeries.from_samples(
        angle - 2.0 * np.pi * t_grid / perimeter, perimeter, geometry.chop_factor
    )
    curve = AffineCurve.from_tables(
        spec.position(angle),
        spec.radius_of_curvature(angle),
        perimeter,
        ExactParametrization(spec=spec, phase=phase, affine_perimeter=perimeter),
        geometry.chop_factor,
    )

    defect = np.max(np.abs(omega(curve.samples.d1, curve.samples.d2) - 1.0))
    if defect > geometry.frame_tol:
        raise ConsistencyError(
            f"det(g', g'') departs from 1 by {defect:.3g} (tolerance {geometry.frame_tol:.1g}); "
            f"increase grid_size (currently {m})"
        )
    logger.debug("built domain L=%.15g, %d grid points, frame defect %.2e", perimeter, m, defect)
    return curve


def affine_curvature(curve: AffineCurve, t, settings: Optional[Settings] = None):
    """
    Affine curvature at t, computed from rho and from the affine frame.

    Returns:
        k(t) = rho^(-4/3) - rho''/(3 rho) + (2/9)(rho'/rho)^2

    Raises:
        DifferentiationAccuracyError: the frame value det(gamma'', gamma''')
            disagrees beyond the derivative tolerance
    """
    settings = settings or get_settings()
    t = curve.reduce(np.asarray(t, dtype=float))
    formula = _curvature_formula(
        curve.radius_of_curvature(t),
        curve.radius_of_curvature(t, 1),
        curve.radius_of_curvature(t, 2),
    )
    frame = omega(curve.position(t, 2), curve.position(t, 3))
    gap = np.abs(formula - frame)
    if np.any(gap > settings.geometry.derivative_tol):
        worst = int(np.argmax(gap.reshape(-1)))
        raise DifferentiationAccuracyError(
            float(t.reshape(-1)[worst]),
            float(formula.reshape(-1)[worst]),
            float(frame.reshape(-1)[worst]),
        )
    return float(formula) if formula.ndim == 0 else formula


class ConicKind(str, Enum):
    """Outcome of conic detection."""
    ELLIPSE = "ellipse"
    NON_CONIC = "non-conic"


@dataclass(frozen=True)
class ConicClassification:
    kind: ConicKind
    curvature: Optional[float]
    spread: float


def detect_conic(curve: AffineCurve, tolerance: Optional[float] = None) -> ConicClassification:
    """Classify the curve as an ellipse when its affine curvature is constant."""
    if tolerance is None:
        tolerance = get_settings().geometry.conic_tol
    kappa = curve.samples.curvature
    mean = float(np.mean(kappa))
    spread = float(np.max(np.abs(kappa - mean)))
    if mean > 0.0 and spread < tolerance * max(1.0, mean):
        return ConicClassification(ConicKind.ELLIPSE, mean, spread)
    return ConicClassification(ConicKind.NON_CONIC, None, spread)


def apply_area_preserving_affine(
    curve: AffineCurve,
    matrix,
    translation=(0.0, 0.0),
    settings: Optional[Settings] = None,
) -> AffineCurve:
    """
    Image of the curve under x -> matrix @ x + translation.

    The affine parameter and the affine perimeter are unchanged.

    Raises:
        DomainSpecError: the linear part is not unimodular
    """
    settings = settings or get_settings()
    matrix = np.asarray(matrix, dtype=float)
    translation = np.asarray(translation, dtype=float)
    if matrix.shape != (2, 2):
        raise DomainSpecError(f"linear part must be 2x2, got shape {matrix.shape}")
    det = float(np.linalg.det(matrix))
    if abs(det - 1.0) > settings.geometry.unimodular_tol:
        raise DomainSpecError(f"linear part has determinant {det:.12g}, expected 1")

    samples = curve.samples
    position = samples.position @ matrix.T + translation
    speed = np.linalg.norm(samples.d1 @ matrix.T, axis=-1)
    return AffineCurve.from_tables(
        position,
        speed ** 3,
        curve.affine_perimeter,
        curve.parametrization.transformed(matrix, translation),
        settings.geometry.chop_factor,
    )


@dataclass(frozen=True)
class ReferenceEllipse:
    """Ellipse of equal affine perimeter and the curvature deviation proxy."""
    curvature: float
    affine_perimeter: float
    deviation: float

    @property
    def inverse_sqrt_curvature(self) -> float:
        return self.curvature ** -0.5


def fit_reference_ellipse(curve: AffineCurve) -> ReferenceEllipse:
    """Reference ellipse with L_E = L and k_E = (2 pi / L)^2."""
    perimeter = curve.affine_perimeter
    k_e = (2.0 * np.pi / perimeter) ** 2
    deviation = float(np.max(np.abs(curve.samples.curvature - k_e)))
    return ReferenceEllipse(curvature=k_e, affine_perimeter=perimeter, deviation=deviation)


def enclosed_area(curve: AffineCurve) -> float:
    """Euclidean area enclosed by the curve."""
    s = curve.samples
    return 0.5 * float(np.mean(omega(s.position, s.d1))) * curve.affine_perimeter


def total_curvature(curve: AffineCurve) -> float:
    """Integral of k over one period."""
    return float(np.mean(curve.samples.curvature)) * curve.affine_perimeter


@dataclass(frozen=True)
class FrameResiduals:
    unimodularity: float
    structure: float
    speed: float
    symmetry: float


def frame_residuals(curve: AffineCurve) -> FrameResiduals:
    """Sup-norm defects of the affine frame identities on the grid."""
    s = curve.samples
    mirror = np.roll(s.position[::-1], 1, axis=0)
    mirror[:, 1] = -mirror[:, 1]
    return FrameResiduals(
        unimodularity=float(np.max(np.abs(omega(s.d1, s.d2) - 1.0))),
        structure=float(np.max(np.linalg.norm(s.d3 + s.curvature[:, None] * s.d1, axis=-1))),
        speed=float(np.max(np.abs(np.linalg.norm(s.d1, axis=-1) - np.cbrt(s.rho)))),
        symmetry=float(np.max(np.linalg.norm(mirror - s.position, axis=-1))),
    )


def support_function(curve: AffineCurve, directions: np.ndarray, newton_steps: int = 3) -> np.ndarray:
    """
    h(u) = max_t <gamma(t), u> for each row u of `directions`.

    The grid maximizer is refined with Newton steps on <gamma'(t), u> = 0.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    s = curve.samples
    t = s.t[np.argmax(directions @ s.position.T, axis=1)]
    for _ in range(newton_steps):
        slope = np.einsum("ij,ij->i", curve.position(t, 1), directions)
        bend = np.einsum("ij,ij->i", curve.position(t, 2), directions)
        t = t - slope / bend
    return np.einsum("ij,ij->i", curve.position(t), directions)


def hausdorff_distance(first: AffineCurve, second: AffineCurve, directions: int = 720) -> float:
    """Hausdorff distance of two convex curves via their support functions."""
    angle = 2.0 * np.pi * np.arange(directions) / directions
    units = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    return float(np.max(np.abs(support_function(first, units) - support_function(second, units))))


def curve_rows(curve: AffineCurve):
    """CSV rows (t, x, y, rho, k) on the grid."""
    s = curve.samples
    for i in range(s.t.shape[0]):
        yield (s.t[i], s.position[i, 0], s.position[i, 1], s.rho[i], s.curvature[i])
