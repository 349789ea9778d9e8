"""
One-parameter families of domains and their deformation maps.

A family either moves harmonic amplitudes linearly in tau or applies the
unimodular path exp(tau G) to its base curve. Curves at nearby tau are
compared at matched parameters: equal t in fixed-points mode, equal
theta = t / L in raw mode.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy import linalg

from src.config.settings import Settings, get_settings
from src.core.area_spectrum import correction_functionals, xray_transform
from src.core.curve_geometry import (
    AffineCurve,
    ConvexDomainSpec,
    apply_area_preserving_affine,
    build_domain,
    hausdorff_distance,
    omega,
)
from src.core.errors import DomainSpecError, NormalizationError
from src.core.fourier_maps import EvenFourierMap
from src.core.orbit_solver import max_area_orbit

logger = logging.getLogger(__name__)


class Normalization(str, Enum):
    """How curves of a family are matched."""
    FIXED_POINTS = "fixed-points"
    RAW = "raw"


class HarmonicRate(BaseModel):
    """d delta_j / d tau for one harmonic."""
    model_config = ConfigDict(frozen=True)

    j: int = Field(ge=2)
    delta_dot: float


class AffinePath(BaseModel):
    """Traceless generator G of the unimodular path exp(tau G)."""
    model_config = ConfigDict(frozen=True)

    affine: Tuple[Tuple[float, float], Tuple[float, float]]

    @field_validator("affine")
    @classmethod
    def _traceless(cls, value):
        trace = value[0][0] + value[1][1]
        if abs(trace) > 1e-12:
            raise ValueError(f"generator must be traceless, trace is {trace}")
        return value

    @property
    def generator(self) -> np.ndarray:
        return np.asarray(self.affine, dtype=float)


class DeformationFamily(BaseModel):
    """
    Family tau -> Omega_tau on an interval containing 0.

    path is either a list of harmonic rates or {"affine": G}; no path gives
    the constant family.
    """
    model_config = ConfigDict(frozen=True)

    base: ConvexDomainSpec = Field(default_factory=ConvexDomainSpec)
    path: Union[Tuple[HarmonicRate, ...], AffinePath] = ()
    normalization: Normalization = Normalization.FIXED_POINTS
    interval: Tuple[float, float] = (-0.1, 0.1)

    _base_curve: Optional[AffineCurve] = PrivateAttr(default=None)

    @field_validator("path", mode="before")
    @classmethod
    def _coerce_path(cls, value):
        if value is None:
            return ()
        return value

    @model_validator(mode="after")
    def _check_interval(self):
        low, high = self.interval
        if not low <= 0.0 <= high:
            raise ValueError(f"interval {self.interval} must contain 0")
        if isinstance(self.path, tuple):
            orders = [rate.j for rate in self.path]
            if len(orders) != len(set(orders)):
                raise ValueError(f"harmonic rates must be distinct, got {orders}")
        return self

    @classmethod
    def from_file(cls, path: Path) -> "DeformationFamily":
        """Load a JSON family description."""
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DomainSpecError(f"cannot read family spec {path}: {e}") from e
        return cls.model_validate(data)

    @property
    def is_affine(self) -> bool:
        return isinstance(self.path, AffinePath)

    def contains(self, tau: float) -> bool:
        low, high = self.interval
        return low <= tau <= high

    def spec_at(self, tau: float) -> ConvexDomainSpec:
        """Domain spec at tau (the base spec for affine families)."""
        if self.is_affine or not self.path:
            return self.base
        current = {h.j: h.delta for h in self.base.perturbation}
        return self.base.with_amplitudes(
            {rate.j: current.get(rate.j, 0.0) + tau * rate.delta_dot for rate in self.path}
        )

    def base_curve(self, settings: Optional[Settings] = None) -> AffineCurve:
        if self._base_curve is None:
            self._base_curve = build_domain(self.base, settings)
        return self._base_curve

    def curve_at(self, tau: float, settings: Optional[Settings] = None) -> AffineCurve:
        """
        Boundary of Omega_tau, normalized according to the family mode.

        Raises:
            DomainSpecError: tau outside the interval or an invalid spec
            NormalizationError: the axis points cannot be sent to O and O'
        """
        if not self.contains(tau):
            raise DomainSpecError(f"tau = {tau} outside the family interval {self.interval}")
        settings = settings or get_settings()
        if self.is_affine:
            matrix = linalg.expm(tau * self.path.generator)
            curve = apply_area_preserving_affine(self.base_curve(settings), matrix, settings=settings)
        elif tau == 0.0 or not self.path:
            curve = self.base_curve(settings)
        else:
            curve = build_domain(self.spec_at(tau), settings)
        if self.normalization is Normalization.FIXED_POINTS:
            curve = _normalize_fixed_points(curve, self.base_curve(settings), settings)
        return curve


def _normalize_fixed_points(curve: AffineCurve, reference: AffineCurve, settings: Settings) -> AffineCurve:
    """Send the axis points of `curve` to O, O' of `reference` by x -> diag(l, 1/l) x + c."""
    tol = settings.deformation.matching_tol
    if abs(curve.affine_perimeter - reference.affine_perimeter) > tol:
        raise NormalizationError(
            f"affine perimeters differ by {curve.affine_perimeter - reference.affine_perimeter:.3g}; "
            "fixed-points matching needs equal L (use raw normalization)"
        )
    points = curve.origin_points
    target = reference.origin_points
    if np.max(np.abs(points[:, 1])) > tol:
        raise NormalizationError(
            f"axis points {points.tolist()} are off the symmetry axis; use raw normalization"
        )
    span = points[0, 0] - points[1, 0]
    scale = (target[0, 0] - target[1, 0]) / span if span != 0.0 else 0.0
    if scale <= 0.0:
        raise NormalizationError("axis points cannot be sent to O and O' by an orientation-preserving map")
    if abs(scale - 1.0) <= tol and abs(target[0, 0] - points[0, 0]) <= tol:
        return curve
    matrix = np.diag([scale, 1.0 / scale])
    translation = np.array([target[0, 0] - scale * points[0, 0], 0.0])
    return apply_area_preserving_affine(curve, matrix, translation, settings)


def _matched_parameters(curve: AffineCurve, reference: AffineCurve, t: np.ndarray, mode: Normalization) -> np.ndarray:
    if mode is Normalization.RAW:
        return t * (curve.affine_perimeter / reference.affine_perimeter)
    return t


def _projection_grid(modes: int) -> np.ndarray:
    size = 4 * (modes + 1)
    return np.arange(size) / size


def _cosine_projection(values: np.ndarray, modes: int) -> Tuple[np.ndarray, float]:
    """Cosine coefficients c_0..c_modes of a sampled 1-periodic function, plus its odd part."""
    spectrum = np.fft.rfft(values) / values.size
    coefficients = 2.0 * spectrum.real[: modes + 1]
    coefficients[0] = spectrum[0].real
    odd = 2.0 * float(np.max(np.abs(spectrum.imag)))
    return coefficients, odd


def _sampled_map(family: DeformationFamily, tau: float, h: float, theta: np.ndarray, settings: Settings) -> np.ndarray:
    """det(d_tau gamma, d_t gamma) at matched parameters by central differences."""
    center = family.curve_at(tau, settings)
    t = center.affine_perimeter * theta
    plus = family.curve_at(tau + h, settings)
    minus = family.curve_at(tau - h, settings)
    mode = family.normalization
    velocity = (
        plus.position(_matched_parameters(plus, center, t, mode))
        - minus.position(_matched_parameters(minus, center, t, mode))
    ) / (2.0 * h)
    return omega(velocity, center.position(t, 1))


@dataclass(frozen=True)
class DeformationSample:
    """Deformation map at tau with its diagnostics."""
    tau: float
    n: EvenFourierMap
    step: float
    order_estimate: Optional[float]
    odd_defect: float
    xray: Dict[int, float] = field(default_factory=dict)
    action_derivatives: Dict[int, float] = field(default_factory=dict)


def deformation_map(
    family: DeformationFamily,
    tau: float = 0.0,
    h: Optional[float] = None,
    modes: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> DeformationSample:
    """
    n_tau(theta) = det(d_tau gamma, d_t gamma) projected on cos(2 pi p theta).

    The order estimate compares the maps at h, h/2 and h/4 (about 2 for a
    central difference); it is None when the differences are at roundoff.

    Raises:
        DomainSpecError: tau +- h outside the interval
        NormalizationError: curves cannot be matched
    """
    settings = settings or get_settings()
    h = settings.deformation.step if h is None else h
    modes = settings.deformation.modes if modes is None else modes
    if not (family.contains(tau - h) and family.contains(tau + h)):
        raise DomainSpecError(f"tau +- h = {tau} +- {h} leaves the interval {family.interval}")

    theta = _projection_grid(modes)
    levels = [_sampled_map(family, tau, h / 2 ** k, theta, settings) for k in range(3)]
    coefficients, odd = _cosine_projection(levels[0], modes)

    coarse = float(np.max(np.abs(levels[0] - levels[1])))
    fine = float(np.max(np.abs(levels[1] - levels[2])))
    order = None
    if fine > 1e-13 and coarse > 1e-13:
        order = float(np.log2(coarse / fine))
    logger.debug("deformation map at tau=%g: order estimate %s, odd part %.2e", tau, order, odd)
    return DeformationSample(
        tau=tau,
        n=EvenFourierMap(coefficients, settings.operator.gamma),
        step=h,
        order_estimate=order,
        odd_defect=odd,
    )


@dataclass(frozen=True)
class ActionDerivative:
    q: int
    finite_difference: float
    xray: float

    @property
    def difference(self) -> float:
        return abs(self.finite_difference - self.xray)


def action_derivative_check(
    family: DeformationFamily,
    tau: float,
    q: int,
    h: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> ActionDerivative:
    """
    d_tau A_q by central differences with the orbit frozen at tau, against
    the X-ray transform of the deformation map.
    """
    settings = settings or get_settings()
    h = settings.deformation.step if h is None else h
    center = family.curve_at(tau, settings)
    orbit = max_area_orbit(center, q, settings=settings)

    def frozen_action(shift: float) -> float:
        curve = family.curve_at(tau + shift, settings)
        params = _matched_parameters(curve, center, orbit.params, family.normalization)
        points = curve.position(params)
        return float(np.sum(omega(points, np.roll(points, -1, axis=0))))

    derivative = (frozen_action(h) - frozen_action(-h)) / (2.0 * h)
    sample = deformation_map(family, tau, h, settings=settings)
    return ActionDerivative(q=q, finite_difference=derivative, xray=xray_transform(center, orbit, sample.n))


@dataclass(frozen=True)
class IsospectralReport:
    """Quantities an isospectral family must annihilate at tau."""
    tau: float
    mean_mode: float
    alpha1: float
    alpha2: float
    xray: Dict[int, float]
    length_change: float
    value_at_origin: float
    value_at_antipode: float
    xray_tol: float
    length_tol: float

    @property
    def consistent(self) -> bool:
        small = [abs(self.mean_mode), abs(self.alpha1), abs(self.alpha2)]
        small += [abs(v) for v in self.xray.values()]
        return max(small, default=0.0) <= self.xray_tol and abs(self.length_change) <= self.length_tol

    def to_report(self) -> dict:
        return {
            "tau": self.tau,
            "n0": self.mean_mode,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "xray": {str(q): value for q, value in sorted(self.xray.items())},
            "length_change": self.length_change,
            "n_at_O": self.value_at_origin,
            "n_at_O_prime": self.value_at_antipode,
            "isospectral_consistent": self.consistent,
        }


def isospectral_residuals(
    family: DeformationFamily,
    tau: float = 0.0,
    periods: Sequence[int] = tuple(range(3, 17)),
    settings: Optional[Settings] = None,
) -> IsospectralReport:
    """Evaluate mean mode, correction functionals, X-ray values and L_tau - L_0."""
    settings = settings or get_settings()
    curve = family.curve_at(tau, settings)
    sample = deformation_map(family, tau, settings=settings)
    corrections = correction_functionals(curve, sample.n)
    xray = {
        q: xray_transform(curve, max_area_orbit(curve, q, settings=settings), sample.n)
        for q in periods
    }
    return IsospectralReport(
        tau=tau,
        mean_mode=float(sample.n.coefficients[0]),
        alpha1=corrections.alpha1,
        alpha2=corrections.alpha2,
        xray=xray,
        length_change=curve.affine_perimeter - family.base_curve(settings).affine_perimeter,
        value_at_origin=float(sample.n(0.0)),
        value_at_antipode=float(sample.n(0.5)),
        xray_tol=settings.deformation.xray_tol,
        length_tol=settings.deformation.length_tol,
    )


@dataclass(frozen=True)
class RankOneVerdict:
    """Vanishing deformation maps imply a constant family."""
    applicable: bool
    max_map_norm: float
    max_distance: Optional[float]
    tolerance: float

    @property
    def passed(self) -> Optional[bool]:
        if not self.applicable:
            return None
        return self.max_distance <= self.tolerance


def rank_one_check(
    family: DeformationFamily,
    samples: int = 5,
    tolerance: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> RankOneVerdict:
    """
    If n_tau vanishes at every sampled tau, check that Omega_tau = Omega_0
    through the support-function distance.
    """
    settings = settings or get_settings()
    tolerance = settings.deformation.xray_tol if tolerance is None else tolerance
    step = settings.deformation.step
    low, high = family.interval
    taus = np.linspace(low + step, high - step, samples) if high - low > 2 * step else np.array([0.0])

    norms = []
    for tau in taus:
        sample = deformation_map(family, float(tau), step, settings=settings)
        norms.append(float(np.sum(np.abs(sample.n.coefficients))))
    max_norm = max(norms)
    if max_norm > tolerance:
        logger.info("rank-one check not applicable: |n| reaches %.3g", max_norm)
        return RankOneVerdict(False, max_norm, None, tolerance)

    base = family.base_curve(settings)
    distances: List[float] = [
        hausdorff_distance(family.curve_at(float(tau), settings), base) for tau in taus
    ]
    return RankOneVerdict(True, max_norm, max(distances), tolerance)
