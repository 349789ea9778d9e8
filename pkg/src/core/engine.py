"""
Core engine orchestrating domain construction and the spectral computations.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from src.config.settings import Settings, get_settings
from src.core.acceptance import CriterionResult, run_acceptance
from src.core.area_spectrum import (
    AsymptoticFit,
    SpectrumTable,
    ellipse_xray,
    fit_asymptotics,
    solve_orbits,
    spectrum_table,
    xray_transform,
)
from src.core.billiard_dynamics import PhaseChord, orbit_trace
from src.core.curve_geometry import (
    AffineCurve,
    ConicKind,
    ConvexDomainSpec,
    FrameResiduals,
    build_domain,
    detect_conic,
    enclosed_area,
    fit_reference_ellipse,
    frame_residuals,
)
from src.core.deformation_lab import (
    DeformationFamily,
    DeformationSample,
    IsospectralReport,
    deformation_map,
    isospectral_residuals,
)
from src.core.fourier_maps import EvenFourierMap
from src.core.orbit_solver import SymmetricOrbit
from src.core.rigidity_operator import (
    FiniteRankSplit,
    KernelReport,
    TruncatedIsospectralOperator,
    domain_operator,
    ellipse_operator,
    finite_rank_split,
    kernel_analysis,
    operator_bound,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DomainReport:
    """Summary of a built domain."""
    curve: AffineCurve
    affine_perimeter: float
    curvature_range: Tuple[float, float]
    deviation: float
    conic: ConicKind
    area: float
    residuals: FrameResiduals

    def to_report(self) -> dict:
        return {
            "affine_perimeter": self.affine_perimeter,
            "k_min": self.curvature_range[0],
            "k_max": self.curvature_range[1],
            "deviation": self.deviation,
            "conic": self.conic.value,
            "area": self.area,
            "frame_residuals": {
                "unimodularity": self.residuals.unimodularity,
                "structure": self.residuals.structure,
                "speed": self.residuals.speed,
                "symmetry": self.residuals.symmetry,
            },
        }


@dataclass(frozen=True)
class OperatorReport:
    operator: TruncatedIsospectralOperator
    kernel: KernelReport
    split: Optional[FiniteRankSplit]
    bound: float

    def to_report(self) -> dict:
        report = self.kernel.to_report()
        report.update({
            "kind": self.operator.kind.value,
            "modes": self.operator.modes,
            "rows": self.operator.rows,
            "gamma": self.operator.gamma,
            "operator_bound": self.bound,
        })
        if self.split is not None:
            report.update({
                "q0": self.split.split_index,
                "tail_sigma_min": self.split.tail_sigma_min,
                "assembled_kernel_dim": self.split.assembled.kernel_dim,
                "kernel_dim_bound": self.split.kernel_dim_bound,
            })
        return report


class RigidityEngine:
    """
    Entry point for every computation the CLI exposes.

    Owns the settings, the worker count and a cache of built curves keyed
    by their spec.
    """

    def __init__(self, settings: Optional[Settings] = None, threads: Optional[int] = None):
        self.settings = settings or get_settings()
        self.threads = threads or self.settings.get_threads()
        self._curves: Dict[str, AffineCurve] = {}

    def curve(self, spec: ConvexDomainSpec) -> AffineCurve:
        """Build (or reuse) the affine curve of a spec."""
        key = spec.model_dump_json()
        if key not in self._curves:
            logger.debug("building domain %s", key)
            self._curves[key] = build_domain(spec, self.settings)
        return self._curves[key]

    def domain(self, spec: ConvexDomainSpec) -> DomainReport:
        curve = self.curve(spec)
        kappa = curve.samples.curvature
        return DomainReport(
            curve=curve,
            affine_perimeter=curve.affine_perimeter,
            curvature_range=(float(kappa.min()), float(kappa.max())),
            deviation=fit_reference_ellipse(curve).deviation,
            conic=detect_conic(curve, self.settings.geometry.conic_tol).kind,
            area=enclosed_area(curve),
            residuals=frame_residuals(curve),
        )

    def orbits(self, spec: ConvexDomainSpec, periods: Sequence[int]) -> List[SymmetricOrbit]:
        return solve_orbits(self.curve(spec), periods, self.threads, self.settings)

    def trace(self, spec: ConvexDomainSpec, start: float, gap: float, steps: int) -> List[PhaseChord]:
        """Billiard trajectory of the chord (start, start + gap)."""
        return orbit_trace(self.curve(spec), PhaseChord(start, start + gap), steps)

    def spectrum(
        self,
        spec: ConvexDomainSpec,
        q_min: int,
        q_max: int,
        fit_from: Optional[int] = None,
    ) -> Tuple[SpectrumTable, Optional[AsymptoticFit]]:
        """Spectrum over [q_min, q_max]; fitted from fit_from when given."""
        table = spectrum_table(self.curve(spec), q_max, q_min, self.threads, self.settings)
        fit = fit_asymptotics(table, fit_from, q_max) if fit_from is not None else None
        return table, fit

    def xray(
        self,
        spec: ConvexDomainSpec,
        n: EvenFourierMap,
        q_min: int,
        q_max: int,
    ) -> List[Tuple[int, float, float]]:
        """Rows (q, a_q(n), mu_q [n]_q) with the reference-ellipse closed form."""
        curve = self.curve(spec)
        curvature = fit_reference_ellipse(curve).curvature
        rows = []
        for orbit in self.orbits(spec, range(q_min, q_max + 1)):
            rows.append((orbit.q, xray_transform(curve, orbit, n), ellipse_xray(n, orbit.q, curvature)))
        return rows

    def operator(
        self,
        spec: Optional[ConvexDomainSpec],
        modes: Optional[int] = None,
        rows: Optional[int] = None,
        gamma: Optional[float] = None,
        split_index: Optional[int] = None,
    ) -> OperatorReport:
        """Ellipse operator (no spec) or domain operator, with kernel and optional split."""
        config = self.settings.operator
        modes = modes or config.modes
        rows = rows or config.rows
        gamma = gamma or config.gamma
        if spec is None:
            op = ellipse_operator(1.0, modes, rows, gamma)
        else:
            op = domain_operator(
                self.curve(spec), modes, rows, gamma, threads=self.threads, settings=self.settings
            )
        kernel = kernel_analysis(op, config.kernel_rtol)
        split = None
        if split_index is not None:
            split = finite_rank_split(op, split_index, config.kernel_rtol)
        return OperatorReport(op, kernel, split, operator_bound(op.curvature, gamma))

    def deform(
        self,
        family: DeformationFamily,
        tau: float = 0.0,
        periods: Sequence[int] = tuple(range(3, 17)),
    ) -> Tuple[DeformationSample, IsospectralReport]:
        sample = deformation_map(family, tau, settings=self.settings)
        report = isospectral_residuals(family, tau, periods, self.settings)
        return sample, report

    def verify(self, only: Optional[Sequence[int]] = None) -> List[CriterionResult]:
        """Run the acceptance suite."""
        return run_acceptance(self.settings, self.threads, only)
