"""
Exception hierarchy for sympb.
"""

from typing import Optional, Sequence


class SympbError(Exception):
    """Base exception for all sympb errors."""
    pass


class DomainSpecError(SympbError):
    """Raised when a domain, family or run description is invalid."""
    pass


class NonConvexDomainError(DomainSpecError):
    """Raised when the radius of curvature is not positive everywhere."""

    def __init__(self, phi: float, rho: float):
        self.phi = phi
        self.rho = rho
        super().__init__(
            f"radius of curvature {rho:.6g} <= 0 at tangent angle phi = {phi:.6g}"
        )


class PhaseSpaceError(DomainSpecError):
    """Raised when a chord lies outside the symplectic billiard phase space."""
    pass


class NormalizationError(DomainSpecError):
    """Raised when a deformation family cannot be matched or normalized."""
    pass


class ConsistencyError(SympbError):
    """Raised when an internal identity fails beyond tolerance."""
    pass


class DifferentiationAccuracyError(ConsistencyError):
    """Raised when the two affine curvature evaluations disagree."""

    def __init__(self, t: float, formula_value: float, frame_value: float):
        self.t = t
        self.formula_value = formula_value
        self.frame_value = frame_value
        super().__init__(
            f"affine curvature at t = {t:.6g}: formula {formula_value:.12g} "
            f"vs det(g'', g''') {frame_value:.12g}"
        )


class NumericalError(SympbError):
    """Raised when a root finder or iteration does not converge."""

    def __init__(self, message: str, bracket: Optional[Sequence[float]] = None):
        self.bracket = tuple(bracket) if bracket is not None else None
        if bracket is not None:
            message = f"{message} (bracket {self.bracket})"
        super().__init__(message)


class OrbitSolverError(NumericalError):
    """Raised when the maximal orbit solver fails; carries the last iterate."""

    def __init__(self, message: str, q: int, last_iterate=None):
        self.q = q
        self.last_iterate = last_iterate
        super().__init__(f"q = {q}: {message}")


class DegeneratePolygonError(OrbitSolverError):
    """Raised when the orbit parameters lose their cyclic ordering."""
    pass


class FitError(NumericalError):
    """Raised when the asymptotic fit is ill-conditioned."""
    pass


class SplitError(NumericalError):
    """Raised when the tail block of a finite-rank split is singular."""
    pass
