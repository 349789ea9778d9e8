"""
Linear isospectral operators on even Fourier maps.

Rows are indexed by the period q and columns by the cosine mode p. The
ellipse operator is explicit and inverted by Moebius inversion; the domain
operator is assembled from X-ray transforms of maximal orbits minus the
correction functionals. Invertibility is judged on the gamma-weighted
matrix (row q scaled by q^gamma, column p by p^-gamma).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy import linalg, special
from sympy import factorint

from src.config.settings import Settings, get_settings
from src.core.area_spectrum import (
    correction_functionals,
    correction_functional_rows,
    solve_orbits,
    xray_matrix,
    xray_transform,
)
from src.core.curve_geometry import AffineCurve, fit_reference_ellipse
from src.core.errors import ConsistencyError, DomainSpecError, SplitError
from src.core.fourier_maps import (
    DEFAULT_GAMMA,
    EvenFourierMap,
    GammaSequence,
    cyclic_sum,
    ellipse_multiplier,
    hgamma_norm,
)
from src.core.orbit_solver import ExpansionAnchor

logger = logging.getLogger(__name__)

__all__ = [
    "EvenFourierMap",
    "GammaSequence",
    "cyclic_sum",
    "hgamma_norm",
    "mobius",
    "mobius_table",
    "mobius_identity_defects",
    "apply_T_ellipse",
    "invert_T_ellipse",
    "apply_T_domain",
    "OperatorKind",
    "TruncatedIsospectralOperator",
    "ellipse_operator",
    "domain_operator",
    "KernelReport",
    "kernel_analysis",
    "FiniteRankSplit",
    "finite_rank_split",
    "BoundCheck",
    "bound_suite",
    "operator_bound",
    "truncation_tail_bound",
]


def mobius(k: int) -> int:
    """Moebius function from the prime factorisation of k."""
    if k < 1:
        raise DomainSpecError(f"mobius is defined for k >= 1, got {k}")
    exponents = factorint(k)
    if any(e > 1 for e in exponents.values()):
        return 0
    return -1 if len(exponents) % 2 else 1


def mobius_table(limit: int) -> np.ndarray:
    """mu(0..limit) by an Eratosthenes sieve (mu(0) = 0)."""
    mu = np.ones(limit + 1, dtype=np.int8)
    mu[0] = 0
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, limit + 1):
        if not is_prime[p]:
            continue
        is_prime[2 * p::p] = False
        mu[p::p] *= -1
        mu[p * p::p * p] = 0
    return mu


def mobius_identity_defects(limit: int) -> List[int]:
    """k <= limit where sum_{d | k} mu(d) differs from [k = 1]."""
    mu = mobius_table(limit).astype(np.int64)
    sums = np.zeros(limit + 1, dtype=np.int64)
    for d in np.nonzero(mu)[0]:
        sums[d::d] += mu[d]
    expected = np.zeros(limit + 1, dtype=np.int64)
    expected[1] = 1
    return [int(k) for k in np.nonzero(sums[1:] != expected[1:])[0] + 1]


def _multipliers(rows: int, curvature: float) -> np.ndarray:
    """mu_q for q = 0..rows, zero below q = 3."""
    out = np.zeros(rows + 1)
    if rows >= 3:
        out[3:] = ellipse_multiplier(np.arange(3, rows + 1), curvature)
    return out


def apply_T_ellipse(n: EvenFourierMap, curvature: float = 1.0, rows: Optional[int] = None) -> GammaSequence:
    """
    Ellipse operator: u_0 = c_0, u_1 = n(0), u_2 = n(1/2), u_q = mu_q [n]*_q.

    Args:
        n: Even map
        curvature: Affine curvature k_E of the ellipse
        rows: Largest q (the map truncation by default)
    """
    rows = n.modes if rows is None else rows
    c = n.coefficients
    u = np.zeros(rows + 1)
    u[0] = c[0]
    if rows >= 1:
        u[1] = np.sum(c)
    if rows >= 2:
        u[2] = np.sum(c * (-1.0) ** np.arange(c.size))
    mu = _multipliers(rows, curvature)
    for q in range(3, rows + 1):
        u[q] = mu[q] * np.sum(c[q::q])
    return GammaSequence(u, n.gamma)


def invert_T_ellipse(u: GammaSequence, curvature: float = 1.0, modes: Optional[int] = None) -> EvenFourierMap:
    """
    Two-sided inverse of the ellipse operator on truncations with rows >= modes.

    c_j = sum_d mu(d) u_jd / mu_jd for j >= 3, c_0 = u_0, and (c_1, c_2) from
    the values at theta = 0 and theta = 1/2.

    Raises:
        DomainSpecError: fewer than three rows or more modes than rows
        ConsistencyError: a multiplier vanished
    """
    rows = u.rows
    modes = rows if modes is None else modes
    if rows < 2 or modes < 2:
        raise DomainSpecError("inversion needs rows and modes up to at least q = 2")
    if modes > rows:
        raise DomainSpecError(f"cannot recover {modes} modes from {rows} rows")
    mu_q = _multipliers(rows, curvature)
    if rows >= 3 and np.any(mu_q[3:] == 0.0):
        raise ConsistencyError("ellipse multiplier vanished for some q >= 3")

    v = np.zeros(rows + 1)
    v[3:] = u.entries[3:] / mu_q[3:]
    mu = mobius_table(rows)
    c = np.zeros(modes + 1)
    c[0] = u.entries[0]
    for j in range(3, modes + 1):
        d = np.arange(1, rows // j + 1)
        c[j] = float(np.dot(mu[d], v[j * d]))
    sign = (-1.0) ** np.arange(modes + 1)
    first = u.entries[1] - c[0] - np.sum(c[3:])
    second = u.entries[2] - c[0] - np.sum((sign * c)[3:])
    c[1] = 0.5 * (first - second)
    c[2] = 0.5 * (first + second)
    return EvenFourierMap(c, u.gamma)


def apply_T_domain(
    curve: AffineCurve,
    n: EvenFourierMap,
    q_max: int,
    anchor: ExpansionAnchor = ExpansionAnchor.STATED,
    threads: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> GammaSequence:
    """
    Domain operator: rows 0..2 as for the ellipse, and for q >= 3
    a_q(n) - (mu_q + lambda) c_0 - alpha_1(n) / q^2 - alpha_2(n) / q^3.
    """
    reference = fit_reference_ellipse(curve)
    corrections = correction_functionals(curve, n, anchor)
    u = apply_T_ellipse(n, reference.curvature, min(q_max, 2)).entries
    u = np.concatenate([u, np.zeros(q_max + 1 - u.size)])
    periods = list(range(3, q_max + 1))
    mu = _multipliers(q_max, reference.curvature)
    c0 = float(n.coefficients[0])
    for orbit in solve_orbits(curve, periods, threads, settings):
        q = orbit.q
        u[q] = (
            xray_transform(curve, orbit, n)
            - (mu[q] + corrections.shift) * c0
            - corrections.alpha1 / q ** 2
            - corrections.alpha2 / q ** 3
        )
    return GammaSequence(u, n.gamma)


class OperatorKind(str, Enum):
    ELLIPSE = "ellipse"
    DOMAIN = "domain"


def _row_weights(rows: int, gamma: float) -> np.ndarray:
    weights = np.arange(rows + 1, dtype=float) ** gamma
    weights[0] = 1.0
    return weights


@dataclass(frozen=True)
class TruncatedIsospectralOperator:
    """(Q + 1) x (N + 1) truncation of an isospectral operator."""
    matrix: np.ndarray
    kind: OperatorKind
    curvature: float
    affine_perimeter: float
    gamma: float = DEFAULT_GAMMA
    split_index: Optional[int] = None

    @property
    def rows(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def modes(self) -> int:
        return self.matrix.shape[1] - 1

    def apply(self, n: EvenFourierMap) -> GammaSequence:
        return GammaSequence(self.matrix @ n.padded(self.modes + 1), self.gamma)

    def weighted(self) -> np.ndarray:
        """Row q scaled by q^gamma, column p by p^-gamma (index 0 unscaled)."""
        return (
            _row_weights(self.rows, self.gamma)[:, None]
            * self.matrix
            / _row_weights(self.modes, self.gamma)[None, :]
        )

    def csv_rows(self):
        for q, row in enumerate(self.matrix):
            yield (q, *row.tolist())


def ellipse_operator(
    curvature: float = 1.0,
    modes: int = 128,
    rows: int = 128,
    gamma: float = DEFAULT_GAMMA,
) -> TruncatedIsospectralOperator:
    """Closed-form ellipse operator matrix."""
    matrix = np.zeros((rows + 1, modes + 1))
    matrix[0, 0] = 1.0
    if rows >= 1:
        matrix[1, :] = 1.0
    if rows >= 2:
        matrix[2, :] = (-1.0) ** np.arange(modes + 1)
    mu = _multipliers(rows, curvature)
    for q in range(3, rows + 1):
        matrix[q, q::q] = mu[q]
    return TruncatedIsospectralOperator(
        matrix=matrix,
        kind=OperatorKind.ELLIPSE,
        curvature=curvature,
        affine_perimeter=2.0 * np.pi / np.sqrt(curvature),
        gamma=gamma,
    )


def domain_operator(
    curve: AffineCurve,
    modes: int = 128,
    rows: int = 128,
    gamma: float = DEFAULT_GAMMA,
    anchor: ExpansionAnchor = ExpansionAnchor.STATED,
    threads: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> TruncatedIsospectralOperator:
    """Numerical domain operator, one maximal orbit per row q >= 3."""
    reference = fit_reference_ellipse(curve)
    base = ellipse_operator(reference.curvature, modes, min(rows, 2), gamma).matrix
    matrix = np.zeros((rows + 1, modes + 1))
    matrix[: base.shape[0]] = base
    shift, alpha1, alpha2 = correction_functional_rows(curve, modes, anchor)
    mu = _multipliers(rows, reference.curvature)
    for orbit in solve_orbits(curve, range(3, rows + 1), threads, settings):
        q = orbit.q
        matrix[q] = xray_matrix(curve, orbit, modes) - alpha1 / q ** 2 - alpha2 / q ** 3
        matrix[q, 0] -= mu[q] + shift
    logger.debug("assembled domain operator %dx%d", rows + 1, modes + 1)
    return TruncatedIsospectralOperator(
        matrix=matrix,
        kind=OperatorKind.DOMAIN,
        curvature=reference.curvature,
        affine_perimeter=curve.affine_perimeter,
        gamma=gamma,
    )


@dataclass(frozen=True)
class KernelReport:
    """Weighted singular values and the kernel (in coefficient space)."""
    singular_values: np.ndarray
    kernel_basis: np.ndarray
    split_index: Optional[int] = None

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values.min()) if self.singular_values.size else 0.0

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values.max()) if self.singular_values.size else 0.0

    @property
    def condition(self) -> float:
        return self.sigma_max / self.sigma_min if self.sigma_min > 0.0 else float("inf")

    @property
    def kernel_dim(self) -> int:
        return int(self.kernel_basis.shape[1])

    def to_report(self) -> dict:
        return {
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "condition": self.condition,
            "kernel_dim": self.kernel_dim,
            "q0": self.split_index,
        }


def _weighted_kernel(weighted: np.ndarray, column_weights: np.ndarray, rtol: float, split_index=None) -> KernelReport:
    """SVD of a weighted matrix; kernel vectors mapped back by the column weights."""
    columns = weighted.shape[1]
    if not np.any(weighted):
        return KernelReport(np.zeros(min(weighted.shape)), np.eye(columns), split_index)
    _, sigma, vh = linalg.svd(weighted, full_matrices=True)
    null = np.nonzero(sigma < rtol * sigma.max())[0]
    missing = np.arange(sigma.size, columns)
    basis = vh[np.concatenate([null, missing])].T / column_weights[:, None]
    if basis.size:
        basis = basis / np.linalg.norm(basis, axis=0)
    return KernelReport(sigma, basis, split_index)


def kernel_analysis(op: TruncatedIsospectralOperator, rtol: Optional[float] = None) -> KernelReport:
    """
    Weighted SVD of a truncation; a kernel is declared below rtol * sigma_max.

    Raises:
        DomainSpecError: fewer rows than modes
    """
    rtol = get_settings().operator.kernel_rtol if rtol is None else rtol
    if op.rows < op.modes:
        raise DomainSpecError(f"kernel analysis needs rows >= modes, got {op.rows} < {op.modes}")
    report = _weighted_kernel(op.weighted(), _row_weights(op.modes, op.gamma), rtol, op.split_index)
    logger.debug("kernel analysis: sigma_min %.3g, kernel dim %d", report.sigma_min, report.kernel_dim)
    return report


@dataclass(frozen=True)
class FiniteRankSplit:
    """n+ = F n- for kernel elements; assembled kernel over the low modes."""
    split_index: int
    solve_map: np.ndarray
    tail_sigma_min: float
    assembled: KernelReport = field(repr=False)

    @property
    def kernel_dim_bound(self) -> int:
        return self.split_index + 1


def finite_rank_split(
    op: TruncatedIsospectralOperator,
    split_index: int,
    rtol: Optional[float] = None,
) -> FiniteRankSplit:
    """
    Split the columns at p = q0 over the rows q >= q0 and solve for the high modes.

    F = -(T2)^+ T1 in the weighted least-squares sense; kernel vectors of
    the full truncation satisfy n+ = F n- and so span at most q0 + 1 dimensions.

    Raises:
        DomainSpecError: q0 outside [0, N)
        SplitError: the tail block is singular
    """
    rtol = get_settings().operator.kernel_rtol if rtol is None else rtol
    q0 = int(split_index)
    if not 0 <= q0 < op.modes:
        raise DomainSpecError(f"split index must lie in [0, {op.modes}), got {q0}")
    row_w = _row_weights(op.rows, op.gamma)[q0:, None]
    col_w = _row_weights(op.modes, op.gamma)
    low, high = op.matrix[q0:, : q0 + 1], op.matrix[q0:, q0 + 1:]
    tail = row_w * high / col_w[None, q0 + 1:]
    sigma = linalg.svdvals(tail)
    if sigma.size == 0 or sigma.min() <= rtol * max(sigma.max(), np.finfo(float).tiny):
        raise SplitError(f"tail block of the split at q0 = {q0} is singular; try a larger q0")
    scaled, *_ = linalg.lstsq(tail, row_w * low)
    solve_map = -scaled / col_w[q0 + 1:, None]

    stacked = np.vstack([np.eye(q0 + 1), solve_map])
    assembled = _row_weights(op.rows, op.gamma)[:, None] * (op.matrix @ stacked) / col_w[None, : q0 + 1]
    report = _weighted_kernel(assembled, col_w[: q0 + 1], rtol, q0)
    return FiniteRankSplit(
        split_index=q0,
        solve_map=solve_map,
        tail_sigma_min=float(sigma.min()),
        assembled=report,
    )


def operator_bound(curvature: float = 1.0, gamma: float = DEFAULT_GAMMA) -> float:
    """
    C with ||T_E n||_gamma <= C ||n||_gamma.

    Rows 1 and 2 contribute 2^gamma (1 + zeta(gamma)), rows q >= 3 at most
    zeta(gamma) sup mu_q = zeta(gamma) 4 pi k_E^-1/2.
    """
    zeta = float(special.zeta(gamma))
    return max(2.0 ** gamma * (1.0 + zeta), zeta * 4.0 * np.pi / np.sqrt(curvature))


def truncation_tail_bound(n: EvenFourierMap, modes: Optional[int] = None) -> float:
    """sum_{p > N} |c_p| <= zeta(gamma, N + 1) ||n||_gamma for the discarded modes."""
    modes = n.modes if modes is None else modes
    return float(special.zeta(n.gamma, modes + 1)) * n.norm


@dataclass(frozen=True)
class BoundCheck:
    """Worst ratio lhs / bound over all instances of one estimate."""
    name: str
    worst_ratio: float
    instances: int
    witness: str = ""

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= 1.0 + 1e-12


def bound_suite(
    gamma: float = DEFAULT_GAMMA,
    smoothness: int = 2,
    trials: int = 50,
    modes: int = 32,
    seed: int = 0,
) -> List[BoundCheck]:
    """
    Check the cyclic-sum, product and smoothness estimates on fixed and random maps.

    Raises:
        DomainSpecError: gamma <= 1 or gamma <= smoothness + 1
    """
    if gamma <= 1.0:
        raise DomainSpecError(f"the estimates need gamma > 1, got {gamma}")
    if gamma <= smoothness + 1:
        raise DomainSpecError(f"C^{smoothness} estimate needs gamma > {smoothness + 1}, got {gamma}")
    rng = np.random.default_rng(seed)
    zeta = float(special.zeta(gamma))

    fixed = [
        EvenFourierMap.from_modes({8: 1.0}, gamma=gamma),
        EvenFourierMap.from_modes({1: 1.0}, gamma=gamma),
        EvenFourierMap.constant(gamma=gamma),
    ]
    maps = fixed + [EvenFourierMap.random(rng, modes, gamma) for _ in range(trials)]

    def worst(pairs):
        ratio, witness, count = 0.0, "", 0
        for value, label in pairs:
            count += 1
            if value > ratio:
                ratio, witness = value, label
        return ratio, witness, count

    # cyclic sums
    def cyclic_ratios():
        for index, n in enumerate(maps):
            for q in range(1, 2 * n.modes + 2):
                _, star = cyclic_sum(n, q)
                bound = zeta * q ** -gamma * n.norm
                if bound > 0.0:
                    yield abs(star) / bound, f"map {index}, q = {q}"

    # products
    def product_ratios():
        pairs = [(fixed[2], fixed[2]), (fixed[0], fixed[1])]
        pairs += [
            (EvenFourierMap.random(rng, modes, gamma), EvenFourierMap.random(rng, modes, gamma))
            for _ in range(trials)
        ]
        for index, (first, second) in enumerate(pairs):
            bound = 2.0 * (zeta + 1.0) * first.norm * second.norm
            yield (first * second).norm / bound, f"pair {index}"

    # smoothness
    def smoothness_ratios():
        size = 64 * (modes + 1)
        theta = np.arange(size) / size
        bound = (2.0 * np.pi) ** smoothness * float(special.zeta(gamma - smoothness))
        for index, n in enumerate(maps):
            c_norm = max(float(np.max(np.abs(n(theta, k)))) for k in range(smoothness + 1))
            yield c_norm / (bound * n.norm), f"map {index}"

    checks = []
    for name, ratios in (
        ("cyclic-sum decay", cyclic_ratios()),
        ("product estimate", product_ratios()),
        (f"C^{smoothness} embedding", smoothness_ratios()),
    ):
        ratio, witness, count = worst(ratios)
        checks.append(BoundCheck(name=name, worst_ratio=ratio, instances=count, witness=witness))
        if ratio > 1.0 + 1e-12:
            logger.warning("%s violated: ratio %.6g at %s", name, ratio, witness)
    return checks
