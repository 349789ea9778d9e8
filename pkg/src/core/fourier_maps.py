"""
Even Fourier maps and gamma-weighted sequences.

An even map n(theta) = sum_p c_p cos(2 pi p theta) on the unit period is
stored by its cosine coefficients; the operators of the rigidity module act
on these and produce sequences indexed by the period q.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.core.errors import ConsistencyError, DomainSpecError

DEFAULT_GAMMA = 3.5


def _weighted_sup(values: np.ndarray, gamma: float) -> float:
    """sup{ k^gamma |v_k| (k >= 1), |v_0| }."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    index = np.arange(values.size, dtype=float)
    weights = index ** gamma
    weights[0] = 1.0
    return float(np.max(weights * np.abs(values)))


@dataclass(frozen=True)
class EvenFourierMap:
    """Truncated even map with cosine coefficients c_0..c_N."""
    coefficients: np.ndarray
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if coefficients.size == 0:
            raise DomainSpecError("an even map needs at least the constant mode")
        object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def from_modes(
        cls,
        modes: Dict[int, float],
        size: Optional[int] = None,
        gamma: float = DEFAULT_GAMMA,
    ) -> "EvenFourierMap":
        """Map with the given {p: c_p} entries, zero elsewhere."""
        if any(p < 0 for p in modes):
            raise DomainSpecError(f"mode indices must be non-negative, got {sorted(modes)}")
        top = max(modes, default=0)
        size = top + 1 if size is None else size
        if size <= top:
            raise DomainSpecError(f"truncation {size - 1} drops mode {top}")
        coefficients = np.zeros(size)
        for p, value in modes.items():
            coefficients[p] = value
        return cls(coefficients, gamma)

    @classmethod
    def constant(cls, value: float = 1.0, size: int = 1, gamma: float = DEFAULT_GAMMA) -> "EvenFourierMap":
        return cls.from_modes({0: value}, size, gamma)

    @classmethod
    def random(cls, rng: np.random.Generator, modes: int, gamma: float = DEFAULT_GAMMA) -> "EvenFourierMap":
        """Random map with |c_p| <= p^-gamma, so its norm is at most 1."""
        coefficients = rng.uniform(-1.0, 1.0, modes + 1)
        coefficients[1:] *= np.arange(1, modes + 1, dtype=float) ** -gamma
        return cls(coefficients, gamma)

    @property
    def modes(self) -> int:
        return self.coefficients.size - 1

    @property
    def norm(self) -> float:
        return _weighted_sup(self.coefficients, self.gamma)

    def padded(self, size: int) -> np.ndarray:
        """Coefficients c_0..c_{size-1}, zero padded or truncated."""
        out = np.zeros(size)
        keep = min(size, self.coefficients.size)
        out[:keep] = self.coefficients[:keep]
        return out

    def __call__(self, theta, order: int = 0) -> np.ndarray:
        """order-th derivative in theta."""
        theta = np.asarray(theta, dtype=float)
        freq = 2.0 * np.pi * np.arange(self.coefficients.size)
        phase = np.multiply.outer(theta, freq) + 0.5 * np.pi * order
        values = np.cos(phase) @ (self.coefficients * freq ** order)
        return float(values) if np.ndim(values) == 0 else values

    def __mul__(self, other: "EvenFourierMap") -> "EvenFourierMap":
        """Pointwise product; cos a cos b = (cos(a + b) + cos(a - b)) / 2."""
        a, b = self.coefficients, other.coefficients
        out = np.convolve(a, b)
        lags = np.arange(-(b.size - 1), a.size)
        np.add.at(out, np.abs(lags), np.correlate(a, b, mode="full"))
        return EvenFourierMap(0.5 * out, self.gamma)


@dataclass(frozen=True)
class GammaSequence:
    """Truncated sequence u_0..u_Q in the weighted sup norm."""
    entries: np.ndarray
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float).reshape(-1))

    @property
    def rows(self) -> int:
        return self.entries.size - 1

    @property
    def norm(self) -> float:
        return _weighted_sup(self.entries, self.gamma)


def hgamma_norm(value: Union[EvenFourierMap, GammaSequence]) -> float:
    """Weighted sup norm of a map or a sequence."""
    return value.norm


def cyclic_sum(n: EvenFourierMap, q: int, tolerance: float = 1e-12) -> Tuple[float, float]:
    """
    Cyclic mean [n]_q and its mean-free part [n]_q - c_0.

    Computed by summing n over the q-th roots of the period and through the
    divisor identity sum_m c_{mq}; the two must agree.

    Raises:
        DomainSpecError: q < 1
        ConsistencyError: the two evaluations disagree
    """
    if q < 1:
        raise DomainSpecError(f"cyclic sums need q >= 1, got {q}")
    direct = float(np.mean(n(np.arange(q) / q)))
    divisor = float(np.sum(n.coefficients[::q]))
    scale = max(1.0, float(np.sum(np.abs(n.coefficients))))
    if abs(direct - divisor) > tolerance * scale:
        raise ConsistencyError(
            f"cyclic sum for q = {q}: direct {direct:.17g} vs divisor identity {divisor:.17g}"
        )
    return divisor, divisor - float(n.coefficients[0])


def ellipse_multiplier(q, curvature: float = 1.0) -> np.ndarray:
    """mu_q = 2 k_E^-1/2 q sin(2 pi / q)."""
    q = np.asarray(q, dtype=float)
    values = 2.0 * curvature ** -0.5 * q * np.sin(2.0 * np.pi / q)
    return float(values) if values.ndim == 0 else values
