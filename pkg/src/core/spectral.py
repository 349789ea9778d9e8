"""
Trigonometric interpolation of periodic sample tables.

A TrigSeries stores the one-sided Fourier coefficients of a real periodic
function and evaluates it, or any of its derivatives, on the sampling grid
(through the inverse FFT) or at arbitrary points (through direct summation).
"""

from typing import Optional, Tuple

import numpy as np
from scipy import fft

_EVAL_CHUNK = 1024


class TrigSeries:
    """
    Real trigonometric polynomial with period `period`.

    f(x) = Re( sum_m w_m c_m exp(i omega m x) ), with w_0 = 1, w_m = 2 and
    omega = 2 pi / period.
    """

    def __init__(self, coefficients: np.ndarray, period: float):
        self.coefficients = np.asarray(coefficients, dtype=complex)
        self.period = float(period)
        self.omega = 2.0 * np.pi / self.period
        self._weights = np.full(self.coefficients.shape, 2.0)
        self._weights[0] = 1.0

    @classmethod
    def from_samples(
        cls,
        samples: np.ndarray,
        period: float,
        chop_factor: Optional[float] = 64.0,
    ) -> "TrigSeries":
        """
        Interpolate an equispaced periodic table.

        Args:
            samples: Values at x_k = k * period / M, k = 0..M-1
            period: Period of the function
            chop_factor: Modes past the last one above chop_factor * eps * max|c|
                are dropped; None keeps every mode

        Returns:
            The interpolating series (Nyquist mode discarded)
        """
        samples = np.asarray(samples, dtype=float)
        size = samples.shape[0]
        coefficients = fft.rfft(samples) / size
        if size % 2 == 0:
            coefficients = coefficients[: size // 2]
        if chop_factor is not None:
            magnitude = np.abs(coefficients)
            threshold = chop_factor * np.finfo(float).eps * magnitude.max()
            significant = np.nonzero(magnitude > threshold)[0]
            last = significant[-1] if significant.size else 0
            coefficients = coefficients[: last + 1]
        return cls(coefficients, period)

    @property
    def modes(self) -> int:
        """Highest retained harmonic."""
        return self.coefficients.shape[0] - 1

    @property
    def mean(self) -> float:
        return float(self.coefficients[0].real)

    def _scaled(self, order: int) -> np.ndarray:
        if order == 0:
            return self.coefficients
        m = np.arange(self.coefficients.shape[0])
        return self.coefficients * (1j * self.omega * m) ** order

    def derivative(self, order: int = 1) -> "TrigSeries":
        """Series of the order-th derivative."""
        return TrigSeries(self._scaled(order), self.period)

    def antiderivative(self) -> Tuple[float, "TrigSeries"]:
        """
        Split the antiderivative into a linear and a periodic part.

        Returns:
            (slope, periodic) with F(x) = slope * x + periodic(x) and the
            periodic part of zero mean
        """
        m = np.arange(self.coefficients.shape[0])
        periodic = np.zeros_like(self.coefficients)
        periodic[1:] = self.coefficients[1:] / (1j * self.omega * m[1:])
        return self.mean, TrigSeries(periodic, self.period)

    def __call__(self, x, order: int = 0) -> np.ndarray:
        """Evaluate the order-th derivative at arbitrary points."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        weighted = self._weights * self._scaled(order)
        m = np.arange(self.coefficients.shape[0])
        out = np.empty(flat.shape[0])
        for start in range(0, flat.shape[0], _EVAL_CHUNK):
            chunk = flat[start:start + _EVAL_CHUNK]
            phase = np.exp(1j * self.omega * np.outer(chunk, m))
            out[start:start + _EVAL_CHUNK] = (phase @ weighted).real
        return out.reshape(x.shape)

    def on_grid(self, size: int, order: int = 0) -> np.ndarray:
        """Evaluate the order-th derivative on x_k = k * period / size."""
        if size < 2 * self.coefficients.shape[0] - 1:
            raise ValueError(
                f"grid of {size} points cannot resolve {self.modes} harmonics"
            )
        padded = np.zeros(size // 2 + 1, dtype=complex)
        padded[: self.coefficients.shape[0]] = self._scaled(order)
        return fft.irfft(padded * size, n=size)

    def grid(self, size: int) -> np.ndarray:
        return np.arange(size) * (self.period / size)
