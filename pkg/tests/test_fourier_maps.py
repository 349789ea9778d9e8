"""Tests for even Fourier maps, weighted sequences and cyclic sums."""

import numpy as np
import pytest

from src.core.errors import DomainSpecError
from src.core.fourier_maps import (
    EvenFourierMap,
    GammaSequence,
    cyclic_sum,
    ellipse_multiplier,
    hgamma_norm,
)


def test_from_modes_and_evaluation():
    n = EvenFourierMap.from_modes({0: 1.0, 2: 0.5})
    assert n.modes == 2
    theta = np.array([0.0, 0.125, 0.3])
    np.testing.assert_allclose(n(theta), 1.0 + 0.5 * np.cos(4.0 * np.pi * theta))
    np.testing.assert_allclose(n(theta, 1), -0.5 * 4.0 * np.pi * np.sin(4.0 * np.pi * theta), atol=1e-12)
    assert isinstance(n(0.25), float)


@pytest.mark.parametrize("modes, size", [({-1: 1.0}, None), ({5: 1.0}, 4)])
def test_from_modes_rejects(modes, size):
    with pytest.raises(DomainSpecError):
        EvenFourierMap.from_modes(modes, size)


def test_empty_map_rejected():
    with pytest.raises(DomainSpecError):
        EvenFourierMap(np.array([]))


def test_product_is_exact():
    first = EvenFourierMap.from_modes({1: 1.0})
    product = first * first
    np.testing.assert_allclose(product.coefficients, [0.5, 0.0, 0.5])
    other = EvenFourierMap.from_modes({0: 2.0, 3: 1.0})
    theta = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose((first * other)(theta), first(theta) * other(theta), atol=1e-12)


def test_product_of_random_maps_matches_samples():
    rng = np.random.default_rng(7)
    first = EvenFourierMap.random(rng, 9, 3.5)
    second = EvenFourierMap.random(rng, 4, 3.5)
    product = first * second
    assert product.modes == 13
    theta = np.linspace(0.0, 1.0, 29)
    np.testing.assert_allclose(product(theta), first(theta) * second(theta), atol=1e-12)


def test_padding():
    n = EvenFourierMap.from_modes({0: 1.0, 2: 3.0})
    np.testing.assert_allclose(n.padded(5), [1.0, 0.0, 3.0, 0.0, 0.0])
    np.testing.assert_allclose(n.padded(2), [1.0, 0.0])


def test_weighted_norms():
    n = EvenFourierMap([0.5, 0.0, 2.0 ** -3.5], 3.5)
    assert n.norm == pytest.approx(1.0)
    u = GammaSequence([3.0, 1.0], 3.5)
    assert u.rows == 1
    assert hgamma_norm(u) == pytest.approx(3.0)


def test_random_map_has_unit_norm_bound():
    rng = np.random.default_rng(3)
    for _ in range(20):
        assert EvenFourierMap.random(rng, 40).norm <= 1.0


@pytest.mark.parametrize("q", [1, 2, 3, 4, 7, 12])
def test_cyclic_sum_identity(q):
    n = EvenFourierMap.random(np.random.default_rng(q), 24)
    full, star = cyclic_sum(n, q)
    assert full == pytest.approx(float(np.sum(n.coefficients[::q])))
    assert star == pytest.approx(full - n.coefficients[0])


def test_cyclic_sum_rejects_zero():
    with pytest.raises(DomainSpecError):
        cyclic_sum(EvenFourierMap.constant(), 0)


def test_ellipse_multiplier():
    assert ellipse_multiplier(4) == pytest.approx(8.0)
    assert ellipse_multiplier(4, 4.0) == pytest.approx(4.0)
    values = ellipse_multiplier(np.array([3, 1000]))
    assert values[1] == pytest.approx(4.0 * np.pi, rel=1e-5)
