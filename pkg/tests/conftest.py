"""Shared domains for the test suite."""

import pytest

from src.config.settings import GeometrySettings, Settings
from src.core.curve_geometry import ConvexDomainSpec, Harmonic, build_domain

GRID = 1024


def make_spec(a: float = 1.0, b: float = 1.0, grid: int = GRID, **harmonics: float) -> ConvexDomainSpec:
    """Spec from keyword harmonics such as j4=0.01."""
    perturbation = tuple(Harmonic(j=int(k[1:]), delta=v) for k, v in sorted(harmonics.items()))
    return ConvexDomainSpec(a=a, b=b, perturbation=perturbation, grid_size=grid)


@pytest.fixture(scope="session")
def settings():
    return Settings(geometry=GeometrySettings(grid_size=GRID))


@pytest.fixture(scope="session")
def circle(settings):
    return build_domain(make_spec(), settings)


@pytest.fixture(scope="session")
def ellipse(settings):
    return build_domain(make_spec(2.0, 0.5), settings)


@pytest.fixture(scope="session")
def bumpy(settings):
    """Ellipse-near domain with a fourth-harmonic bump."""
    return build_domain(make_spec(j4=0.01), settings)


@pytest.fixture(scope="session")
def wobbly(settings):
    return build_domain(make_spec(j3=0.01), settings)
