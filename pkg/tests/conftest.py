"""Shared fixtures: dispersions, grids, and kernel tables reused across tests.

Kernel tables are session-scoped because enumeration cost grows like n^3;
everything here is immutable (frozen dataclasses, read-only arrays), so
sharing across tests is safe.
"""

import numpy as np
import pytest

from wavekin.collision_kernel import KernelWeights
from wavekin.dispersion import DispersionRelation
from wavekin.solver import OmegaGrid, SpectrumState, build_kernel_table


@pytest.fixture(scope="session")
def d_quad() -> DispersionRelation:
    return DispersionRelation.power_law(2.0)


@pytest.fixture(scope="session")
def d_mid() -> DispersionRelation:
    return DispersionRelation.power_law(1.5)


@pytest.fixture(scope="session")
def grid8_quad(d_quad) -> OmegaGrid:
    # h = 1 exactly: omega = 0..7
    return OmegaGrid(d_quad, 8, 7.0)


@pytest.fixture(scope="session")
def grid8_mid(d_mid) -> OmegaGrid:
    return OmegaGrid(d_mid, 8, 7.0)


@pytest.fixture(scope="session")
def table8_quad(d_quad, grid8_quad):
    return build_kernel_table(KernelWeights(), d_quad, grid8_quad)


@pytest.fixture(scope="session")
def table8_mid(d_mid, grid8_mid):
    return build_kernel_table(KernelWeights(), d_mid, grid8_mid)


@pytest.fixture(scope="session")
def grid32_quad(d_quad) -> OmegaGrid:
    return OmegaGrid(d_quad, 32, 4.0)


@pytest.fixture(scope="session")
def table32_quad(d_quad, grid32_quad):
    return build_kernel_table(KernelWeights(), d_quad, grid32_quad)


def random_state(grid: OmegaGrid, rng: np.random.Generator) -> SpectrumState:
    """Strictly positive random state away from the origin node."""
    g = rng.uniform(0.1, 2.0, size=grid.n_nodes)
    g[0] = 0.0
    return SpectrumState(g=g, time=0.0, grid=grid)
