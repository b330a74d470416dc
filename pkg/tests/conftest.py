import numpy as np
import pytest

from psinehari import (
    Field,
    GridSpec,
    ProblemParams,
    build_operator_set,
)


def make_params(grid: GridSpec, **overrides) -> ProblemParams:
    base = dict(
        alpha=0.8,
        beta=0.5,
        p=1.5,
        q=2.0,
        r=2.4,
        gamma=0.5,
        lam=1e-3,
        T=grid.T,
        a_field=Field.constant(1.0, grid),
        mu_field=Field.constant(0.5, grid),
    )
    base.update(overrides)
    return ProblemParams(**base)


def sine_bump(grid: GridSpec) -> Field:
    x = grid.nodes
    if grid.d == 1:
        vals = np.sin(np.pi * x / grid.T)
    else:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        vals = np.sin(np.pi * xx / grid.T) * np.sin(np.pi * yy / grid.T)
    vals[grid.boundary_mask()] = 0.0
    return Field(vals, grid)


@pytest.fixture(scope="session")
def grid2():
    return GridSpec(1.0, 33, 2)


@pytest.fixture(scope="session")
def params2(grid2):
    return make_params(grid2)


@pytest.fixture(scope="session")
def ops2(params2, grid2):
    return build_operator_set(params2, grid2)


@pytest.fixture(scope="session")
def bump2(grid2):
    return sine_bump(grid2)


@pytest.fixture(scope="session")
def grid1():
    return GridSpec(1.0, 33, 1)


@pytest.fixture(scope="session")
def params1(grid1):
    return make_params(grid1)


@pytest.fixture(scope="session")
def ops1(params1, grid1):
    return build_operator_set(params1, grid1)


@pytest.fixture(scope="session")
def bump1(grid1):
    return sine_bump(grid1)
