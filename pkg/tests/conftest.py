"""Shared fixtures.

The compiled kernels are loaded from the on-disk cache on first use, which
costs noticeable wall time.  The session-scoped warm-up below touches every
kernel entry point once so that tests asserting runtimes measure the actual
computation.
"""
import numpy as np
import pytest
from hypothesis import settings

from homoglab import (CellParams, ExponentField, FluxOperator, Grid,
                      TableParams, WeightField, solve_corrector,
                      solve_dirichlet, solve_obstacle, tabulate)

settings.register_profile("suite", deadline=None, max_examples=40,
                          derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    lin = FluxOperator("weighted_p", exponent=ExponentField(base=2.0),
                       gamma=WeightField("sinusoidal", base=2.0,
                                         amplitude=0.5))
    pxo = FluxOperator("px_laplace",
                       exponent=ExponentField("sinusoidal", base=2.0,
                                              amplitude=0.3))
    solve_obstacle(lin, Grid(1, 16), -4.0, -0.1)
    solve_obstacle(pxo, Grid(2, 8), -4.0, -0.1)
    solve_dirichlet(pxo, Grid(1, 16), 1.0)
    solve_corrector(lin, 0.5, CellParams(n_cell=16))
    solve_corrector(lin, np.array([0.5, -0.25]), CellParams(n_cell=8))
    t1 = tabulate(lin, TableParams(xi_max=4.0, n_samples=9,
                                   cell=CellParams(n_cell=16)))
    solve_obstacle(t1, Grid(1, 16), -4.0, -0.1)
    t2 = tabulate(lin, TableParams(xi_max=4.0, n_radii=4, n_angles=4,
                                   cell=CellParams(n_cell=8)), dim=2)
    solve_obstacle(t2, Grid(2, 8), -4.0, -0.1)


@pytest.fixture(scope="session")
def configs_dir():
    import pathlib
    return pathlib.Path(__file__).resolve().parent.parent / "configs"
