"""Obstacle and Dirichlet solves against independent discrete solutions.

The linear cases are cross-checked by assembling the same face-weighted
stencil with numpy and solving directly; the nonlinear case uses the 1D
first-integral closed form.  Contact handling is checked bitwise: projection
makes active nodes exactly equal to the obstacle.
"""
import numpy as np
import pytest

from homoglab import (ExponentField, FluxOperator, Grid, ScalarField,
                      SolverParams, WeightField, apply_operator, certify_kkt,
                      coincidence, gradient, solve_dirichlet, solve_obstacle,
                      tabulate, TableParams, CellParams)
from homoglab.vi_solver import auto_relaxation, default_tol_kkt


def _gamma(x):
    return 2.0 + np.sin(2 * np.pi * 3 * x)


def _tridiag_solve(n, gamma, f_nodes):
    """Direct solve of the face-weighted three-point scheme on (0,1)."""
    h = 1.0 / n
    faces = (np.arange(n) + 0.5) * h
    w = gamma(np.mod(faces, 1.0))
    A = np.zeros((n - 1, n - 1))
    for i in range(n - 1):
        A[i, i] = (w[i] + w[i + 1]) / h ** 2
        if i > 0:
            A[i, i - 1] = -w[i] / h ** 2
        if i < n - 2:
            A[i, i + 1] = -w[i + 1] / h ** 2
    return np.linalg.solve(A, f_nodes[1:-1])


def test_linear_dirichlet_matches_direct_tridiagonal_solve():
    n = 64
    g = Grid(1, n)
    rng = np.random.default_rng(2)
    f = rng.normal(size=n + 1) * 10.0
    op = FluxOperator("weighted_p", exponent=ExponentField(base=2.0),
                      gamma=WeightField("sinusoidal", base=2.0, amplitude=1.0,
                                        periods=3))
    sol = solve_dirichlet(op, g, f)
    ref = _tridiag_solve(n, _gamma, f)
    assert sol.converged
    np.testing.assert_allclose(sol.u.values[1:-1], ref, atol=5e-8)


def test_linear_dirichlet_parabola_is_nodally_exact():
    g = Grid(1, 128)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    sol = solve_dirichlet(op, g, -16.0)
    x = g.node_points()
    np.testing.assert_allclose(sol.u.values, -8.0 * x * (1.0 - x), atol=2e-7)


def test_two_dim_dirichlet_matches_dense_five_point_solve():
    n = 12
    g = Grid(2, n)
    h = g.h
    rng = np.random.default_rng(4)
    f = rng.normal(size=(n + 1, n + 1)) * 4.0
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    sol = solve_dirichlet(op, g, f)

    m = n - 1
    idx = lambda i, j: (i - 1) * m + (j - 1)
    A = np.zeros((m * m, m * m))
    b = np.zeros(m * m)
    for i in range(1, n):
        for j in range(1, n):
            k = idx(i, j)
            A[k, k] = 4.0 / h ** 2
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 1 <= ii <= n - 1 and 1 <= jj <= n - 1:
                    A[k, idx(ii, jj)] = -1.0 / h ** 2
            b[k] = f[i, j]
    ref = np.linalg.solve(A, b).reshape(m, m)
    assert sol.converged
    np.testing.assert_allclose(sol.u.values[1:-1, 1:-1], ref, atol=5e-8)


def test_nonlinear_dirichlet_first_integral_closed_form():
    # -(|u'|u')' = -16 on (0,1):  u' = sign(x-1/2) 4 sqrt|x-1/2|
    def u_ref(x):
        s = np.abs(x - 0.5)
        return (8.0 / 3.0) * (s ** 1.5 - 0.5 ** 1.5)

    op = FluxOperator("px_laplace", exponent=ExponentField(base=3.0))
    errs = {}
    for n in (128, 512):
        g = Grid(1, n)
        sol = solve_dirichlet(op, g, -16.0)
        assert sol.converged
        errs[n] = float(np.max(np.abs(sol.u.values - u_ref(g.node_points()))))
    assert errs[128] <= 5e-4
    assert errs[512] <= 6e-5
    assert errs[512] < errs[128] / 4.0  # at least the h^{3/2} trend


def test_obstacle_solution_clears_certificate_and_touches_bitwise():
    g = Grid(1, 256)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    sol = solve_obstacle(op, g, -16.0, -1.0)
    assert sol.converged and sol.kkt.passed
    u = sol.u.values
    assert sol.kkt.max_constraint_violation == 0.0
    active = u <= -1.0
    assert np.count_nonzero(active) > 0
    np.testing.assert_array_equal(u[active], -1.0)
    assert np.all(u >= -1.0)


def test_obstacle_monotone_in_the_obstacle():
    g = Grid(1, 200)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    lo = solve_obstacle(op, g, -16.0, -1.0)
    hi = solve_obstacle(op, g, -16.0, -0.5)
    assert np.all(hi.u.values >= lo.u.values - 1e-9)


def test_unconstrained_limit_matches_dirichlet_solve():
    g = Grid(1, 128)
    op = FluxOperator("weighted_px",
                      exponent=ExponentField("sinusoidal", base=2.0,
                                             amplitude=0.3),
                      gamma=WeightField("sinusoidal", base=1.5, amplitude=0.4))
    free = solve_dirichlet(op, g, 6.0)
    low = solve_obstacle(op, g, 6.0, -1e6)
    np.testing.assert_allclose(low.u.values, free.u.values, atol=1e-7)


def test_obstacle_never_touched_when_unconstrained_minimum_clears_it():
    # f = -4 with psi = -1: the free parabola 2x(x-1) bottoms out at -1/2
    g = Grid(1, 512)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    sol = solve_obstacle(op, g, -4.0, -1.0)
    assert sol.converged and sol.kkt.passed
    x = g.node_points()
    np.testing.assert_allclose(sol.u.values, 2.0 * x * (x - 1.0), atol=1e-7)
    assert coincidence(sol.u, -1.0, tol_kkt=sol.kkt.tol).measure == 0.0


def test_nonzero_boundary_data_and_compatibility_check():
    g = Grid(1, 64)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    x = g.node_points()
    gb = 1.0 + 0.5 * x
    sol = solve_dirichlet(op, g, 0.0, g=gb)
    # harmonic in 1D with p=2: linear interpolation of the boundary data
    np.testing.assert_allclose(sol.u.values, gb, atol=1e-8)
    with pytest.raises(ValueError):
        solve_obstacle(op, g, 0.0, 2.0, g=0.0)  # obstacle above the boundary


def test_callable_and_field_inputs_agree():
    g = Grid(1, 64)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    f_call = lambda x: -10.0 * np.ones_like(x)
    sol_a = solve_obstacle(op, g, f_call, -0.4)
    sol_b = solve_obstacle(op, g, np.full(65, -10.0), -0.4)
    sol_c = solve_obstacle(op, g, ScalarField(g, np.full(65, -10.0)), -0.4)
    np.testing.assert_array_equal(sol_a.u.values, sol_b.u.values)
    np.testing.assert_array_equal(sol_a.u.values, sol_c.u.values)


def test_certificate_flags_planted_violations():
    g = Grid(1, 16)
    u = np.zeros(17)
    psi = np.full(17, -1.0)
    good = certify_kkt(u, psi, np.zeros(15), 1e-8)
    assert good.passed
    bad_res = certify_kkt(u, psi, np.full(15, -1e-3), 1e-8)
    assert not bad_res.passed and bad_res.max_negative_residual >= 1e-3
    # positive residual away from contact violates complementarity
    u2 = np.zeros(17)
    u2[1:-1] = 1.0  # slack 2 at interior nodes
    bad_comp = certify_kkt(u2, psi, np.full(15, 0.5), 1e-8)
    assert not bad_comp.passed and bad_comp.max_complementarity > 0.0
    # admissibility violations are reported exactly
    u3 = np.zeros(17)
    u3[5] = -1.5
    viol = certify_kkt(u3, psi, np.zeros(15), 1e-8)
    assert viol.max_constraint_violation == pytest.approx(0.5)
    assert not viol.passed


def test_gradient_peak_tracks_final_gradient():
    g = Grid(1, 128)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    sol = solve_dirichlet(op, g, -16.0)
    gmax = float(np.max(np.abs(gradient(sol.u).component(0))))
    assert sol.xi_peak >= gmax - 1e-12


def test_auto_relaxation_formula():
    g = Grid(1, 100)
    assert auto_relaxation(g) == pytest.approx(
        2.0 / (1.0 + np.sin(np.pi / 100)))
    g2 = Grid(2, 64, length=2.0)
    assert auto_relaxation(g2) == pytest.approx(
        2.0 / (1.0 + np.sin(np.pi * g2.h / 2.0)))


def test_tabulated_flux_reproduces_operator_solve_in_the_linear_case():
    # for a constant-coefficient linear operator the table is exact, so the
    # table-driven solve must match the direct one
    op = FluxOperator("weighted_p", exponent=ExponentField(base=2.0),
                      gamma=WeightField(base=0.7))
    table = tabulate(op, TableParams(xi_max=20.0, n_samples=17,
                                     cell=CellParams(n_cell=32)))
    g = Grid(1, 128)
    direct = solve_obstacle(op, g, -12.0, -0.6)
    tabbed = solve_obstacle(table, g, -12.0, -0.6)
    assert direct.converged and tabbed.converged
    np.testing.assert_allclose(tabbed.u.values, direct.u.values, atol=1e-6)


def test_apply_operator_is_the_residual_building_block():
    g = Grid(1, 64)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    x = g.node_points()
    u = ScalarField(g, np.sin(np.pi * x))
    au = apply_operator(op, g, u)
    # p = 2: A u = -u'' with the standard 3-point stencil
    ref = -(np.sin(np.pi * x[2:]) - 2 * np.sin(np.pi * x[1:-1])
            + np.sin(np.pi * x[:-2])) / g.h ** 2
    np.testing.assert_allclose(au, ref, rtol=1e-10, atol=1e-12)


def test_default_tolerance_scales_with_data_and_domain():
    g = Grid(1, 64)
    t1 = default_tol_kkt(g, np.full(65, 1.0))
    t2 = default_tol_kkt(g, np.full(65, 99.0))
    assert t2 > t1
    g_big = Grid(1, 64, length=3.0)
    assert default_tol_kkt(g_big, np.full(65, 1.0)) > t1


def test_max_sweeps_cap_reports_nonconvergence():
    g = Grid(1, 512)
    op = FluxOperator("px_laplace", exponent=ExponentField(base=2.0))
    sol = solve_obstacle(op, g, -16.0, -1.0,
                         params=SolverParams(max_sweeps=8))
    assert not sol.converged
    assert sol.sweeps <= 8
