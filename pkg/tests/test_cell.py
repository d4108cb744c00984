"""Cell problems, homogenized tables, and their closed-form pins.

Closed forms used here:
  - weighted_p, p=2, gamma = 1/(2 + sin 2 pi y): a0(xi) = xi/2 (harmonic
    mean) and v(y; xi) = -xi cos(2 pi y) / (4 pi).
  - weighted_p, p=3, piecewise gamma in {1, 4}: the first integral gives
    a0(xi) = (mean gamma^{-1/2})^{-2} |xi| xi = (16/9)|xi| xi and the
    potential h(xi) = (1/4) a0(xi)^{3/2} for xi > 0.
  - 2D laminate gamma(y0), p=2: harmonic mean along e0, arithmetic mean
    along e1, computed here by quadrature rather than hardcoded.
"""
import numpy as np
import pytest

from homoglab import (CellParams, ExponentField, FluxOperator, TableParams,
                      WeightField, eval_flux, export_table, homogenized_density,
                      homogenized_flux, load_table, solve_corrector,
                      table_diagnostics, table_digest, tabulate)


HARMONIC = FluxOperator("weighted_p", exponent=ExponentField(base=2.0),
                        gamma=WeightField("inverse_sinusoidal", base=2.0,
                                          amplitude=1.0))

PIECEWISE3 = FluxOperator("weighted_p", exponent=ExponentField(base=3.0),
                          gamma=WeightField("piecewise", base=2.5,
                                            amplitude=1.5))


def test_harmonic_mean_flux_and_corrector_profile():
    xi = 1.7
    cs = solve_corrector(HARMONIC, xi, CellParams(n_cell=256))
    assert cs.converged
    assert cs.flux_avg[0] == pytest.approx(xi / 2.0, abs=1e-12)
    y = cs.grid.node_points()
    v_ref = -xi * np.cos(2.0 * np.pi * y) / (4.0 * np.pi)
    np.testing.assert_allclose(cs.v.values, v_ref, atol=2e-5)
    assert abs(np.mean(cs.v.values)) < 1e-14


def test_piecewise_first_integral_closed_form():
    for xi in (0.6, 1.2, -2.0):
        a0 = homogenized_flux(PIECEWISE3, xi, CellParams(n_cell=64))[0]
        assert a0 == pytest.approx((16.0 / 9.0) * abs(xi) * xi, rel=1e-10)
    h = homogenized_density(PIECEWISE3, 1.2, CellParams(n_cell=64))
    c = (16.0 / 9.0) * 1.2 ** 2
    assert h == pytest.approx(0.25 * c ** 1.5, rel=1e-10)


def test_identity_cell_problem_all_families():
    ops = [
        FluxOperator("px_laplace", exponent=ExponentField(base=2.6)),
        FluxOperator("weighted_p", exponent=ExponentField(base=3.0),
                     gamma=WeightField(base=1.7)),
        FluxOperator("weighted_px", exponent=ExponentField(base=1.8),
                     gamma=WeightField(base=0.9)),
        FluxOperator("log_type", exponent=ExponentField(base=2.2),
                     gamma1=WeightField(base=1.3), gamma2=WeightField(base=2.0),
                     gamma3=WeightField(base=1.5)),
    ]
    for op in ops:
        cs = solve_corrector(op, -1.4, CellParams(n_cell=64))
        ref = eval_flux(op, np.zeros((1, 1)), np.array([[-1.4]]), dim=1)[0, 0]
        assert cs.converged
        assert cs.flux_avg[0] == pytest.approx(ref, abs=1e-12)
        assert np.max(np.abs(cs.v.values)) <= 1e-12

        xi2 = np.array([0.8, -1.1])
        cs2 = solve_corrector(op, xi2, CellParams(n_cell=16))
        ref2 = eval_flux(op, np.zeros((1, 2)), xi2[None, :], dim=2)[0]
        assert cs2.converged
        np.testing.assert_allclose(cs2.flux_avg, ref2, atol=1e-12)
        assert np.max(np.abs(cs2.v.values)) <= 1e-12


def test_two_dim_laminate_has_harmonic_and_arithmetic_means():
    lam = FluxOperator("weighted_p", exponent=ExponentField(base=2.0),
                       gamma=WeightField("inverse_sinusoidal", base=2.0,
                                         amplitude=1.0, axis=0))
    # quadrature oracles on the periodic cell (trapezoid is spectrally exact)
    y = np.linspace(0.0, 1.0, 4096, endpoint=False)
    gam = 1.0 / (2.0 + np.sin(2.0 * np.pi * y))
    harm = 1.0 / np.mean(1.0 / gam)
    arith = np.mean(gam)
    prm = CellParams(n_cell=64)

    c0 = solve_corrector(lam, np.array([1.0, 0.0]), prm)
    assert c0.converged
    np.testing.assert_allclose(c0.flux_avg, [harm, 0.0], atol=1e-9)

    c1 = solve_corrector(lam, np.array([0.0, 1.0]), prm)
    assert c1.converged
    np.testing.assert_allclose(c1.flux_avg, [0.0, arith], atol=1e-9)

    mixed = np.array([0.3, -0.8])
    cm = solve_corrector(lam, mixed, prm)
    np.testing.assert_allclose(cm.flux_avg, [harm * 0.3, -arith * 0.8],
                               atol=1e-8)


def test_corrector_is_odd_in_xi():
    cs_p = solve_corrector(HARMONIC, 2.0, CellParams(n_cell=128))
    cs_n = solve_corrector(HARMONIC, -2.0, CellParams(n_cell=128))
    np.testing.assert_allclose(cs_n.v.values, -cs_p.v.values, atol=1e-12)
    assert cs_n.flux_avg[0] == pytest.approx(-cs_p.flux_avg[0], abs=1e-12)

    op = FluxOperator("weighted_px",
                      exponent=ExponentField("sinusoidal", base=2.0,
                                             amplitude=0.3),
                      gamma=WeightField("sinusoidal", base=1.5,
                                        amplitude=0.4))
    xi = np.array([0.7, 0.4])
    a_p = solve_corrector(op, xi, CellParams(n_cell=16)).flux_avg
    a_n = solve_corrector(op, -xi, CellParams(n_cell=16)).flux_avg
    np.testing.assert_allclose(a_n, -a_p, atol=1e-9)


def test_corrector_warm_start_consistency():
    cold = solve_corrector(HARMONIC, 3.0, CellParams(n_cell=128))
    warm = solve_corrector(HARMONIC, 3.0, CellParams(n_cell=128),
                           v0=cold.v.values)
    np.testing.assert_allclose(warm.v.values, cold.v.values, atol=1e-12)


def test_zero_gradient_gives_zero_flux_and_corrector():
    cs = solve_corrector(HARMONIC, 0.0, CellParams(n_cell=32))
    assert cs.flux_avg[0] == 0.0
    assert np.max(np.abs(cs.v.values)) == 0.0


def test_log_type_has_no_potential():
    op = FluxOperator("log_type", exponent=ExponentField(base=2.0),
                      gamma1=WeightField(base=1.0),
                      gamma2=WeightField(base=1.0),
                      gamma3=WeightField(base=2.0))
    with pytest.raises(ValueError):
        homogenized_density(op, 1.0)
    t = tabulate(op, TableParams(xi_max=4.0, n_samples=9,
                                 cell=CellParams(n_cell=32)))
    assert np.all(np.isnan(t.h_samples[1:]))
    assert not table_diagnostics(t).has_density


def test_table_interpolates_its_own_samples_exactly():
    t = tabulate(HARMONIC, TableParams(xi_max=6.0, n_samples=13,
                                       cell=CellParams(n_cell=64)))
    got = t.evaluate(t.xi_samples[:, None])
    np.testing.assert_allclose(got[:, 0], t.a0_samples, rtol=1e-14)
    # odd extension and zero at zero
    np.testing.assert_allclose(t.evaluate(-t.xi_samples[:, None])[:, 0],
                               -t.a0_samples, rtol=1e-14)
    assert t.evaluate(np.zeros((1, 1)))[0, 0] == 0.0
    # beyond the last sample the final slope persists
    top, prev = t.xi_samples[-1], t.xi_samples[-2]
    slope = (t.a0_samples[-1] - t.a0_samples[-2]) / (top - prev)
    want = t.a0_samples[-1] + slope * 1.5
    assert t.evaluate(np.array([[top + 1.5]]))[0, 0] == pytest.approx(
        want, rel=1e-12)


def test_table_matches_cell_solves_between_samples():
    t = tabulate(HARMONIC, TableParams(xi_max=6.0, n_samples=25,
                                       cell=CellParams(n_cell=64)))
    for xi in (0.37, 2.71, 5.5):
        direct = homogenized_flux(HARMONIC, xi, CellParams(n_cell=64))[0]
        assert t.evaluate(np.array([[xi]]))[0, 0] == pytest.approx(
            direct, rel=5e-4)


def test_two_dim_table_reproduces_stored_polar_samples():
    lam = FluxOperator("weighted_p", exponent=ExponentField(base=2.0),
                       gamma=WeightField("inverse_sinusoidal", base=2.0,
                                         amplitude=1.0, axis=0))
    t = tabulate(lam, TableParams(xi_max=4.0, n_radii=6, n_angles=8,
                                  cell=CellParams(n_cell=16)), dim=2)
    pts = (t.radii[:, None, None]
           * np.stack([np.cos(t.thetas), np.sin(t.thetas)], axis=-1)[None])
    got = t.evaluate(pts.reshape(-1, 2))
    np.testing.assert_allclose(got, t.a0_polar.reshape(-1, 2),
                               rtol=1e-10, atol=1e-12)
    assert np.all(t.evaluate(np.zeros((1, 2))) == 0.0)


def test_table_round_trip_and_digest(tmp_path):
    t = tabulate(PIECEWISE3, TableParams(xi_max=3.0, n_samples=9,
                                         cell=CellParams(n_cell=32)))
    path = tmp_path / "t.homogtable"
    export_table(t, path)
    back = load_table(path)
    np.testing.assert_array_equal(back.xi_samples, t.xi_samples)
    np.testing.assert_array_equal(back.a0_samples, t.a0_samples)
    np.testing.assert_array_equal(back.h_samples, t.h_samples)
    assert back.meta["family"] == "weighted_p"
    assert table_digest(back) == table_digest(t)
    # re-export is byte-identical
    p2 = tmp_path / "t2.homogtable"
    export_table(back, p2)
    assert p2.read_bytes() == path.read_bytes()


def test_tampered_table_file_is_rejected(tmp_path):
    t = tabulate(HARMONIC, TableParams(xi_max=2.0, n_samples=9,
                                       cell=CellParams(n_cell=16)))
    path = tmp_path / "t.homogtable"
    export_table(t, path)
    text = path.read_text()
    lines = text.splitlines()
    k = next(i for i, ln in enumerate(lines) if ln.startswith("data")) + 2
    val = lines[k].split()
    val[1] = repr(float(val[1]) * 1.000001)
    lines[k] = " ".join(val)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        load_table(path)


def test_diagnostics_on_a_smooth_power_table():
    t = tabulate(PIECEWISE3, TableParams(xi_max=4.0, n_samples=17,
                                         cell=CellParams(n_cell=64)))
    d = table_diagnostics(t)
    assert d.monotonicity_min > 0.0
    assert d.convexity_margin_min >= -1e-8
    assert d.c_lower > 0.0 and d.c_upper > 0.0
    assert np.isfinite(d.delta2_max)
    assert d.has_density
    # h' = a0 for the exact power law; the sampled gap is pure central
    # difference truncation, h''' d^2 / 6 with d = 0.25 here
    coef = 0.25 * (16.0 / 9.0) ** 1.5
    assert d.grad_h_gap_max <= 1.5 * coef * 0.25 ** 2


def test_diagnostics_gap_shrinks_with_sample_spacing():
    coarse = table_diagnostics(tabulate(PIECEWISE3, TableParams(
        xi_max=4.0, n_samples=17, cell=CellParams(n_cell=64))))
    fine = table_diagnostics(tabulate(PIECEWISE3, TableParams(
        xi_max=4.0, n_samples=65, cell=CellParams(n_cell=64))))
    assert fine.grad_h_gap_max < 0.3 * coarse.grad_h_gap_max


def test_table_params_validation():
    with pytest.raises(ValueError):
        TableParams(xi_max=-1.0)
    with pytest.raises(ValueError):
        TableParams(n_samples=4)
    with pytest.raises(TypeError):
        tabulate(tabulate(HARMONIC, TableParams(xi_max=2.0, n_samples=9,
                                                cell=CellParams(n_cell=16))))


def test_nonlinear_two_dim_corrector_converges_with_certificate():
    op = FluxOperator("weighted_px",
                      exponent=ExponentField("sinusoidal", base=2.0,
                                             amplitude=0.4),
                      gamma=WeightField("sinusoidal", base=2.0, amplitude=0.9,
                                        periods=2))
    cs = solve_corrector(op, np.array([1.0, 0.5]), CellParams(n_cell=32))
    assert cs.converged
    assert cs.residual_norm <= 1e-8
    assert abs(float(np.mean(cs.v.values))) < 1e-13
