"""Cell problems and the homogenized operator.

For a 1-periodic monotone flux a(y, xi), the corrector at mean gradient xi
solves div a(y, xi + grad v) = 0 on the unit cell with periodic zero-mean v,
and the effective flux is a0(xi) = cell average of a(y, xi + grad v).

In 1D the flux of the corrector is a first integral: a(y, xi + v') = c for
a single constant c, so a0(xi) = c is found by inverting the scalar maps
a(y, .) at the cell midpoints and solving  mean_y a(y, .)^{-1}(c) = xi  for
c (the mean of inverses is strictly increasing in c).  In 2D the corrector
is computed by nonlinear SOR on a periodic grid, warm-started along rays.

`tabulate` samples a0 (and the effective density h when the family has a
potential) on a radial grid; the resulting HomogenizedOperatorTable is a
piecewise-linear interpolant that the obstacle solver accepts in place of a
pointwise flux.  Tables round-trip through a small versioned text format
with a content hash.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fields import FluxOperator
from .grid import Grid, ScalarField, gradient


@dataclass(frozen=True)
class CellParams:
    """Discretization and iteration knobs for corrector solves."""

    n_cell: int = 256
    max_sweeps: int = 60_000
    batch_sweeps: int = 256
    relaxation: float | str = "auto"
    tol_residual: float | None = None
    update_floor: float = 1e-17


@dataclass
class CorrectorSolution:
    xi: np.ndarray
    grid: Grid
    v: ScalarField
    flux_avg: np.ndarray
    h_value: float | None
    residual_norm: float
    converged: bool
    sweeps: int


def _require_operator(flux) -> None:
    if not isinstance(flux, FluxOperator):
        raise TypeError("cell problems take a microscale FluxOperator")


def _first_integral(mode, w, p, g2, g3, delta, xi, s_arr, c0=None):
    """Solve mean_k a_k^{-1}(c) = xi for c; returns c.

    s_arr holds the per-cell inverses and is used as a warm start; it is
    left at the solution slopes xi + v'.
    """
    if xi == 0.0:
        s_arr[:] = 0.0
        return 0.0

    def g(c):
        return kernels.mean_inverse_flux_1d(mode, w, p, g2, g3, delta, c,
                                            s_arr, 1e-15) - xi

    if c0 is None or c0 * xi <= 0.0:
        # arithmetic mean of the pointwise fluxes at slope xi
        fac = np.empty_like(w)
        for k in range(w.shape[0]):
            fac[k] = kernels._ascalar(mode, w[k], p[k], g2[k], g3[k],
                                      delta, xi)
        c0 = float(np.mean(fac))
    c = c0
    gc = g(c)
    tol = 1e-13 * (1.0 + abs(xi))
    if abs(gc) <= tol:
        return c
    d = 0.5 * abs(c) + 1e-30
    if gc > 0.0:
        hi, lo = c, c - d
        glo = g(lo)
        k = 0
        while glo > 0.0:
            hi, d = lo, d * 4.0
            lo = c - d
            glo = g(lo)
            k += 1
            if k > 300:
                raise RuntimeError("first-integral bracketing failed")
        a, b, ga, gb = lo, hi, glo, gc
    else:
        lo, hi = c, c + d
        ghi = g(hi)
        k = 0
        while ghi < 0.0:
            lo, d = hi, d * 4.0
            hi = c + d
            ghi = g(hi)
            k += 1
            if k > 300:
                raise RuntimeError("first-integral bracketing failed")
        a, b, ga, gb = lo, hi, gc, ghi
    best, best_g = b, abs(gb)
    if abs(ga) < best_g:
        best, best_g = a, abs(ga)
    for _ in range(200):
        if gb != ga:
            m = b - gb * (b - a) / (gb - ga)
        else:
            m = 0.5 * (a + b)
        if not (a < m < b):
            m = 0.5 * (a + b)
        gm = g(m)
        if abs(gm) < best_g:
            best, best_g = m, abs(gm)
        if gm > 0.0:
            b, gb = m, gm
        else:
            a, ga = m, gm
        if abs(gm) <= tol or b - a <= 1e-16 * (1.0 + abs(m)):
            break
    g(best)  # leave s_arr at the accepted constant
    return best


def _potential_cells(flux: FluxOperator, pts, grads, dim: int) -> np.ndarray:
    """Density w(x)/p(x) |xi|^p(x) of the power families at given points."""
    if not flux.has_potential:
        raise ValueError("log_type has no declared potential density")
    w, p, _, _ = flux.coefficients_at(pts, dim)
    if dim == 1:
        m = np.abs(grads)
    else:
        m = np.sqrt(np.sum(grads * grads, axis=-1))
    return w / p * m ** p


def _corrector_1d(flux: FluxOperator, xi: float,
                  params: CellParams) -> CorrectorSolution:
    grid = Grid(dim=1, n=params.n_cell, boundary="periodic")
    mid = grid.axis_midpoints()
    w, p, g2, g3 = flux.coefficients_at(mid, dim=1)
    mode = kernels._mode_for(flux)
    s = np.full(params.n_cell, float(xi))
    c = _first_integral(mode, np.ascontiguousarray(w), np.ascontiguousarray(p),
                        np.ascontiguousarray(g2), np.ascontiguousarray(g3),
                        flux.delta, float(xi), s)
    vprime = s - xi
    v = np.zeros(params.n_cell)
    v[1:] = np.cumsum(vprime[:-1]) * grid.h
    v -= v.mean()
    drift = abs(float(np.mean(s)) - xi)
    h_val = float(np.mean(_potential_cells(flux, mid, s, 1))) \
        if flux.has_potential else None
    return CorrectorSolution(xi=np.array([float(xi)]), grid=grid,
                             v=ScalarField(grid, v),
                             flux_avg=np.array([c]), h_value=h_val,
                             residual_norm=drift,
                             converged=drift <= 1e-11 * (1.0 + abs(xi)),
                             sweeps=0)


def _corrector_2d(flux: FluxOperator, xi, params: CellParams,
                  v0: np.ndarray | None = None) -> CorrectorSolution:
    grid = Grid(dim=2, n=params.n_cell, boundary="periodic")
    (mode, wx, px, g2x, g3x, wy, py, g2y, g3y, delta,
     *_rest) = kernels.face_data_2d(flux, grid, periodic=True)
    xi0, xi1 = float(xi[0]), float(xi[1])
    pts = grid.cell_points()
    xi_tile = np.broadcast_to(np.asarray(xi, dtype=float), pts.shape)
    a_xi = flux.eval(pts, xi_tile, dim=2)
    scale = 1.0 + float(np.max(np.sqrt(np.sum(a_xi * a_xi, axis=-1))))
    tol = params.tol_residual if params.tol_residual is not None \
        else 1e-9 * scale
    omega = 2.0 / (1.0 + math.sin(math.pi * grid.h)) \
        if params.relaxation == "auto" else float(params.relaxation)
    rtol_node = 0.02 * tol

    v = np.zeros((grid.n, grid.n)) if v0 is None \
        else np.array(v0, dtype=float)
    xi_scale = 1.0 + abs(xi0) + abs(xi1)
    floor = params.update_floor * xi_scale
    total = 0
    converged = False
    res_norm = np.inf
    snapshot = v.copy()
    history: list[float] = []
    polishing = False
    while total < params.max_sweeps:
        nswp = min(params.batch_sweeps, params.max_sweeps - total)
        upd, swept, ok = kernels.corrector_sweeps_2d(
            v, xi0, xi1, grid.h, mode, wx, px, g2x, g3x, wy, py, g2y, g3y,
            delta, omega, nswp, floor, rtol_node)
        total += int(swept)
        if ok == 0:
            v[:] = snapshot
            if omega - 1.0 < 1e-3:
                break
            omega = 1.0 + 0.5 * (omega - 1.0)
            continue
        snapshot = v.copy()
        r = kernels.corrector_residual_2d(v, xi0, xi1, grid.h, mode,
                                          wx, px, g2x, g3x,
                                          wy, py, g2y, g3y, delta)
        res_norm = float(np.max(np.abs(r)))
        if res_norm <= tol:
            converged = True
            break
        if upd <= floor:
            if polishing:
                break
            polishing = True
            omega = 1.0
            continue
        history.append(float(upd))
        stalled = (len(history) >= 16
                   and history[-1] > 0.5 * history[-16])
        if stalled and not polishing:
            polishing = True
            omega = 1.0
            history.clear()
    if not converged:
        r = kernels.corrector_residual_2d(v, xi0, xi1, grid.h, mode,
                                          wx, px, g2x, g3x,
                                          wy, py, g2y, g3y, delta)
        res_norm = float(np.max(np.abs(r)))
        converged = res_norm <= tol
    vf = ScalarField(grid, v)
    slopes = gradient(vf).values + np.asarray(xi, dtype=float)
    a_cells = flux.eval(pts, slopes, dim=2)
    flux_avg = a_cells.reshape(-1, 2).mean(axis=0)
    h_val = float(np.mean(_potential_cells(flux, pts, slopes, 2))) \
        if flux.has_potential else None
    return CorrectorSolution(xi=np.asarray(xi, dtype=float), grid=grid,
                             v=vf, flux_avg=flux_avg, h_value=h_val,
                             residual_norm=res_norm, converged=converged,
                             sweeps=total)


def solve_corrector(flux: FluxOperator, xi, params: CellParams | None = None,
                    v0: np.ndarray | None = None) -> CorrectorSolution:
    """Periodic corrector at mean gradient xi (scalar in 1D, pair in 2D)."""
    _require_operator(flux)
    params = params or CellParams()
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi_arr.shape == (1,):
        return _corrector_1d(flux, float(xi_arr[0]), params)
    if xi_arr.shape == (2,):
        return _corrector_2d(flux, xi_arr, params, v0=v0)
    raise ValueError("xi must be a scalar or a 2-vector")


def homogenized_flux(flux: FluxOperator, xi,
                     params: CellParams | None = None) -> np.ndarray:
    """Effective flux a0(xi) from a single corrector solve."""
    return solve_corrector(flux, xi, params).flux_avg


def homogenized_density(flux: FluxOperator, xi,
                        params: CellParams | None = None) -> float:
    """Effective density h(xi); defined for the potential families only."""
    _require_operator(flux)
    if not flux.has_potential:
        raise ValueError("log_type has no declared potential density; "
                         "only the effective flux is available")
    sol = solve_corrector(flux, xi, params)
    return float(sol.h_value)


# ------------------------------------------------------------------ tables

@dataclass(frozen=True)
class TableParams:
    """Sampling layout for homogenized-operator tables.

    1D tables sample xi in [0, xi_max] uniformly (odd extension at eval
    time); 2D tables sample log-spaced radii times a uniform angle grid.
    """

    xi_max: float = 8.0
    n_samples: int = 65
    n_radii: int = 24
    n_angles: int = 32
    r_min_factor: float = 1e-4
    cell: CellParams = field(default_factory=CellParams)

    def __post_init__(self):
        if self.xi_max <= 0.0:
            raise ValueError("xi_max must be positive")
        if self.n_samples < 9 or self.n_radii < 4 or self.n_angles < 4:
            raise ValueError("table sampling is too coarse")


@dataclass
class HomogenizedOperatorTable:
    """Sampled effective operator with piecewise-linear evaluation.

    1D: xi_samples (uniform from 0) with a0_samples and h_samples (NaN when
    the family has no potential).  2D: radii x thetas polar grid with
    a0_polar (..., 2) and h_polar; a0(0) = 0 closes the disk at the origin.
    Beyond the largest sample the interpolant extends the last slope, and
    compiled evaluations track the largest magnitude requested so callers
    can detect an undersized table and re-tabulate.
    """

    dim: int
    xi_samples: np.ndarray | None = None
    a0_samples: np.ndarray | None = None
    h_samples: np.ndarray | None = None
    radii: np.ndarray | None = None
    thetas: np.ndarray | None = None
    a0_polar: np.ndarray | None = None
    h_polar: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def xi_max(self) -> float:
        if self.dim == 1:
            return float(self.xi_samples[-1])
        return float(self.radii[-1])

    @property
    def has_density(self) -> bool:
        vals = self.h_samples if self.dim == 1 else self.h_polar
        return vals is not None and bool(np.all(np.isfinite(vals)))

    def evaluate(self, xi) -> np.ndarray:
        """Interpolated a0; matches the compiled kernel's interpolant."""
        if self.dim == 1:
            xi = np.asarray(xi, dtype=float)
            m = np.abs(xi)
            xs, vs = self.xi_samples, self.a0_samples
            out = np.interp(m, xs, vs)
            top = xs[-1]
            above = m >= top
            if np.any(above):
                slope = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
                out = np.where(above, vs[-1] + slope * (m - top), out)
            return np.sign(xi) * out
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != 2:
            raise ValueError("2D table expects points with last axis 2")
        r = np.sqrt(np.sum(xi * xi, axis=-1))
        th = np.mod(np.arctan2(xi[..., 1], xi[..., 0]), 2.0 * np.pi)
        nt = self.thetas.shape[0]
        dth = 2.0 * np.pi / nt
        j = np.minimum((th / dth).astype(int), nt - 1)
        j2 = (j + 1) % nt
        tt = np.clip((th - j * dth) / dth, 0.0, 1.0)
        radii = self.radii
        nr = radii.shape[0]
        k = np.clip(np.searchsorted(radii, r) - 1, 0, nr - 2)
        k2 = k + 1
        denom = radii[k2] - radii[k]
        rr = np.clip((r - radii[k]) / denom, 0.0, 1.0)

        def ring(level, comp):
            return (self.a0_polar[level, j, comp] * (1.0 - tt)
                    + self.a0_polar[level, j2, comp] * tt)

        out = np.empty(xi.shape, dtype=float)
        for comp in (0, 1):
            inner = ring(0, comp) * np.where(radii[0] > 0.0,
                                             r / radii[0], 0.0)
            vtop = ring(nr - 1, comp)
            vprev = ring(nr - 2, comp)
            slope = (vtop - vprev) / (radii[nr - 1] - radii[nr - 2])
            outer = vtop + slope * (r - radii[nr - 1])
            mid = ring(k, comp) * (1.0 - rr) + ring(k2, comp) * rr
            vals = np.where(r <= radii[0], inner,
                            np.where(r >= radii[nr - 1], outer, mid))
            out[..., comp] = np.where(r == 0.0, 0.0, vals)
        return out


def tabulate(flux: FluxOperator, params: TableParams | None = None,
             dim: int = 1) -> HomogenizedOperatorTable:
    """Sample the effective operator of a periodic flux into a table."""
    _require_operator(flux)
    params = params or TableParams()
    meta = {
        "family": flux.family,
        "alpha": flux.exponent.alpha,
        "beta": flux.exponent.beta,
        "n_cell": params.cell.n_cell,
    }
    if dim == 1:
        grid = Grid(dim=1, n=params.cell.n_cell, boundary="periodic")
        mid = grid.axis_midpoints()
        w, p, g2, g3 = (np.ascontiguousarray(a)
                        for a in flux.coefficients_at(mid, dim=1))
        mode = kernels._mode_for(flux)
        xs = np.linspace(0.0, params.xi_max, params.n_samples)
        a0 = np.zeros_like(xs)
        hs = np.zeros_like(xs) if flux.has_potential \
            else np.full_like(xs, np.nan)
        s = np.zeros(params.cell.n_cell)
        c_prev = None
        for i in range(1, params.n_samples):
            if i > 1:
                # continuation guess: previous constant scaled by slope ratio
                s[:] = s * (xs[i] / xs[i - 1])
            else:
                s[:] = xs[i]
            c = _first_integral(mode, w, p, g2, g3, flux.delta,
                                float(xs[i]), s, c0=c_prev)
            a0[i] = c
            c_prev = c
            if flux.has_potential:
                hs[i] = float(np.mean(_potential_cells(flux, mid, s, 1)))
        return HomogenizedOperatorTable(dim=1, xi_samples=xs, a0_samples=a0,
                                        h_samples=hs, meta=meta)
    if dim != 2:
        raise ValueError("tables are 1D or 2D")
    radii = np.geomspace(params.r_min_factor * params.xi_max,
                         params.xi_max, params.n_radii)
    thetas = 2.0 * np.pi * np.arange(params.n_angles) / params.n_angles
    a0 = np.zeros((params.n_radii, params.n_angles, 2))
    hp = np.zeros((params.n_radii, params.n_angles)) \
        if flux.has_potential else np.full((params.n_radii,
                                            params.n_angles), np.nan)
    for jt, th in enumerate(thetas):
        e = np.array([math.cos(th), math.sin(th)])
        warm = None
        for kr, r in enumerate(radii):
            sol = _corrector_2d(flux, r * e, params.cell, v0=warm)
            if not sol.converged:
                raise RuntimeError(
                    f"corrector failed at r={r:g}, theta={th:g} "
                    f"(residual {sol.residual_norm:.3e})")
            warm = sol.v.values
            a0[kr, jt] = sol.flux_avg
            if flux.has_potential:
                hp[kr, jt] = sol.h_value
    return HomogenizedOperatorTable(dim=2, radii=radii, thetas=thetas,
                                    a0_polar=a0, h_polar=hp, meta=meta)


# ---------------------------------------------------------------- table IO

_MAGIC = "homogtable 1"


def _data_lines_1d(table: HomogenizedOperatorTable) -> list[str]:
    hs = table.h_samples if table.h_samples is not None \
        else np.full_like(table.xi_samples, np.nan)
    return ["%.17g %.17g %.17g" % (x, a, h)
            for x, a, h in zip(table.xi_samples, table.a0_samples, hs)]


def _data_lines_2d(table: HomogenizedOperatorTable) -> list[str]:
    hp = table.h_polar if table.h_polar is not None \
        else np.full(table.a0_polar.shape[:2], np.nan)
    lines = []
    for k in range(table.radii.shape[0]):
        for j in range(table.thetas.shape[0]):
            lines.append("%.17g %.17g %.17g %.17g %.17g" % (
                table.radii[k], table.thetas[j],
                table.a0_polar[k, j, 0], table.a0_polar[k, j, 1],
                hp[k, j]))
    return lines


def table_digest(table: HomogenizedOperatorTable) -> str:
    """Content hash of the sampled data (what export_table signs)."""
    data = _data_lines_1d(table) if table.dim == 1 else _data_lines_2d(table)
    return hashlib.sha256("\n".join(data).encode()).hexdigest()


def export_table(table: HomogenizedOperatorTable, path) -> str:
    """Write the table as versioned text; returns its content hash."""
    lines = [_MAGIC, f"dim {table.dim}"]
    if table.dim == 1:
        lines.append(f"n_samples {table.xi_samples.shape[0]}")
        data = _data_lines_1d(table)
        lines.append("columns xi a0 h")
    else:
        lines.append(f"n_radii {table.radii.shape[0]}")
        lines.append(f"n_angles {table.thetas.shape[0]}")
        data = _data_lines_2d(table)
        lines.append("columns r theta a0_0 a0_1 h")
    for key in sorted(table.meta):
        lines.append(f"meta.{key} {table.meta[key]}")
    digest = hashlib.sha256("\n".join(data).encode()).hexdigest()
    lines.append("data")
    lines.extend(data)
    lines.append(f"sha256 {digest}")
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return digest


def load_table(path) -> HomogenizedOperatorTable:
    with open(path) as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0] != _MAGIC:
        raise ValueError(f"{path}: not a homogenized-operator table")
    header: dict[str, str] = {}
    meta: dict[str, object] = {}
    i = 1
    while i < len(raw) and raw[i] != "data":
        key, _, val = raw[i].partition(" ")
        if key.startswith("meta."):
            meta[key[5:]] = _parse_meta(val)
        else:
            header[key] = val
        i += 1
    if i == len(raw):
        raise ValueError(f"{path}: missing data section")
    body = raw[i + 1:]
    if not body or not body[-1].startswith("sha256 "):
        raise ValueError(f"{path}: missing content hash")
    data = body[:-1]
    digest = body[-1].split()[1]
    if hashlib.sha256("\n".join(data).encode()).hexdigest() != digest:
        raise ValueError(f"{path}: content hash mismatch")
    dim = int(header["dim"])
    rows = np.array([[float(tok) for tok in line.split()] for line in data])
    if dim == 1:
        ns = int(header["n_samples"])
        if rows.shape != (ns, 3):
            raise ValueError(f"{path}: expected {ns} rows of 3 columns")
        xs, a0, hs = rows[:, 0], rows[:, 1], rows[:, 2]
        if np.any(np.diff(xs) <= 0.0):
            raise ValueError(f"{path}: xi samples must increase")
        return HomogenizedOperatorTable(dim=1, xi_samples=xs, a0_samples=a0,
                                        h_samples=hs, meta=meta)
    nr = int(header["n_radii"])
    nt = int(header["n_angles"])
    if rows.shape != (nr * nt, 5):
        raise ValueError(f"{path}: expected {nr * nt} rows of 5 columns")
    radii = rows[::nt, 0]
    thetas = rows[:nt, 1]
    a0 = rows[:, 2:4].reshape(nr, nt, 2)
    hp = rows[:, 4].reshape(nr, nt)
    if np.any(np.diff(radii) <= 0.0):
        raise ValueError(f"{path}: radii must increase")
    return HomogenizedOperatorTable(dim=2, radii=radii, thetas=thetas,
                                    a0_polar=a0, h_polar=hp, meta=meta)


def _parse_meta(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            continue
    return val


# ------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class TableDiagnostics:
    """Structure checks on a sampled effective operator.

    monotonicity_min: smallest increment of the radial flux component
    between consecutive samples along a ray (strict monotonicity needs > 0).
    c_lower / c_upper: fitted constants pinning a0 between power laws,
    min a0(xi).xi / (|xi|^alpha + |xi|^beta) and
    max |a0(xi)| / (|xi|^(alpha-1) + |xi|^(beta-1)).
    convexity_margin_min: smallest interpolated-midpoint slack of h along a
    ray (convexity needs >= -tol).
    delta2_max: largest sampled ratio h(2 xi)/h(xi), finite for doubling.
    grad_h_gap_max: worst relative gap between the radial derivative of h
    and the radial flux component (they agree for potential families).
    """

    monotonicity_min: float
    c_lower: float
    c_upper: float
    convexity_margin_min: float
    delta2_max: float
    grad_h_gap_max: float
    has_density: bool


def _ray_checks(r: np.ndarray, g: np.ndarray, h: np.ndarray | None):
    mono = float(np.min(np.diff(g)))
    if h is None:
        return mono, np.inf, -np.inf, np.nan
    lam = (r[2:] - r[1:-1]) / (r[2:] - r[:-2])
    convexity = float(np.min(lam * h[:-2] + (1.0 - lam) * h[2:] - h[1:-1]))
    doubling = -np.inf
    pos = (r > 0.0) & (2.0 * r <= r[-1]) & (h > 0.0)
    if np.any(pos):
        h2 = np.interp(2.0 * r[pos], r, h)
        doubling = float(np.max(h2 / h[pos]))
    dh = np.gradient(h, r)
    gap = float(np.max(np.abs(dh[1:-1] - g[1:-1])
                       / (1.0 + np.abs(g[1:-1]))))
    return mono, convexity, doubling, gap


def table_diagnostics(table: HomogenizedOperatorTable,
                      alpha: float | None = None,
                      beta: float | None = None) -> TableDiagnostics:
    alpha = alpha if alpha is not None else float(table.meta.get("alpha", 2.0))
    beta = beta if beta is not None else float(table.meta.get("beta", 2.0))
    has_h = table.has_density
    if table.dim == 1:
        xs, a0 = table.xi_samples, table.a0_samples
        hs = table.h_samples if has_h else None
        mono, convexity, doubling, gap = _ray_checks(xs, a0, hs)
        pos = xs > 0.0
        c_lo = float(np.min(a0[pos] * xs[pos]
                            / (xs[pos] ** alpha + xs[pos] ** beta)))
        c_hi = float(np.max(np.abs(a0[pos])
                            / (xs[pos] ** (alpha - 1.0)
                               + xs[pos] ** (beta - 1.0))))
        return TableDiagnostics(monotonicity_min=mono, c_lower=c_lo,
                                c_upper=c_hi, convexity_margin_min=convexity,
                                delta2_max=doubling, grad_h_gap_max=gap,
                                has_density=has_h)
    mono = np.inf
    convexity = np.inf
    doubling = -np.inf
    gap = -np.inf
    c_lo = np.inf
    c_hi = -np.inf
    r = table.radii
    for j, th in enumerate(table.thetas):
        e = np.array([math.cos(th), math.sin(th)])
        g = table.a0_polar[:, j, :] @ e
        h_ray = table.h_polar[:, j] if has_h else None
        m, cv, db, gp = _ray_checks(r, g, h_ray)
        mono = min(mono, m)
        convexity = min(convexity, cv)
        doubling = max(doubling, db)
        gap = gp if not has_h else max(gap, gp)
        mag = np.sqrt(np.sum(table.a0_polar[:, j, :] ** 2, axis=-1))
        c_lo = min(c_lo, float(np.min(g * r / (r ** alpha + r ** beta))))
        c_hi = max(c_hi, float(np.max(mag / (r ** (alpha - 1.0)
                                             + r ** (beta - 1.0)))))
    return TableDiagnostics(monotonicity_min=float(mono), c_lower=c_lo,
                            c_upper=c_hi,
                            convexity_margin_min=float(convexity),
                            delta2_max=float(doubling),
                            grad_h_gap_max=float(gap), has_density=has_h)
