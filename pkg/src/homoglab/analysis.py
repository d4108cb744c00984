"""Post-solve analysis: dual-bound certificates, coincidence sets, energies.

The Lewy-Stampacchia check certifies 0 <= A_h u - f <= (A_h psi - f)^+ at
interior nodes and reports the normalized multiplier q = r / bound together
with an L^s norm of the upper bound.  Coincidence sets are thresholded
slack sets with a measure, symmetric-difference gap, and Hausdorff
distance, which is what the sweep driver records to track free-boundary
convergence along an eps sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, gradient
from .vi_solver import DiscreteSolution, _coerce_nodes, _interior, \
    apply_operator, evaluate_flux


def _alpha_of(flux) -> float:
    from .cell import HomogenizedOperatorTable
    if isinstance(flux, HomogenizedOperatorTable):
        return float(flux.meta.get("alpha", 2.0))
    return float(flux.exponent.alpha)


def default_s_exponent(flux, dim: int) -> float:
    """Slightly above the duality threshold n alpha'/(n + alpha')."""
    alpha = _alpha_of(flux)
    alpha_conj = alpha / (alpha - 1.0)
    return 1.01 * max(1.0, dim * alpha_conj / (dim + alpha_conj))


# ------------------------------------------------------------- coincidence

@dataclass
class CoincidenceSet:
    """Thresholded contact set {u - psi <= tau} on interior nodes."""

    grid: Grid
    mask: np.ndarray
    tau: float
    measure: float

    def points(self) -> np.ndarray:
        pts = self.grid.node_points()
        if self.grid.dim == 1:
            interior = pts[1:-1]
            return interior[self.mask]
        interior = pts[1:-1, 1:-1, :]
        return interior[self.mask]


def coincidence(u: ScalarField, psi, tol_kkt: float = 0.0,
                tau: float | None = None) -> CoincidenceSet:
    grid = u.grid
    psi_arr = _coerce_nodes(grid, psi, "psi")
    slack = _interior(u.values) - _interior(psi_arr)
    if tau is None:
        tau = max(10.0 * tol_kkt, grid.h ** 2)
    mask = slack <= tau
    measure = grid.cell_volume * float(np.count_nonzero(mask))
    return CoincidenceSet(grid=grid, mask=mask, tau=float(tau),
                          measure=measure)


@dataclass(frozen=True)
class IndicatorGap:
    measure_eps: float
    measure_limit: float
    measure_gap: float
    chi_l1_gap: float
    hausdorff: float


def measure_convergence(set_eps: CoincidenceSet,
                        set_limit: CoincidenceSet) -> IndicatorGap:
    if set_eps.grid != set_limit.grid:
        raise ValueError("coincidence sets live on different grids")
    sym = set_eps.mask ^ set_limit.mask
    l1 = set_eps.grid.cell_volume * float(np.count_nonzero(sym))
    return IndicatorGap(measure_eps=set_eps.measure,
                        measure_limit=set_limit.measure,
                        measure_gap=abs(set_eps.measure - set_limit.measure),
                        chi_l1_gap=l1,
                        hausdorff=hausdorff_distance(set_eps, set_limit))


def hausdorff_distance(set_a: CoincidenceSet, set_b: CoincidenceSet) -> float:
    pa = set_a.points()
    pb = set_b.points()
    if pa.shape[0] == 0 and pb.shape[0] == 0:
        return 0.0
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        return math.inf
    if set_a.grid.dim == 1:
        return max(_directed_1d(pa, pb), _directed_1d(pb, pa))
    return max(_directed_2d(pa, pb), _directed_2d(pb, pa))


def _directed_1d(pa: np.ndarray, pb: np.ndarray) -> float:
    pb = np.sort(pb)
    idx = np.searchsorted(pb, pa)
    left = np.abs(pa - pb[np.clip(idx - 1, 0, pb.size - 1)])
    right = np.abs(pa - pb[np.clip(idx, 0, pb.size - 1)])
    return float(np.max(np.minimum(left, right)))


def _directed_2d(pa: np.ndarray, pb: np.ndarray,
                 chunk: int = 2048) -> float:
    worst = 0.0
    for start in range(0, pa.shape[0], chunk):
        block = pa[start:start + chunk]
        d2 = np.sum((block[:, None, :] - pb[None, :, :]) ** 2, axis=-1)
        worst = max(worst, float(np.max(np.min(d2, axis=1))))
    return math.sqrt(worst)


# ----------------------------------------------------------- LS certificate

@dataclass(frozen=True)
class LewyStampacchiaReport:
    """Discrete dual-bound certificate 0 <= A_h u - f <= (A_h psi - f)^+.

    q is the residual normalized by the upper bound (0 where the bound is
    below q_threshold); passing requires the sandwich within tol, q bounded
    by 1 + q_tol, and q below q_tol off the contact set.  s_norm_upper is
    the L^s norm of the upper bound, degenerate_measure the measure of
    nodes where |A_h psi - f| is below the non-degeneracy margin eta.
    """

    tol: float
    s_exponent: float
    lower_violation: float
    upper_violation: float
    q_max: float
    q_outside_contact: float
    q_threshold: float
    s_norm_upper: float
    degenerate_measure: float
    passed: bool


def lewy_stampacchia(flux, sol: DiscreteSolution, f, psi,
                     s: float | None = None,
                     q_tol: float = 0.05) -> LewyStampacchiaReport:
    grid = sol.grid
    f_arr = _coerce_nodes(grid, f, "f")
    psi_arr = _coerce_nodes(grid, psi, "psi")
    a_psi = apply_operator(flux, grid, psi_arr)
    bound = np.maximum(a_psi - _interior(f_arr), 0.0)
    r = sol.residual
    tol_kkt = sol.kkt.tol
    tol_ls = 10.0 * tol_kkt
    lower = float(max(0.0, -np.min(r)))
    upper = float(max(0.0, np.max(r - bound)))
    q_threshold = 1e3 * tol_kkt
    strong = bound > q_threshold
    q = np.where(strong, r / np.where(strong, bound, 1.0), 0.0)
    q_max = float(np.max(q)) if q.size else 0.0
    chi = coincidence(sol.u, psi_arr, tol_kkt=tol_kkt).mask
    outside = ~chi
    q_out = float(np.max(q[outside])) if np.any(outside) else 0.0
    s_exp = s if s is not None else default_s_exponent(flux, grid.dim)
    s_norm = float((grid.cell_volume * np.sum(bound ** s_exp))
                   ** (1.0 / s_exp))
    f_scale = float(np.max(np.abs(f_arr)))
    eta = 1e-6 * f_scale
    degen = grid.cell_volume * float(np.count_nonzero(
        np.abs(a_psi - _interior(f_arr)) <= eta))
    passed = (lower <= tol_ls and upper <= tol_ls
              and q_max <= 1.0 + q_tol and q_out <= q_tol)
    return LewyStampacchiaReport(tol=tol_ls, s_exponent=s_exp,
                                 lower_violation=lower,
                                 upper_violation=upper, q_max=q_max,
                                 q_outside_contact=q_out,
                                 q_threshold=q_threshold,
                                 s_norm_upper=s_norm,
                                 degenerate_measure=degen, passed=passed)


# ------------------------------------------------------------------ energy

def energy(flux, u: ScalarField) -> float:
    """Dirichlet energy sum_cells |cell| a(x_c, grad u) . grad u."""
    grid = u.grid
    grad = gradient(u).values
    x = grid.cell_points()
    if grid.dim == 1:
        sig = evaluate_flux(flux, x, grad[:, 0], 1)
        dots = sig * grad[:, 0]
    else:
        sig = evaluate_flux(flux, x, grad, 2)
        dots = np.sum(sig * grad, axis=-1)
    return grid.cell_volume * float(np.sum(dots))


def source_term(f, u: ScalarField) -> float:
    """Load term sum_cells |cell| f u with cell-averaged nodal values."""
    from .grid import cell_average
    grid = u.grid
    f_arr = _coerce_nodes(grid, f, "f")
    fu = cell_average(ScalarField(grid, f_arr)) * cell_average(u)
    return grid.cell_volume * float(np.sum(fu))


# --------------------------------------------------------- obstacle family

def obstacle_family(psi0, eps: float, amplitude: float = 1.0,
                    length: float = 1.0):
    """Oscillating obstacles psi_eps converging to psi0 in the gradient norm.

    psi_eps = psi0 + amplitude eps^(3/2) sin(2 pi x_0 / eps) bump(x) with a
    polynomial bump vanishing on the boundary, so psi_eps - psi0 has
    gradients of order eps^(1/2).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")

    def psi_eps(points):
        pts = np.asarray(points, dtype=float)
        two_d = pts.ndim >= 2 and pts.shape[-1] == 2
        x0 = pts[..., 0] if two_d else pts
        bump = 4.0 * x0 * (length - x0) / length ** 2
        if two_d:
            x1 = pts[..., 1]
            bump = bump * 4.0 * x1 * (length - x1) / length ** 2
        base = psi0(points) if callable(psi0) else float(psi0)
        wave = np.sin(2.0 * np.pi * x0 / eps)
        return base + amplitude * eps ** 1.5 * wave * bump

    return psi_eps
