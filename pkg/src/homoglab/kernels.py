"""Compiled inner loops: face fluxes, projected nonlinear Gauss-Seidel sweeps,
residual assembly, and scalar flux inversion.

Everything here operates on plain float64 arrays so numba can compile it; the
Python-facing modules pack coefficient data with `face_data_1d` / `face_data_2d`
and orchestrate sweep batches.  Face coefficients are precomputed once per
solve (the x-dependence of the operator is frozen per face), so the inner
loops reduce to pow/log arithmetic.

Flux modes:
    0  linear       a = w xi            (power family with p == 2)
    1  power        a = w |xi|^(p-2) xi
    2  log          a = w |xi|^(p-1) xi log(g2 |xi| + g3)
    3  1D table     piecewise-linear odd interpolant of sampled a0
    4  2D table     bilinear in (r, theta) with a0(0) = 0 closure

The per-node scalar equations r_i(t) = 0 are strictly monotone in t, so the
node solves use Newton steps safeguarded by a doubling bracket and bisection.
Lexicographic node order keeps every sweep deterministic.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

MODE_LINEAR = 0
MODE_POWER = 1
MODE_LOG = 2
MODE_TABLE1 = 3
MODE_TABLE2 = 4


# ---------------------------------------------------------------- flux cores

@njit(inline="always", cache=True)
def _factor(mode, w, p, g2, g3, delta, xi_sq):
    # scalar prefactor such that a = factor * xi
    if mode == MODE_LINEAR:
        return w
    m = math.sqrt(xi_sq)
    if p < 2.0 and m < delta:
        m = math.sqrt(xi_sq + delta * delta)
    if m == 0.0:
        return 0.0
    if mode == MODE_POWER:
        return w * m ** (p - 2.0)
    return w * m ** (p - 1.0) * math.log(g2 * m + g3)


@njit(cache=True)
def _table1d(tabx, tabv, xi, peak):
    m = abs(xi)
    if m > peak[0]:
        peak[0] = m
    s = 1.0 if xi >= 0.0 else -1.0
    ns = tabx.shape[0]
    dx = tabx[1] - tabx[0]
    top = tabx[ns - 1]
    if m >= top:
        slope = (tabv[ns - 1] - tabv[ns - 2]) / dx
        return s * (tabv[ns - 1] + slope * (m - top))
    k = int(m / dx)
    if k > ns - 2:
        k = ns - 2
    t = (m - tabx[k]) / dx
    return s * (tabv[k] * (1.0 - t) + tabv[k + 1] * t)


@njit(cache=True)
def _table2d(radii, thetas, tvals, x0, x1, comp, peak):
    r = math.sqrt(x0 * x0 + x1 * x1)
    if r > peak[0]:
        peak[0] = r
    if r == 0.0:
        return 0.0
    th = math.atan2(x1, x0)
    if th < 0.0:
        th += 2.0 * math.pi
    nt = thetas.shape[0]
    dth = 2.0 * math.pi / nt
    j = int(th / dth)
    if j > nt - 1:
        j = nt - 1
    j2 = j + 1 if j + 1 < nt else 0
    tt = (th - dth * j) / dth
    if tt < 0.0:
        tt = 0.0
    if tt > 1.0:
        tt = 1.0
    nr = radii.shape[0]
    if r <= radii[0]:
        ring = tvals[0, j, comp] * (1.0 - tt) + tvals[0, j2, comp] * tt
        return ring * (r / radii[0])
    if r >= radii[nr - 1]:
        vtop = tvals[nr - 1, j, comp] * (1.0 - tt) + tvals[nr - 1, j2, comp] * tt
        vprev = tvals[nr - 2, j, comp] * (1.0 - tt) + tvals[nr - 2, j2, comp] * tt
        slope = (vtop - vprev) / (radii[nr - 1] - radii[nr - 2])
        return vtop + slope * (r - radii[nr - 1])
    lo = 0
    hi = nr - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if radii[mid] <= r:
            lo = mid
        else:
            hi = mid
    rr = (r - radii[lo]) / (radii[hi] - radii[lo])
    va = tvals[lo, j, comp] * (1.0 - tt) + tvals[lo, j2, comp] * tt
    vb = tvals[hi, j, comp] * (1.0 - tt) + tvals[hi, j2, comp] * tt
    return va * (1.0 - rr) + vb * rr


@njit(inline="always", cache=True)
def _face1(mode, w, p, g2, g3, delta, tabx, tabv, xi, peak):
    if mode == MODE_TABLE1:
        return _table1d(tabx, tabv, xi, peak)
    return _factor(mode, w, p, g2, g3, delta, xi * xi) * xi


@njit(inline="always", cache=True)
def _flux2(mode, w, p, g2, g3, delta, radii, thetas, tvals, gx, gy, comp, peak):
    if mode == MODE_TABLE2:
        return _table2d(radii, thetas, tvals, gx, gy, comp, peak)
    fac = _factor(mode, w, p, g2, g3, delta, gx * gx + gy * gy)
    return fac * gx if comp == 0 else fac * gy


# ----------------------------------------------------------- 1D node solves

@njit(cache=True)
def _nres1(t, uL, uR, fi, h, mode, wl, pl, g2l, g3l, wr, pr, g2r, g3r,
           delta, tabx, tabv, peak):
    aR = _face1(mode, wr, pr, g2r, g3r, delta, tabx, tabv, (uR - t) / h, peak)
    aL = _face1(mode, wl, pl, g2l, g3l, delta, tabx, tabv, (t - uL) / h, peak)
    return -(aR - aL) / h - fi, (abs(aR) + abs(aL)) / h + abs(fi) + 1.0


@njit(cache=True)
def _node_solve_1d(t0, uL, uR, fi, h, mode, wl, pl, g2l, g3l, wr, pr, g2r, g3r,
                   delta, tabx, tabv, rtol_node, peak):
    t = t0
    r, sc = _nres1(t, uL, uR, fi, h, mode, wl, pl, g2l, g3l, wr, pr, g2r, g3r,
                   delta, tabx, tabv, peak)
    tol = rtol_node + 1e-14 * sc
    if abs(r) <= tol:
        return t
    # bracket the root by doubling; r is strictly increasing in t
    d = 1e-3 * (1.0 + abs(t))
    if r > 0.0:
        hi = t
        lo = t - d
        rlo, _ = _nres1(lo, uL, uR, fi, h, mode, wl, pl, g2l, g3l,
                        wr, pr, g2r, g3r, delta, tabx, tabv, peak)
        k = 0
        while rlo > 0.0:
            hi = lo
            d *= 4.0
            lo = t - d
            rlo, _ = _nres1(lo, uL, uR, fi, h, mode, wl, pl, g2l, g3l,
                            wr, pr, g2r, g3r, delta, tabx, tabv, peak)
            k += 1
            if k > 300:
                return np.nan
        if abs(rlo) <= tol:
            return lo
        t = lo
        r = rlo
    else:
        lo = t
        hi = t + d
        rhi, _ = _nres1(hi, uL, uR, fi, h, mode, wl, pl, g2l, g3l,
                        wr, pr, g2r, g3r, delta, tabx, tabv, peak)
        k = 0
        while rhi < 0.0:
            lo = hi
            d *= 4.0
            hi = t + d
            rhi, _ = _nres1(hi, uL, uR, fi, h, mode, wl, pl, g2l, g3l,
                            wr, pr, g2r, g3r, delta, tabx, tabv, peak)
            k += 1
            if k > 300:
                return np.nan
        if abs(rhi) <= tol:
            return hi
        t = lo
    # safeguarded Newton inside [lo, hi]
    for _ in range(80):
        du = 1e-7 * (1.0 + abs(t))
        r2, _ = _nres1(t + du, uL, uR, fi, h, mode, wl, pl, g2l, g3l,
                       wr, pr, g2r, g3r, delta, tabx, tabv, peak)
        dr = (r2 - r) / du
        if dr > 0.0:
            tn = t - r / dr
        else:
            tn = 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        rn, _ = _nres1(tn, uL, uR, fi, h, mode, wl, pl, g2l, g3l,
                       wr, pr, g2r, g3r, delta, tabx, tabv, peak)
        if rn > 0.0:
            hi = tn
        else:
            lo = tn
        t = tn
        r = rn
        if abs(r) <= tol or hi - lo <= 4e-16 * (1.0 + abs(t)):
            return t
    return t


@njit(cache=True)
def obstacle_sweeps_1d(u, psi, f, h, mode, w, p, g2, g3, delta, tabx, tabv,
                       omega, nsweeps, exit_update, rtol_node, peak):
    """Batch of projected SOR sweeps; returns (last_update, sweeps, ok)."""
    n = u.shape[0] - 1
    last = 1e300
    for s in range(nsweeps):
        upd = 0.0
        for i in range(1, n):
            t0 = u[i]
            if mode == MODE_LINEAR:
                wl = w[i - 1]
                wr = w[i]
                t = (wr * u[i + 1] + wl * u[i - 1] + h * h * f[i]) / (wr + wl)
            else:
                t = _node_solve_1d(t0, u[i - 1], u[i + 1], f[i], h, mode,
                                   w[i - 1], p[i - 1], g2[i - 1], g3[i - 1],
                                   w[i], p[i], g2[i], g3[i],
                                   delta, tabx, tabv, rtol_node, peak)
            t = t0 + omega * (t - t0)
            if t < psi[i]:
                t = psi[i]
            d = abs(t - t0)
            if d > upd:
                upd = d
            u[i] = t
        if not math.isfinite(upd):
            return upd, s + 1, 0
        last = upd
        if upd <= exit_update:
            return last, s + 1, 1
    return last, nsweeps, 1


@njit(cache=True)
def residual_1d(u, f, h, mode, w, p, g2, g3, delta, tabx, tabv, peak):
    """Interior-node residual r = A_h u - f (discrete -div of midpoint flux)."""
    n = u.shape[0] - 1
    r = np.empty(n - 1)
    aL = _face1(mode, w[0], p[0], g2[0], g3[0], delta, tabx, tabv,
                (u[1] - u[0]) / h, peak)
    for i in range(1, n):
        aR = _face1(mode, w[i], p[i], g2[i], g3[i], delta, tabx, tabv,
                    (u[i + 1] - u[i]) / h, peak)
        r[i - 1] = -(aR - aL) / h - f[i]
        aL = aR
    return r


# ----------------------------------------------------------- 2D node solves

@njit(cache=True)
def _nres2(t, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
           cE, cW, cN, cS, delta, radii, thetas, tvals, peak):
    # c* = (w, p, g2, g3) per face, packed as 4-tuples
    aE = _flux2(mode, cE[0], cE[1], cE[2], cE[3], delta, radii, thetas, tvals,
                (uE - t) / h, tE, 0, peak)
    aW = _flux2(mode, cW[0], cW[1], cW[2], cW[3], delta, radii, thetas, tvals,
                (t - uW) / h, tW, 0, peak)
    aN = _flux2(mode, cN[0], cN[1], cN[2], cN[3], delta, radii, thetas, tvals,
                tN, (uN - t) / h, 1, peak)
    aS = _flux2(mode, cS[0], cS[1], cS[2], cS[3], delta, radii, thetas, tvals,
                tS, (t - uS) / h, 1, peak)
    res = -((aE - aW) + (aN - aS)) / h - fi
    sc = (abs(aE) + abs(aW) + abs(aN) + abs(aS)) / h + abs(fi) + 1.0
    return res, sc


@njit(cache=True)
def _node_solve_2d(t0, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                   cE, cW, cN, cS, delta, radii, thetas, tvals,
                   rtol_node, peak):
    t = t0
    r, sc = _nres2(t, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                   cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
    tol = rtol_node + 1e-14 * sc
    if abs(r) <= tol:
        return t
    d = 1e-3 * (1.0 + abs(t))
    if r > 0.0:
        hi = t
        lo = t - d
        rlo, _ = _nres2(lo, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                        cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
        k = 0
        while rlo > 0.0:
            hi = lo
            d *= 4.0
            lo = t - d
            rlo, _ = _nres2(lo, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                            cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
            k += 1
            if k > 300:
                return np.nan
        if abs(rlo) <= tol:
            return lo
        t = lo
        r = rlo
    else:
        lo = t
        hi = t + d
        rhi, _ = _nres2(hi, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                        cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
        k = 0
        while rhi < 0.0:
            lo = hi
            d *= 4.0
            hi = t + d
            rhi, _ = _nres2(hi, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                            cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
            k += 1
            if k > 300:
                return np.nan
        if abs(rhi) <= tol:
            return hi
        t = lo
    for _ in range(80):
        du = 1e-7 * (1.0 + abs(t))
        r2, _ = _nres2(t + du, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                       cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
        dr = (r2 - r) / du
        if dr > 0.0:
            tn = t - r / dr
        else:
            tn = 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        rn, _ = _nres2(tn, uE, uW, uN, uS, tE, tW, tN, tS, fi, h, mode,
                       cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
        if rn > 0.0:
            hi = tn
        else:
            lo = tn
        t = tn
        r = rn
        if abs(r) <= tol or hi - lo <= 4e-16 * (1.0 + abs(t)):
            return t
    return t


@njit(cache=True)
def obstacle_sweeps_2d(u, psi, f, h, mode, wx, px, g2x, g3x, wy, py, g2y, g3y,
                       delta, radii, thetas, tvals, omega, nsweeps,
                       exit_update, rtol_node, peak):
    n = u.shape[0] - 1
    last = 1e300
    for s in range(nsweeps):
        upd = 0.0
        for i in range(1, n):
            for j in range(1, n):
                t0 = u[i, j]
                uE = u[i + 1, j]
                uW = u[i - 1, j]
                uN = u[i, j + 1]
                uS = u[i, j - 1]
                if mode == MODE_LINEAR:
                    wE = wx[i, j]
                    wW = wx[i - 1, j]
                    wN = wy[i, j]
                    wS = wy[i, j - 1]
                    t = (wE * uE + wW * uW + wN * uN + wS * uS
                         + h * h * f[i, j]) / (wE + wW + wN + wS)
                else:
                    tEv = (u[i, j + 1] - u[i, j - 1]
                           + u[i + 1, j + 1] - u[i + 1, j - 1]) / (4.0 * h)
                    tWv = (u[i - 1, j + 1] - u[i - 1, j - 1]
                           + u[i, j + 1] - u[i, j - 1]) / (4.0 * h)
                    tNv = (u[i + 1, j] - u[i - 1, j]
                           + u[i + 1, j + 1] - u[i - 1, j + 1]) / (4.0 * h)
                    tSv = (u[i + 1, j - 1] - u[i - 1, j - 1]
                           + u[i + 1, j] - u[i - 1, j]) / (4.0 * h)
                    cE = (wx[i, j], px[i, j], g2x[i, j], g3x[i, j])
                    cW = (wx[i - 1, j], px[i - 1, j], g2x[i - 1, j], g3x[i - 1, j])
                    cN = (wy[i, j], py[i, j], g2y[i, j], g3y[i, j])
                    cS = (wy[i, j - 1], py[i, j - 1], g2y[i, j - 1], g3y[i, j - 1])
                    t = _node_solve_2d(t0, uE, uW, uN, uS, tEv, tWv, tNv, tSv,
                                       f[i, j], h, mode, cE, cW, cN, cS, delta,
                                       radii, thetas, tvals, rtol_node, peak)
                t = t0 + omega * (t - t0)
                if t < psi[i, j]:
                    t = psi[i, j]
                d = abs(t - t0)
                if d > upd:
                    upd = d
                u[i, j] = t
        if not math.isfinite(upd):
            return upd, s + 1, 0
        last = upd
        if upd <= exit_update:
            return last, s + 1, 1
    return last, nsweeps, 1


@njit(cache=True)
def residual_2d(u, f, h, mode, wx, px, g2x, g3x, wy, py, g2y, g3y,
                delta, radii, thetas, tvals, peak):
    n = u.shape[0] - 1
    r = np.empty((n - 1, n - 1))
    for i in range(1, n):
        for j in range(1, n):
            t = u[i, j]
            tEv = (u[i, j + 1] - u[i, j - 1]
                   + u[i + 1, j + 1] - u[i + 1, j - 1]) / (4.0 * h)
            tWv = (u[i - 1, j + 1] - u[i - 1, j - 1]
                   + u[i, j + 1] - u[i, j - 1]) / (4.0 * h)
            tNv = (u[i + 1, j] - u[i - 1, j]
                   + u[i + 1, j + 1] - u[i - 1, j + 1]) / (4.0 * h)
            tSv = (u[i + 1, j - 1] - u[i - 1, j - 1]
                   + u[i + 1, j] - u[i - 1, j]) / (4.0 * h)
            cE = (wx[i, j], px[i, j], g2x[i, j], g3x[i, j])
            cW = (wx[i - 1, j], px[i - 1, j], g2x[i - 1, j], g3x[i - 1, j])
            cN = (wy[i, j], py[i, j], g2y[i, j], g3y[i, j])
            cS = (wy[i, j - 1], py[i, j - 1], g2y[i, j - 1], g3y[i, j - 1])
            res, _ = _nres2(t, u[i + 1, j], u[i - 1, j], u[i, j + 1], u[i, j - 1],
                            tEv, tWv, tNv, tSv, f[i, j], h, mode,
                            cE, cW, cN, cS, delta, radii, thetas, tvals, peak)
            r[i - 1, j - 1] = res
    return r


# ------------------------------------------------- periodic cell correctors

@njit(cache=True)
def corrector_sweeps_2d(v, xi0, xi1, h, mode, wx, px, g2x, g3x,
                        wy, py, g2y, g3y, delta, omega, nsweeps,
                        exit_update, rtol_node):
    """Periodic nonlinear Gauss-Seidel for div a(x, xi + grad v) = 0."""
    n = v.shape[0]
    radii = np.zeros(1)
    thetas = np.zeros(1)
    tvals = np.zeros((1, 1, 2))
    peak = np.zeros(1)
    last = 1e300
    for s in range(nsweeps):
        upd = 0.0
        for i in range(n):
            ip = i + 1 if i + 1 < n else 0
            im = i - 1 if i > 0 else n - 1
            for j in range(n):
                jp = j + 1 if j + 1 < n else 0
                jm = j - 1 if j > 0 else n - 1
                t0 = v[i, j]
                vE = v[ip, j]
                vW = v[im, j]
                vN = v[i, jp]
                vS = v[i, jm]
                if mode == MODE_LINEAR:
                    wE = wx[i, j]
                    wW = wx[im, j]
                    wN = wy[i, j]
                    wS = wy[i, jm]
                    t = (wE * vE + wW * vW + wN * vN + wS * vS
                         + h * (xi0 * (wE - wW) + xi1 * (wN - wS))) \
                        / (wE + wW + wN + wS)
                else:
                    tEv = xi1 + (v[i, jp] - v[i, jm]
                                 + v[ip, jp] - v[ip, jm]) / (4.0 * h)
                    tWv = xi1 + (v[im, jp] - v[im, jm]
                                 + v[i, jp] - v[i, jm]) / (4.0 * h)
                    tNv = xi0 + (v[ip, j] - v[im, j]
                                 + v[ip, jp] - v[im, jp]) / (4.0 * h)
                    tSv = xi0 + (v[ip, jm] - v[im, jm]
                                 + v[ip, j] - v[im, j]) / (4.0 * h)
                    cE = (wx[i, j], px[i, j], g2x[i, j], g3x[i, j])
                    cW = (wx[im, j], px[im, j], g2x[im, j], g3x[im, j])
                    cN = (wy[i, j], py[i, j], g2y[i, j], g3y[i, j])
                    cS = (wy[i, jm], py[i, jm], g2y[i, jm], g3y[i, jm])
                    # the macroscopic xi enters the normal components too
                    t = _node_solve_2d_shift(t0, vE, vW, vN, vS,
                                             tEv, tWv, tNv, tSv, h, mode,
                                             cE, cW, cN, cS, delta,
                                             xi0, xi1, rtol_node,
                                             radii, thetas, tvals, peak)
                t = t0 + omega * (t - t0)
                d = abs(t - t0)
                if d > upd:
                    upd = d
                v[i, j] = t
        mean = 0.0
        for i in range(n):
            for j in range(n):
                mean += v[i, j]
        mean /= n * n
        for i in range(n):
            for j in range(n):
                v[i, j] -= mean
        if not math.isfinite(upd):
            return upd, s + 1, 0
        last = upd
        if upd <= exit_update:
            return last, s + 1, 1
    return last, nsweeps, 1


@njit(cache=True)
def _cres2(t, vE, vW, vN, vS, tE, tW, tN, tS, h, mode, cE, cW, cN, cS,
           delta, xi0, xi1, radii, thetas, tvals, peak):
    aE = _flux2(mode, cE[0], cE[1], cE[2], cE[3], delta, radii, thetas, tvals,
                xi0 + (vE - t) / h, tE, 0, peak)
    aW = _flux2(mode, cW[0], cW[1], cW[2], cW[3], delta, radii, thetas, tvals,
                xi0 + (t - vW) / h, tW, 0, peak)
    aN = _flux2(mode, cN[0], cN[1], cN[2], cN[3], delta, radii, thetas, tvals,
                tN, xi1 + (vN - t) / h, 1, peak)
    aS = _flux2(mode, cS[0], cS[1], cS[2], cS[3], delta, radii, thetas, tvals,
                tS, xi1 + (t - vS) / h, 1, peak)
    res = -((aE - aW) + (aN - aS)) / h
    sc = (abs(aE) + abs(aW) + abs(aN) + abs(aS)) / h + 1.0
    return res, sc


@njit(cache=True)
def _node_solve_2d_shift(t0, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                         cE, cW, cN, cS, delta, xi0, xi1, rtol_node,
                         radii, thetas, tvals, peak):
    t = t0
    r, sc = _cres2(t, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                   cE, cW, cN, cS, delta, xi0, xi1, radii, thetas, tvals, peak)
    tol = rtol_node + 1e-14 * sc
    if abs(r) <= tol:
        return t
    d = 1e-3 * (1.0 + abs(t))
    if r > 0.0:
        hi = t
        lo = t - d
        rlo, _ = _cres2(lo, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                        cE, cW, cN, cS, delta, xi0, xi1,
                        radii, thetas, tvals, peak)
        k = 0
        while rlo > 0.0:
            hi = lo
            d *= 4.0
            lo = t - d
            rlo, _ = _cres2(lo, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                            cE, cW, cN, cS, delta, xi0, xi1,
                            radii, thetas, tvals, peak)
            k += 1
            if k > 300:
                return np.nan
        t = lo
        r = rlo
    else:
        lo = t
        hi = t + d
        rhi, _ = _cres2(hi, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                        cE, cW, cN, cS, delta, xi0, xi1,
                        radii, thetas, tvals, peak)
        k = 0
        while rhi < 0.0:
            lo = hi
            d *= 4.0
            hi = t + d
            rhi, _ = _cres2(hi, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                            cE, cW, cN, cS, delta, xi0, xi1,
                            radii, thetas, tvals, peak)
            k += 1
            if k > 300:
                return np.nan
        t = lo
    for _ in range(80):
        du = 1e-7 * (1.0 + abs(t))
        r2, _ = _cres2(t + du, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                       cE, cW, cN, cS, delta, xi0, xi1,
                       radii, thetas, tvals, peak)
        dr = (r2 - r) / du
        if dr > 0.0:
            tn = t - r / dr
        else:
            tn = 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        rn, _ = _cres2(tn, vE, vW, vN, vS, tE, tW, tN, tS, h, mode,
                       cE, cW, cN, cS, delta, xi0, xi1,
                       radii, thetas, tvals, peak)
        if rn > 0.0:
            hi = tn
        else:
            lo = tn
        t = tn
        r = rn
        if abs(r) <= tol or hi - lo <= 4e-16 * (1.0 + abs(t)):
            return t
    return t


@njit(cache=True)
def corrector_residual_2d(v, xi0, xi1, h, mode, wx, px, g2x, g3x,
                          wy, py, g2y, g3y, delta):
    n = v.shape[0]
    radii = np.zeros(1)
    thetas = np.zeros(1)
    tvals = np.zeros((1, 1, 2))
    peak = np.zeros(1)
    r = np.empty((n, n))
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        im = i - 1 if i > 0 else n - 1
        for j in range(n):
            jp = j + 1 if j + 1 < n else 0
            jm = j - 1 if j > 0 else n - 1
            tEv = xi1 + (v[i, jp] - v[i, jm] + v[ip, jp] - v[ip, jm]) / (4.0 * h)
            tWv = xi1 + (v[im, jp] - v[im, jm] + v[i, jp] - v[i, jm]) / (4.0 * h)
            tNv = xi0 + (v[ip, j] - v[im, j] + v[ip, jp] - v[im, jp]) / (4.0 * h)
            tSv = xi0 + (v[ip, jm] - v[im, jm] + v[ip, j] - v[im, j]) / (4.0 * h)
            cE = (wx[i, j], px[i, j], g2x[i, j], g3x[i, j])
            cW = (wx[im, j], px[im, j], g2x[im, j], g3x[im, j])
            cN = (wy[i, j], py[i, j], g2y[i, j], g3y[i, j])
            cS = (wy[i, jm], py[i, jm], g2y[i, jm], g3y[i, jm])
            res, _ = _cres2(v[i, j], v[ip, j], v[im, j], v[i, jp], v[i, jm],
                            tEv, tWv, tNv, tSv, h, mode, cE, cW, cN, cS,
                            delta, xi0, xi1, radii, thetas, tvals, peak)
            r[i, j] = res
    return r


# --------------------------------------------------- scalar flux inversion

@njit(inline="always", cache=True)
def _ascalar(mode, w, p, g2, g3, delta, s):
    return _factor(mode, w, p, g2, g3, delta, s * s) * s


@njit(cache=True)
def _invert_scalar(mode, w, p, g2, g3, delta, c, s0, rtol):
    """Solve a(s) = c for the odd increasing scalar map a."""
    if c == 0.0:
        return 0.0
    sgn = 1.0 if c > 0.0 else -1.0
    s = s0
    if s * sgn <= 0.0:
        # power-law guess ignoring the log factor
        s = sgn * (abs(c) / w) ** (1.0 / (p - 1.0))
    tol = rtol * (1.0 + abs(c))
    g = _ascalar(mode, w, p, g2, g3, delta, s) - c
    if abs(g) <= tol:
        return s
    d = 0.5 * abs(s) + 1e-30
    if g > 0.0:
        hi = s
        lo = s - d
        glo = _ascalar(mode, w, p, g2, g3, delta, lo) - c
        k = 0
        while glo > 0.0:
            hi = lo
            d *= 4.0
            lo = s - d
            glo = _ascalar(mode, w, p, g2, g3, delta, lo) - c
            k += 1
            if k > 300:
                return np.nan
        s = lo
        g = glo
    else:
        lo = s
        hi = s + d
        ghi = _ascalar(mode, w, p, g2, g3, delta, hi) - c
        k = 0
        while ghi < 0.0:
            lo = hi
            d *= 4.0
            hi = s + d
            ghi = _ascalar(mode, w, p, g2, g3, delta, hi) - c
            k += 1
            if k > 300:
                return np.nan
        s = lo
    for _ in range(100):
        du = 1e-7 * (1.0 + abs(s))
        g2v = _ascalar(mode, w, p, g2, g3, delta, s + du) - c
        dg = (g2v - g) / du
        if dg > 0.0:
            sn = s - g / dg
        else:
            sn = 0.5 * (lo + hi)
        if not (lo < sn < hi):
            sn = 0.5 * (lo + hi)
        gn = _ascalar(mode, w, p, g2, g3, delta, sn) - c
        if gn > 0.0:
            hi = sn
        else:
            lo = sn
        s = sn
        g = gn
        if abs(g) <= tol or hi - lo <= 4e-16 * (1.0 + abs(s)):
            return s
    return s


@njit(cache=True)
def mean_inverse_flux_1d(mode, w, p, g2, g3, delta, c, s_arr, rtol):
    """Mean over cell midpoints of a(x, .)^{-1}(c); warm-starts s_arr."""
    tot = 0.0
    for k in range(w.shape[0]):
        s = _invert_scalar(mode, w[k], p[k], g2[k], g3[k], delta, c,
                           s_arr[k], rtol)
        s_arr[k] = s
        tot += s
    return tot / w.shape[0]


# --------------------------------------------------------------- packing

def _dummy_tables():
    return (np.zeros(2), np.zeros(2), np.zeros(1), np.zeros(1),
            np.zeros((1, 1, 2)))


def _mode_for(op) -> int:
    if op.family == "log_type":
        return MODE_LOG
    e = op.exponent
    if e.kind == "constant" and e.base == 2.0 and e.alpha <= 2.0 <= e.beta:
        return MODE_LINEAR
    return MODE_POWER


def face_data_1d(flux, grid):
    """(mode, w, p, g2, g3, delta, tabx, tabv) arrays describing the flux at
    the grid's face midpoints (= cell midpoints)."""
    from .cell import HomogenizedOperatorTable
    if isinstance(flux, HomogenizedOperatorTable):
        if flux.dim != 1:
            raise ValueError("1D solve needs a 1D table")
        one = np.ones(grid.n)
        tabx, tabv, _, _, _ = _dummy_tables()
        return (MODE_TABLE1, one, 2.0 * one, one, one, 0.0,
                np.ascontiguousarray(flux.xi_samples),
                np.ascontiguousarray(flux.a0_samples))
    mid = grid.axis_midpoints()
    w, p, g2, g3 = flux.coefficients_at(mid, dim=1)
    tabx, tabv, _, _, _ = _dummy_tables()
    return (_mode_for(flux), np.ascontiguousarray(w), np.ascontiguousarray(p),
            np.ascontiguousarray(g2), np.ascontiguousarray(g3), flux.delta,
            tabx, tabv)


def _face_coords_2d(grid, periodic: bool):
    h = grid.h
    n = grid.n
    nj = n if periodic else n + 1
    mid = h * (np.arange(n) + 0.5)
    nod = h * np.arange(nj)
    fx = np.stack(np.meshgrid(mid, nod, indexing="ij"), axis=-1)
    fy = np.stack(np.meshgrid(nod, mid, indexing="ij"), axis=-1)
    return fx, fy


def face_data_2d(flux, grid, periodic: bool = False):
    from .cell import HomogenizedOperatorTable
    n = grid.n
    nj = n if periodic else n + 1
    if isinstance(flux, HomogenizedOperatorTable):
        if flux.dim != 2:
            raise ValueError("2D solve needs a 2D table")
        onex = np.ones((n, nj))
        oney = np.ones((nj, n))
        tabx, tabv, _, _, _ = _dummy_tables()
        return (MODE_TABLE2, onex, 2.0 * onex, onex, onex,
                oney, 2.0 * oney, oney, oney, 0.0, tabx, tabv,
                np.ascontiguousarray(flux.radii),
                np.ascontiguousarray(flux.thetas),
                np.ascontiguousarray(flux.a0_polar))
    fx, fy = _face_coords_2d(grid, periodic)
    wx, px, g2x, g3x = flux.coefficients_at(fx, dim=2)
    wy, py, g2y, g3y = flux.coefficients_at(fy, dim=2)
    tabx, tabv, radii, thetas, tvals = _dummy_tables()
    contig = np.ascontiguousarray
    return (_mode_for(flux), contig(wx), contig(px), contig(g2x), contig(g3x),
            contig(wy), contig(py), contig(g2y), contig(g3y), flux.delta,
            tabx, tabv, radii, thetas, tvals)
