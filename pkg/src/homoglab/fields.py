"""Periodic coefficient fields and monotone flux-operator families.

All operators here have the form

    a(x, xi) = factor(x, |xi|) * xi

where the x-dependence enters through 1-periodic scalar profiles: a variable
exponent p(x) with bounds 1 < alpha <= p(x) <= beta < infinity, and positive
weights.  Four families are supported:

    px_laplace    a = |xi|^(p(x)-2) xi
    weighted_p    a = g(x) |xi|^(p-2) xi            (constant exponent)
    weighted_px   a = g(x) |xi|^(p(x)-2) xi
    log_type      a = g1(x) |xi|^(p(x)-1) xi log(g2(x)|xi| + g3(x))

Every family is odd in xi, and strictly monotone in xi for admissible
parameters (p > 1, weights positive, g3 > 1).  `verify_structural` samples the
monotonicity / coercivity / boundedness margins so that structural hypotheses
are checked numerically rather than assumed.

Oscillating operators a_eps(x, xi) = a(x/eps, xi) are views created by
`rescale`; the profiles themselves always live on the unit cell.
"""
from __future__ import annotations

from dataclasses import dataclass, replace, field
import math

import numpy as np

FAMILIES = ("px_laplace", "weighted_p", "weighted_px", "log_type")
PROFILE_KINDS = ("constant", "sinusoidal", "piecewise", "inverse_sinusoidal")
EXPONENT_KINDS = ("constant", "sinusoidal", "piecewise")


def _reduce_periodic(y):
    """Map coordinates into [0, 1); exact for inputs that are already there."""
    y = np.asarray(y, dtype=float)
    return y - np.floor(y)


def _profile_values(kind, base, amplitude, periods, ys, axis=None):
    """Evaluate a 1-periodic scalar profile on per-axis coordinate arrays.

    ys is a tuple of broadcastable arrays, one per axis, already reduced to
    [0, 1).  In 2D the sinusoidal profile is the product form
    base + amp*sin(2 pi k y0)*sin(2 pi k y1) and the piecewise profile is a
    checkerboard; with axis set, the profile varies along that axis only
    (layered media).
    """
    if axis is not None:
        ys = (ys[axis],)
    if kind == "constant":
        return np.full(np.broadcast(*ys).shape, float(base))
    if kind in ("sinusoidal", "inverse_sinusoidal"):
        osc = np.ones_like(ys[0])
        for y in ys:
            osc = osc * np.sin(2.0 * np.pi * periods * y)
        val = base + amplitude * osc
        if kind == "inverse_sinusoidal":
            return 1.0 / val
        return val
    if kind == "piecewise":
        tiles = np.zeros_like(ys[0])
        for y in ys:
            tiles = tiles + np.floor(2.0 * periods * y)
        sign = np.where(np.mod(tiles, 2.0) == 0.0, 1.0, -1.0)
        return base + amplitude * sign
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class WeightField:
    """Positive 1-periodic scalar weight from a fixed catalog of shapes.

    kind 'inverse_sinusoidal' gives 1/(base + amp*sin(...)), the shape of the
    classical harmonic-mean benchmarks.  axis restricts the variation to one
    coordinate (layered weight); None means the isotropic 2D forms.
    """
    kind: str = "constant"
    base: float = 1.0
    amplitude: float = 0.0
    periods: int = 1
    axis: int | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.periods < 1 or int(self.periods) != self.periods:
            raise ValueError("periods must be a positive integer")
        lo, _ = self.bounds()
        if lo <= 0.0:
            raise ValueError("weight field must be strictly positive")

    def bounds(self):
        """Exact (inf, sup) of the field over the unit cell."""
        if self.kind == "constant":
            return self.base, self.base
        lo = self.base - abs(self.amplitude)
        hi = self.base + abs(self.amplitude)
        if self.kind == "inverse_sinusoidal":
            if lo <= 0.0:
                raise ValueError("inverse_sinusoidal requires base > |amplitude|")
            return 1.0 / hi, 1.0 / lo
        return lo, hi

    def values(self, ys):
        return _profile_values(self.kind, self.base, self.amplitude,
                               self.periods, ys, self.axis)


@dataclass(frozen=True)
class ExponentField:
    """Variable exponent p(x), 1-periodic, with certified bounds.

    Sinusoidal values are clamped to [alpha, beta] exactly, so the invariant
    alpha <= p(x) <= beta holds pointwise by construction.  Omitted bounds
    default to the exact range of the chosen profile.
    """
    kind: str = "constant"
    base: float = 2.0
    amplitude: float = 0.0
    periods: int = 1
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in EXPONENT_KINDS:
            raise ValueError(f"unknown exponent kind {self.kind!r}")
        if self.periods < 1 or int(self.periods) != self.periods:
            raise ValueError("periods must be a positive integer")
        lo = self.base - abs(self.amplitude) if self.kind != "constant" else self.base
        hi = self.base + abs(self.amplitude) if self.kind != "constant" else self.base
        alpha = lo if self.alpha is None else self.alpha
        beta = hi if self.beta is None else self.beta
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "beta", float(beta))
        if not (1.0 < self.alpha <= self.beta):
            raise ValueError("exponent bounds must satisfy 1 < alpha <= beta")

    def values(self, ys):
        raw = _profile_values(self.kind, self.base, self.amplitude, self.periods, ys)
        return np.minimum(np.maximum(raw, self.alpha), self.beta)


def _split_axes(x, dim):
    """Normalize points to a tuple of per-axis arrays reduced mod 1."""
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return (_reduce_periodic(x),)
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got shape {x.shape}")
    return tuple(_reduce_periodic(x[..., d]) for d in range(dim))


def eval_exponent(p: ExponentField, x, dim: int = 1, eps: float = 1.0):
    """Pointwise p(x/eps); x is a scalar/array (1D) or (..., dim) array."""
    x = np.asarray(x, dtype=float) / eps
    return p.values(_split_axes(x, dim))


@dataclass(frozen=True)
class FluxOperator:
    """One monotone flux family a(x/eps, xi) with its structural constants.

    delta is the singular-set regularization used where p(x) < 2 and
    |xi| < delta: the magnitude in the exponent factor is replaced by
    sqrt(|xi|^2 + delta^2).  Property tests may set delta = 0 to probe the
    exact operator.
    """
    family: str
    exponent: ExponentField = field(default_factory=ExponentField)
    gamma: WeightField | None = None
    gamma1: WeightField | None = None
    gamma2: WeightField | None = None
    gamma3: WeightField | None = None
    c1: float | None = None
    c2: float | None = None
    delta: float = 1e-8
    eps: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family in ("weighted_p", "weighted_px"):
            if self.gamma is None:
                object.__setattr__(self, "gamma", WeightField())
        if self.family == "weighted_p" and self.exponent.kind != "constant":
            raise ValueError("weighted_p requires a constant exponent; "
                             "use weighted_px for variable exponents")
        if self.family == "log_type":
            if self.gamma1 is None:
                object.__setattr__(self, "gamma1", WeightField())
            if self.gamma2 is None:
                object.__setattr__(self, "gamma2", WeightField())
            if self.gamma3 is None:
                object.__setattr__(self, "gamma3", WeightField(base=2.0))
            if self.gamma3.bounds()[0] <= 1.0:
                raise ValueError("log_type requires gamma3 > 1 everywhere")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.c1 is None or self.c2 is None:
            lo, hi = (1.0, 1.0)
            if self.family in ("weighted_p", "weighted_px"):
                lo, hi = self.gamma.bounds()
            elif self.family == "log_type":
                # pure-power envelopes for the log flux: below by
                # g1_lo log(g3_lo) globally, above only on a bounded ball
                # (|a| gains a log over |xi|^(p-1)); size the default for
                # the standard verification radius.
                g1_lo, g1_hi = self.gamma1.bounds()
                lo = g1_lo * math.log(self.gamma3.bounds()[0])
                r = 10.0
                hi = g1_hi * r * math.log(self.gamma2.bounds()[1] * r
                                          + self.gamma3.bounds()[1])
            if self.c1 is None:
                object.__setattr__(self, "c1", lo)
            if self.c2 is None:
                object.__setattr__(self, "c2", hi)

    @property
    def has_potential(self) -> bool:
        """True when a = grad of an integral density (all power families)."""
        return self.family != "log_type"

    def potential_weight(self) -> WeightField:
        if not self.has_potential:
            raise ValueError("log_type has no declared potential density")
        return self.gamma if self.gamma is not None else WeightField()

    def exponent_at(self, x, dim: int = 1):
        return eval_exponent(self.exponent, x, dim=dim, eps=self.eps)

    def coefficients_at(self, x, dim: int = 1):
        """(w, p, g2, g3) arrays at the given points, after eps-rescaling.

        w is the prefactor weight (gamma, gamma1, or 1), g2/g3 are the log
        family's inner coefficients (unused elsewhere).
        """
        ys = _split_axes(np.asarray(x, dtype=float) / self.eps, dim)
        p = self.exponent.values(ys)
        one = np.ones_like(p)
        if self.family == "px_laplace":
            return one, p, one, one
        if self.family in ("weighted_p", "weighted_px"):
            return self.gamma.values(ys) * one, p, one, one
        return (self.gamma1.values(ys) * one, p,
                self.gamma2.values(ys) * one, self.gamma3.values(ys) * one)

    def eval(self, x, xi, dim: int = 1):
        """Vectorized a(x/eps, xi); shapes of x and xi broadcast per axis."""
        xi = np.asarray(xi, dtype=float)
        w, p, g2, g3 = self.coefficients_at(x, dim)
        if dim == 1:
            m = np.abs(xi)
        else:
            m = np.sqrt(np.sum(xi * xi, axis=-1))
        reg = (p < 2.0) & (m < self.delta)
        m_eff = np.where(reg, np.sqrt(m * m + self.delta ** 2), m)
        safe = np.where(m_eff > 0.0, m_eff, 1.0)
        if self.family == "log_type":
            factor = w * safe ** (p - 1.0) * np.log(g2 * safe + g3)
        else:
            factor = w * safe ** (p - 2.0)
        factor = np.where(m_eff > 0.0, factor, 0.0)
        if dim == 1:
            return factor * xi
        return factor[..., None] * xi


def eval_flux(op: FluxOperator, x, xi, dim: int = 1):
    """Flux evaluation a(x/eps, xi) as a module-level operation."""
    return op.eval(x, xi, dim=dim)


def rescale(op: FluxOperator, eps: float) -> FluxOperator:
    """View of the operator with oscillation scale multiplied by eps."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    return replace(op, eps=op.eps * eps)


@dataclass(frozen=True)
class StructuralReport:
    """Sampled margins for the structural hypotheses of a flux family.

    monotonicity_min is the minimum of (a(x,xi)-a(x,eta)).(xi-eta) over the
    sampled pairs; coercivity_margin_min is min of a(x,xi).xi -
    c1(|xi|^p(x) - 1); boundedness_margin_min is min of
    c2(|xi|^(p(x)-1) + 1) - |a(x,xi)|.
    """
    n_samples: int
    radius: float
    monotonicity_min: float
    coercivity_margin_min: float
    boundedness_margin_min: float
    passed: bool


def verify_structural(op: FluxOperator, n_samples: int = 10_000, seed: int = 0,
                      dim: int = 1, radius: float = 10.0,
                      tol: float = 1e-9) -> StructuralReport:
    """Sample the monotonicity / coercivity / boundedness margins.

    Points x are uniform in the unit cell and xi, eta uniform in the ball of
    the given radius; the report records worst margins, not averages, so a
    single violated sample fails the check.
    """
    rng = np.random.default_rng(seed)
    if dim == 1:
        x = rng.uniform(0.0, 1.0, size=n_samples)
        xi = rng.uniform(-radius, radius, size=n_samples)
        eta = rng.uniform(-radius, radius, size=n_samples)
        dot = lambda u, v: u * v
        mag = np.abs
    else:
        x = rng.uniform(0.0, 1.0, size=(n_samples, dim))
        direc = rng.normal(size=(n_samples, dim))
        direc /= np.maximum(np.linalg.norm(direc, axis=-1, keepdims=True), 1e-300)
        xi = direc * (radius * rng.uniform(0.0, 1.0, size=(n_samples, 1)) ** (1.0 / dim))
        direc2 = rng.normal(size=(n_samples, dim))
        direc2 /= np.maximum(np.linalg.norm(direc2, axis=-1, keepdims=True), 1e-300)
        eta = direc2 * (radius * rng.uniform(0.0, 1.0, size=(n_samples, 1)) ** (1.0 / dim))
        dot = lambda u, v: np.sum(u * v, axis=-1)
        mag = lambda u: np.sqrt(np.sum(u * u, axis=-1))

    a_xi = op.eval(x, xi, dim=dim)
    a_eta = op.eval(x, eta, dim=dim)
    p = op.exponent_at(x, dim=dim)

    distinct = mag(xi - eta) > 0.0
    mono = dot(a_xi - a_eta, xi - eta)
    monotonicity_min = float(np.min(mono[distinct])) if np.any(distinct) else np.inf

    m = mag(xi)
    coer = dot(a_xi, xi) - op.c1 * (m ** p - 1.0)
    bound = op.c2 * (m ** (p - 1.0) + 1.0) - mag(a_xi)

    report = StructuralReport(
        n_samples=n_samples,
        radius=radius,
        monotonicity_min=monotonicity_min,
        coercivity_margin_min=float(np.min(coer)),
        boundedness_margin_min=float(np.min(bound)),
        passed=bool(monotonicity_min > 0.0
                    and np.min(coer) >= -tol and np.min(bound) >= -tol),
    )
    return report
