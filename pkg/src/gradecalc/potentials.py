"""Riesz and Bessel potential kernels and fractional operator powers.

The kernels are quadratures of the heat family over a geometric time ladder
(trapezoid in log t); fractional powers (I+R)^{s/nu} and R^{s/nu} act through
the spectral plan.  The two routes cross-validate each other: the ladder
applied to f reproduces the spectral multiplier up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .geometry import Grid, GridFunction, haar_integrate, lp_norm, pseudo_norm
from .heatflow import HeatKernelSource, SpectralPlan, heat_apply


class PotentialError(ValueError):
    pass


class GammaEvaluator:
    """The Gamma function on positive reals.

    A stateless wrapper that pins down the domain used by the kernel
    normalizations (complex exponents are out of scope).
    """

    def __call__(self, x):
        x = float(x)
        if x <= 0:
            raise PotentialError(f"Gamma evaluated at non-positive argument {x}")
        return math.gamma(x)


GAMMA = GammaEvaluator()


# ---------------------------------------------------------------------------
# Time ladder


@dataclass(frozen=True)
class TLadder:
    """Geometric quadrature nodes for integrals over (0, infinity) in t.

    ``weights`` absorb the dt of a trapezoid rule in ln t, so that
    ``sum(weights * f(nodes))`` approximates the integral of f over
    [t_lo, t_hi].
    """

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def geometric(cls, t_lo, t_hi, n=60):
        if not (0 < t_lo < t_hi):
            raise PotentialError("need 0 < t_lo < t_hi")
        if n < 2:
            raise PotentialError("need at least two ladder nodes")
        u = np.linspace(math.log(t_lo), math.log(t_hi), int(n))
        t = np.exp(u)
        w_log = np.full(n, u[1] - u[0])
        w_log[0] *= 0.5
        w_log[-1] *= 0.5
        return cls(nodes=t, weights=t * w_log)

    @property
    def t_lo(self):
        return float(self.nodes[0])

    @property
    def t_hi(self):
        return float(self.nodes[-1])


def default_ladder(grid: Grid, nu, t_max=50.0, n=60) -> TLadder:
    """Ladder spanning [ (d_max/2)^nu, t_max ].

    The lower end is where the heat kernel's width drops below one grid cell:
    below it, h_t contributes nothing at the nodes outside the reporting
    exclusion radius, so the truncation is harmless there.
    """
    d_max = max(grid.spacings)
    t_lo = (0.5 * d_max) ** nu
    return TLadder.geometric(min(t_lo, t_max / 100.0), t_max, n=n)


# ---------------------------------------------------------------------------
# Kernels


@dataclass
class RieszKernel:
    a: float
    values: GridFunction
    exclusion_radius: float
    ladder: TLadder
    tail_constant: float  # late-time t^{Q/nu} h_t(0), 0 if unavailable


@dataclass
class BesselKernel:
    a: float
    values: GridFunction
    integral: float  # estimate of the full-group integral (= 1 in exact arithmetic)
    l1_estimate: float  # L1 norm of the grid function over the box
    ladder: TLadder


def _require_homogeneous(plan: SpectralPlan):
    nu = plan.spec.nu
    if nu is None:
        raise PotentialError("operator has no homogeneous degree")
    return int(nu)


def riesz_kernel(plan: SpectralPlan, a, ladder=None, source=None) -> RieszKernel:
    """I_a = (1/Gamma(a/nu)) * integral of t^{a/nu - 1} h_t dt, 0 < a < Q.

    The ladder covers [t_lo, t_hi]; beyond t_hi the self-similar decay
    h_t(x) ~ t^{-Q/nu} * C0 integrates to an explicit power-law tail which is
    added analytically (C0 from the late-time continuation).  The value at
    the origin node is a non-finite sentinel, and values inside the exclusion
    radius (3 * max spacing) carry no accuracy claim.
    """
    nu = _require_homogeneous(plan)
    Q = plan.law.algebra.homogeneous_dimension
    if not 0 < a < Q:
        raise PotentialError(f"Riesz exponent must satisfy 0 < a < Q = {Q}, got {a}")
    if ladder is None:
        ladder = default_ladder(plan.grid, nu)
    if source is None:
        source = HeatKernelSource(plan)
    norm = 1.0 / GAMMA(a / nu)
    acc = np.zeros(plan.grid.size)
    for t, w in zip(ladder.nodes, ladder.weights):
        acc += w * (t ** (a / nu - 1.0)) * source(t).values
    tail_c = 0.0
    if np.isfinite(source.t_switch):
        tail_c = source.value_at_origin_late()
        acc += tail_c * (nu / (Q - a)) * ladder.t_hi ** ((a - Q) / nu)
    vals = norm * acc
    vals[plan.grid.origin_index] = np.inf
    return RieszKernel(
        a=float(a),
        values=GridFunction(plan.grid, vals),
        exclusion_radius=3.0 * max(plan.grid.spacings),
        ladder=ladder,
        tail_constant=tail_c,
    )


def bessel_kernel(plan: SpectralPlan, a, ladder=None, source=None) -> BesselKernel:
    """B_a = (1/Gamma(a/nu)) * integral of t^{a/nu - 1} e^{-t} h_t dt, a > 0.

    The reported ``integral`` integrates the in-model mass of h_t against the
    damped weight: below the ladder it uses exact mass conservation, on the
    ladder the measured box mass (or the dilation-exact mass of the
    continuation), and beyond t_hi the e^{-t} damping bounds the remainder.
    """
    nu = _require_homogeneous(plan)
    if a <= 0:
        raise PotentialError(f"Bessel exponent must be positive, got {a}")
    if ladder is None:
        ladder = default_ladder(plan.grid, nu)
    if source is None:
        source = HeatKernelSource(plan)
    s = a / nu
    norm = 1.0 / GAMMA(s)
    acc = np.zeros(plan.grid.size)
    mass_integral = 0.0
    for t, w in zip(ladder.nodes, ladder.weights):
        h = source(t)
        acc += w * (t ** (s - 1.0)) * math.exp(-t) * h.values
        if t <= source.t_switch:
            mass_t = float(haar_integrate(h))
        else:
            mass_t = source.mass_at_switch
        mass_integral += w * (t ** (s - 1.0)) * math.exp(-t) * mass_t
    vals = norm * acc
    # analytic head [0, t_lo] (mass exactly 1 there) and tail bound beyond t_hi
    head = gammainc(s, ladder.t_lo)
    tail = 1.0 - gammainc(s, ladder.t_hi)
    integral = norm * mass_integral + head + tail
    gf = GridFunction(plan.grid, vals)
    return BesselKernel(
        a=float(a),
        values=gf,
        integral=float(integral),
        l1_estimate=lp_norm(gf, 1),
        ladder=ladder,
    )


def riesz_homogeneity_defect(kern: RieszKernel, weights, nu0, Q, r=2, mask=None):
    """Relative defect of I_a(D_r x) = r^{a-Q} I_a(x) at node pairs.

    Only integer dilation factors map grid nodes to grid nodes; nodes inside
    the exclusion radius or whose image leaves ``mask`` are skipped.  Returns
    the median relative defect over the compatible pairs.
    """
    grid = kern.values.grid
    counts = np.array(grid.counts)
    center = (counts - 1) // 2
    idx = np.array(np.unravel_index(np.arange(grid.size), grid.counts)).T - center
    scales = np.array([int(round(float(r) ** int(w))) for w in weights])
    img = idx * scales
    ok = np.all(np.abs(img) <= (counts - 1) // 2 - 0, axis=1)
    pts = grid.points()
    rho = pseudo_norm(pts, weights, nu0)
    ok &= rho >= kern.exclusion_radius
    if mask is not None:
        ok &= mask
    img_flat = np.ravel_multi_index((img[ok] + center).T, grid.counts)
    if mask is not None:
        ok2 = mask[img_flat]
        src = np.flatnonzero(ok)[ok2]
        img_flat = img_flat[ok2]
    else:
        src = np.flatnonzero(ok)
    base = kern.values.values[src]
    image = kern.values.values[img_flat]
    good = np.isfinite(base) & np.isfinite(image) & (np.abs(base) > 0)
    expected = float(r) ** (kern.a - Q)
    rel = np.abs(image[good] / base[good] - expected) / expected
    if rel.size == 0:
        raise PotentialError("no dilation-compatible nodes outside the exclusion radius")
    return float(np.median(rel))


# ---------------------------------------------------------------------------
# Fractional powers


def fractional_apply(plan: SpectralPlan, s, f: GridFunction, homogeneous=False,
                     floor_ratio=1e-12) -> GridFunction:
    """(I+R)^{s/nu} f, or R^{s/nu} f when ``homogeneous``.

    Negative homogeneous powers exclude eigenvalues below
    ``floor_ratio * lam_max`` (their coefficients are dropped); eigenvalues
    more negative than the plan's tolerance raise an error.
    """
    nu = plan.spec.nu
    if nu is None:
        raise PotentialError("operator has no homogeneous degree")
    lam = plan.eigenvalues
    if lam[0] < -1e-6 * max(abs(lam[-1]), 1.0):
        raise PotentialError(f"negative eigenvalue {lam[0]} beyond tolerance")
    lam = np.clip(lam, 0.0, None)
    power = s / nu
    if homogeneous:
        if s < 0:
            floor = floor_ratio * max(lam[-1], 1.0)
            g = np.where(lam > floor, np.power(np.maximum(lam, floor), power), 0.0)
        else:
            g = np.power(lam, power)
    else:
        g = np.power(1.0 + lam, power)
    return plan.apply_multiplier(lambda _: g, f)


def bessel_apply_quadrature(plan: SpectralPlan, a, f: GridFunction, ladder=None) -> GridFunction:
    """(I+R)^{-a/nu} f via the damped heat ladder (quadrature route).

    Cross-validates ``fractional_apply(plan, -a, f)``: the exact identity is
    (I+R)^{-a/nu} = (1/Gamma(a/nu)) * integral of t^{a/nu-1} e^{-t} e^{-tR} dt.
    """
    nu = _require_homogeneous(plan)
    if a <= 0:
        raise PotentialError("quadrature route needs a > 0")
    if ladder is None:
        ladder = TLadder.geometric(1e-8, 50.0, n=600)
    s = a / nu
    lam = np.clip(plan.eigenvalues, 0.0, None)
    # analytic head for (0, t_lo], where the integrand is ~ t^{s-1}
    g = (ladder.t_lo**s / s) * np.exp(-ladder.t_lo * (1.0 + lam))
    for t, w in zip(ladder.nodes, ladder.weights):
        g += w * (t ** (s - 1.0)) * np.exp(-t * (1.0 + lam))
    g /= GAMMA(s)
    return plan.apply_multiplier(lambda _: g, f)
