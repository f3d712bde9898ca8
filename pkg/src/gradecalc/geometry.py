"""Dilations, pseudo-norms, grids, Haar integration and group convolution.

The Haar measure in exponential coordinates is Lebesgue measure, so all
integrals are weighted Riemann sums over an anisotropic box grid.  Group
convolution is the direct O(N^2) sum with multilinear interpolation at
off-grid points; values outside the box contribute zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import qmc


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Dilations and pseudo-norms


def dilate(r, x, weights):
    """Anisotropic dilation D_r x = (r^{v_1} x_1, ..., r^{v_n} x_n)."""
    if r <= 0:
        raise GeometryError("dilation parameter must be positive")
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    return x * (float(r) ** w)


def pseudo_norm(x, weights, nu0):
    """Homogeneous pseudo-norm |x| = (sum_j x_j^{2*nu0/v_j})^{1/(2*nu0)}."""
    weights = tuple(int(w) for w in weights)
    for w in weights:
        if nu0 % w != 0:
            raise GeometryError(f"nu0={nu0} is not a common multiple of weights {weights}")
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape[:-1], dtype=float)
    for j, w in enumerate(weights):
        e = 2 * nu0 // w
        acc = acc + np.abs(x[..., j]) ** e
    return acc ** (1.0 / (2 * nu0))


def default_nu0(weights):
    """Smallest common multiple of the dilation weights."""
    return math.lcm(*[int(w) for w in weights])


# ---------------------------------------------------------------------------
# Grids and grid functions


@dataclass(frozen=True)
class Grid:
    """Anisotropic box grid with 0 as a node (all point counts odd)."""

    half_widths: tuple
    counts: tuple

    MAX_POINTS = 20_000

    def __post_init__(self):
        if len(self.half_widths) != len(self.counts):
            raise GeometryError("half_widths and counts must have equal length")
        for N in self.counts:
            if N < 3 or N % 2 == 0:
                raise GeometryError("point counts must be odd and >= 3")
        if self.size > self.MAX_POINTS:
            raise GeometryError(
                f"grid has {self.size} points, budget is {self.MAX_POINTS}"
            )

    @classmethod
    def from_scale(cls, weights, scale, counts):
        """Half-width R^{v_j} along axis j for a single scale parameter R."""
        hw = tuple(float(scale) ** int(w) for w in weights)
        return cls(half_widths=hw, counts=tuple(counts))

    @property
    def ndim(self):
        return len(self.counts)

    @property
    def size(self):
        return int(np.prod(self.counts))

    @property
    def spacings(self):
        return tuple(2.0 * R / (N - 1) for R, N in zip(self.half_widths, self.counts))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacings))

    def axis(self, j):
        return np.linspace(-self.half_widths[j], self.half_widths[j], self.counts[j])

    @property
    def axes(self):
        return [self.axis(j) for j in range(self.ndim)]

    def points(self):
        """All nodes as an array of shape (size, ndim), C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def origin_index(self):
        idx = tuple((N - 1) // 2 for N in self.counts)
        return int(np.ravel_multi_index(idx, self.counts))

    def dilated(self, r, weights):
        """The image of this grid under the dilation D_r (same point counts)."""
        hw = tuple(R * float(r) ** int(w) for R, w in zip(self.half_widths, weights))
        return Grid(half_widths=hw, counts=self.counts)

    def interior_mask(self, margin=2):
        """Flat boolean mask of nodes at least ``margin`` nodes from the boundary."""
        if isinstance(margin, int):
            margin = (margin,) * self.ndim
        mask = np.ones(self.counts, dtype=bool)
        for j, m in enumerate(margin):
            idx = np.arange(self.counts[j])
            keep = (idx >= m) & (idx <= self.counts[j] - 1 - m)
            shape = [1] * self.ndim
            shape[j] = -1
            mask &= keep.reshape(shape)
        return mask.ravel()


@dataclass
class GridFunction:
    """Samples of a function over a grid (flat array, C order)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.size,):
            raise GeometryError("value count does not match grid")

    @classmethod
    def from_callable(cls, grid, fn):
        pts = grid.points()
        return cls(grid, np.asarray(fn(pts), dtype=complex if np.iscomplexobj(fn(pts[:1])) else float))

    def reshape(self):
        return self.values.reshape(self.grid.counts)

    def interpolator(self, fill_value=0.0):
        return RegularGridInterpolator(
            self.grid.axes,
            self.reshape(),
            method="linear",
            bounds_error=False,
            fill_value=fill_value,
        )

    def flipped(self):
        """f(x^{-1}) = f(-x); exact on the symmetric grid."""
        rev = self.reshape()[(slice(None, None, -1),) * self.grid.ndim]
        return GridFunction(self.grid, np.ascontiguousarray(rev).ravel())

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)


def haar_integrate(f: GridFunction):
    """Riemann sum against Haar (= Lebesgue) measure."""
    return f.grid.cell_volume * f.values.sum()


def inner_product(f: GridFunction, g: GridFunction):
    """<f, g> = int f conj(g)."""
    return f.grid.cell_volume * np.vdot(g.values, f.values)


def lp_norm(f: GridFunction, p, mask=None):
    """L^p norm; p = inf returns the max modulus (over ``mask`` if given)."""
    v = f.values if mask is None else f.values[mask]
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    p = float(p)
    if p < 1:
        raise GeometryError("p must be >= 1")
    cell = f.grid.cell_volume
    return float((cell * np.sum(np.abs(v) ** p)) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Quasi-triangle inequality estimator


def quasi_triangle_constant(law, nu0, samples, seed=0xC0FFEE, chunk=100_000):
    """Empirical C in |xy| <= C(|x| + |y|) over pairs on the unit sphere.

    The sample stream is deterministic in ``seed``, so the estimate with k
    samples is the max over a prefix of the stream.
    """
    if samples < 1:
        raise GeometryError("need at least one sample")
    weights = law.algebra.weights
    rng = np.random.default_rng(seed)
    best = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x = rng.standard_normal((m, law.algebra.n))
        y = rng.standard_normal((m, law.algebra.n))
        x = project_to_sphere(x, weights, nu0)
        y = project_to_sphere(y, weights, nu0)
        prod = law.multiply_arrays(x, y)
        ratios = pseudo_norm(prod, weights, nu0) / 2.0
        best = max(best, float(ratios.max()))
        done += m
    return max(best, 1.0) if best > 0 else best


def project_to_sphere(x, weights, nu0):
    """x -> D_{1/|x|} x, mapping nonzero points onto the unit pseudo-sphere."""
    x = np.asarray(x, dtype=float)
    rho = pseudo_norm(x, weights, nu0)
    rho = np.where(rho == 0, 1.0, rho)
    w = np.asarray(weights, dtype=float)
    return x / rho[..., None] ** w


# ---------------------------------------------------------------------------
# Polar decomposition quadrature


@dataclass
class SphereQuadrature:
    """Nodes and weights approximating the surface measure on {|x| = 1}."""

    weights_vec: tuple
    nu0: int
    nodes: np.ndarray
    node_weights: np.ndarray

    @property
    def total_measure(self):
        return float(self.node_weights.sum())

    @classmethod
    def build(cls, weights, nu0, n_samples=1 << 15, seed=0xC0FFEE):
        """Monte-Carlo construction from low-discrepancy samples in the unit ball.

        Under polar decomposition, uniform measure on the pseudo-ball has
        angular marginal proportional to the sphere measure, and the sphere
        measure's total mass is Q * vol(ball).
        """
        weights = tuple(int(w) for w in weights)
        n = len(weights)
        Q = sum(weights)
        sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
        u = sampler.random(n_samples)
        x = 2.0 * u - 1.0  # the unit pseudo-ball sits inside [-1, 1]^n
        rho = pseudo_norm(x, weights, nu0)
        keep = (rho <= 1.0) & (rho > 0)
        x = x[keep]
        vol_ball = (2.0**n) * keep.mean()
        sigma_total = Q * vol_ball
        nodes = project_to_sphere(x, weights, nu0)
        wts = np.full(len(nodes), sigma_total / len(nodes))
        return cls(weights_vec=weights, nu0=nu0, nodes=nodes, node_weights=wts)


def polar_integral_check(fn, grid, quad, r_max=None, n_r=600):
    """Return (lhs, rhs) for the polar-coordinates identity.

    lhs integrates ``fn`` over the grid box directly; rhs integrates
    r^{Q-1} * f(D_r y) against the sphere quadrature and a radial trapezoid.
    """
    weights = quad.weights_vec
    Q = sum(weights)
    lhs = float(np.real(haar_integrate(GridFunction(grid, fn(grid.points())))))

    if r_max is None:
        r_max = pseudo_norm(np.array(grid.half_widths), weights, quad.nu0) * 1.1
    rs = np.linspace(0.0, r_max, n_r)[1:]
    vals = np.empty(len(rs))
    w = np.asarray(weights, dtype=float)
    for i, r in enumerate(rs):
        pts = quad.nodes * (r**w)
        vals[i] = float(np.real(fn(pts)) @ quad.node_weights)
    rhs = float(np.trapezoid(vals * rs ** (Q - 1), rs))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Group convolution


def group_convolve(law, f: GridFunction, g: GridFunction, zero_tol=0.0, chunk=48):
    """(f * g)(x) = sum_y f(y) g(y^{-1} x) dV, with multilinear interpolation.

    Points y^{-1} x outside the box contribute zero.  Nodes where f vanishes
    (|f| <= zero_tol * max|f|) are skipped.
    """
    if f.grid != g.grid:
        raise GeometryError("f and g must live on the same grid")
    grid = f.grid
    pts = grid.points()
    fvals = f.values
    interp = g.interpolator()
    out = np.zeros(grid.size, dtype=np.result_type(f.values, g.values))

    thresh = zero_tol * np.max(np.abs(fvals)) if zero_tol > 0 else 0.0
    active = np.flatnonzero(np.abs(fvals) > thresh)
    vol = grid.cell_volume
    for start in range(0, len(active), chunk):
        idx = active[start : start + chunk]
        y = pts[idx]  # (B, n)
        # z = (-y) * x, broadcast over all grid points
        z = law.multiply_arrays(-y[:, None, :], pts[None, :, :])
        gi = interp(z.reshape(-1, grid.ndim)).reshape(len(idx), grid.size)
        out += fvals[idx] @ gi
    return GridFunction(grid, out * vol)


def scaled_bump(phi: GridFunction, t, weights):
    """phi_t(x) = t^{-Q} phi(D_{1/t} x), resampled on phi's grid."""
    grid = phi.grid
    Q = sum(int(w) for w in weights)
    pts = dilate(1.0 / t, grid.points(), weights)
    vals = phi.interpolator()(pts) * t ** (-Q)
    return GridFunction(grid, vals)
