"""Sobolev norms and empirical ratio probes.

The inhomogeneous norm is ||(I+R)^{s/nu} f||_p through the spectral plan; the
homogeneous flavor uses R^{s/nu}; the integer flavor is the Goodman-style sum
||f||_p + sum over words of weighted degree s of ||X^alpha f||_p.  Probes
report min/max norm ratios over a reproducible family of smooth bumps: the
equivalence constants are empirical, so the observed intervals serve as
regression baselines rather than proved bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import DiffOpExpr, FieldMatrices, apply_diffop
from .geometry import Grid, GridFunction, dilate, lp_norm
from .heatflow import SpectralPlan
from .potentials import fractional_apply


class SobolevError(ValueError):
    pass


FLAVORS = ("inhomogeneous", "homogeneous", "integer")


@dataclass
class SobolevNormSpec:
    """Order s, integrability p and flavor of a Sobolev norm on a plan's grid."""

    plan: SpectralPlan
    s: float
    p: float  # exponent in (1, inf) or np.inf
    flavor: str = "inhomogeneous"

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise SobolevError(f"unknown flavor {self.flavor!r}; choose from {FLAVORS}")
        p = self.p
        if not (p == np.inf or p == "inf" or (isinstance(p, (int, float)) and p > 1)):
            raise SobolevError(f"exponent p must lie in (1, inf) or be inf, got {p}")
        if self.flavor == "integer":
            nu = self.plan.spec.nu
            if nu is None or self.s < 0 or self.s % nu != 0:
                raise SobolevError(
                    f"integer flavor requires s to be a nonnegative multiple of nu={nu}"
                )


def words_of_degree(weights, degree):
    """All words over the generators with total weighted degree ``degree``."""
    weights = tuple(int(w) for w in weights)
    out = []

    def rec(prefix, remaining):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for j, w in enumerate(weights):
            if w <= remaining:
                rec(prefix + [j], remaining - w)

    rec([], int(degree))
    return out


def _lp(spec: SobolevNormSpec, g: GridFunction):
    if spec.p == np.inf or spec.p == "inf":
        # sup norms carry no claim on the boundary stencil band
        return lp_norm(g, np.inf, mask=spec.plan.mask)
    return lp_norm(g, spec.p)


def sobolev_norm(spec: SobolevNormSpec, f: GridFunction, cache=None):
    """The chosen Sobolev norm of f; s=0 inhomogeneous reduces to plain L^p."""
    if spec.flavor == "integer":
        law = spec.plan.law
        fm = cache if cache is not None else FieldMatrices(law, f.grid)
        total = _lp(spec, f)
        for word in words_of_degree(law.algebra.weights, spec.s):
            g = GridFunction(f.grid, fm.apply_word(word, f.values))
            total += _lp(spec, g)
        return float(total)
    g = fractional_apply(spec.plan, spec.s, f, homogeneous=(spec.flavor == "homogeneous"))
    return float(_lp(spec, g))


# ---------------------------------------------------------------------------
# Test family


@dataclass
class TestFamily:
    """Reproducible smooth bumps: Gaussian envelopes with polynomial factors.

    Members are kept as callables so that dilated copies f(D_r x) can be
    sampled exactly on any grid.
    """

    grid: Grid
    members: list  # callables (M, n) -> (M,)
    seed: int

    def gridfunctions(self):
        pts = self.grid.points()
        return [GridFunction(self.grid, m(pts)) for m in self.members]

    def member_on(self, i, grid: Grid):
        return GridFunction(grid, self.members[i](grid.points()))

    def dilated_member(self, i, r, weights):
        fn = self.members[i]
        w = np.asarray(weights, dtype=float)

        def g(pts):
            return fn(np.asarray(pts, dtype=float) * (float(r) ** w))

        return g


def _bump(center, width, lin, quad):
    def fn(pts):
        t = (np.asarray(pts, dtype=float) - center) / width
        poly = 1.0 + t @ lin + (t**2) @ quad
        return poly * np.exp(-np.sum(t**2, axis=-1))

    return fn


def make_test_family(grid: Grid, n=50, seed=0xC0FFEE) -> TestFamily:
    """n Gaussian-times-polynomial bumps with quasi-random centers and widths.

    Centers stay within the inner quarter of the box and widths are a fraction
    of the half-widths, so every member is numerically negligible on the
    boundary band.
    """
    rng = np.random.default_rng(seed)
    hw = np.asarray(grid.half_widths, dtype=float)
    members = []
    for _ in range(int(n)):
        center = rng.uniform(-0.25, 0.25, grid.ndim) * hw
        width = rng.uniform(0.12, 0.3, grid.ndim) * hw
        lin = rng.standard_normal(grid.ndim) * 0.5
        quad = rng.standard_normal(grid.ndim) * 0.25
        members.append(_bump(center, width, lin, quad))
    return TestFamily(grid=grid, members=members, seed=seed)


# ---------------------------------------------------------------------------
# Ratio probes


@dataclass
class RatioProbe:
    """Observed norm-ratio interval for a pair of Sobolev norms."""

    numerator: SobolevNormSpec
    denominator: SobolevNormSpec
    family_size: int
    min_ratio: float
    max_ratio: float

    def __post_init__(self):
        if not (0 < self.min_ratio <= self.max_ratio < np.inf):
            raise SobolevError("ratio interval must be positive and finite")


def equivalence_probe(specA: SobolevNormSpec, specB: SobolevNormSpec, family: TestFamily) -> RatioProbe:
    """min/max of ||f||_A / ||f||_B over the family."""
    if specA.plan.grid != specB.plan.grid:
        raise SobolevError("both norms must live on the same grid")
    cache = FieldMatrices(specA.plan.law, specA.plan.grid)
    ratios = []
    for f in family.gridfunctions():
        nb = sobolev_norm(specB, f, cache=cache)
        if nb == 0:
            raise SobolevError("family member has zero denominator norm")
        ratios.append(sobolev_norm(specA, f, cache=cache) / nb)
    return RatioProbe(
        numerator=specA,
        denominator=specB,
        family_size=len(ratios),
        min_ratio=float(min(ratios)),
        max_ratio=float(max(ratios)),
    )


def _dilated_pair(plan, family, i, r):
    """Member i as f(D_r x), sampled on the dilation image of the grid.

    Evaluating the dilated copy on the image grid (with the exactly rescaled
    plan) keeps it equally resolved at every scale; on a fixed grid the copies
    leave the resolved band already at r = 4 for weight-2 coordinates.
    """
    from .heatflow import dilated_plan

    weights = plan.law.algebra.weights
    plan_r = dilated_plan(plan, 1.0 / r)
    fn = family.dilated_member(i, r, weights)
    return plan_r, GridFunction(plan_r.grid, fn(plan_r.grid.points()))


def embedding_probe(plan: SpectralPlan, p, q, b, a, family: TestFamily,
                    dilations=(0.25, 0.5, 1.0, 2.0, 4.0), n_dilated=5):
    """sup of ||f||_{L^q_a} / ||f||_{L^p_b} under the exponent relation.

    Requires 1 < p < q < inf and b - a = Q(1/p - 1/q); other inputs are
    refused (no claim holds off the relation).  The first ``n_dilated`` family
    members are also stressed across scales: each is re-sampled as f(D_r x)
    on the dilation image of the grid, where the exponent relation makes the
    homogeneous-seminorm form of the ratio scale-free, and the reported drift
    is the max/min spread of that form across r.  Returns (sup ratio, drift).
    """
    if not (1 < p < q < np.inf):
        raise SobolevError(f"need 1 < p < q < inf, got p={p}, q={q}")
    Q = plan.law.algebra.homogeneous_dimension
    if abs((b - a) - Q * (1.0 / p - 1.0 / q)) > 1e-12:
        raise SobolevError(
            f"exponent relation violated: b-a={b - a} but Q(1/p-1/q)={Q * (1 / p - 1 / q)}"
        )
    spec_num = SobolevNormSpec(plan, a, q)
    spec_den = SobolevNormSpec(plan, b, p)

    def ratio(f, num_spec, den_spec):
        den = sobolev_norm(den_spec, f)
        if den == 0:
            raise SobolevError("family member has zero denominator norm")
        return sobolev_norm(num_spec, f) / den

    sup = max(ratio(f, spec_num, spec_den) for f in family.gridfunctions())
    drift = 1.0
    for i in range(min(n_dilated, len(family.members))):
        vals = []
        for r in dilations:
            plan_r, fr = _dilated_pair(plan, family, i, r)
            vals.append(
                ratio(
                    fr,
                    SobolevNormSpec(plan_r, a, q, "homogeneous"),
                    SobolevNormSpec(plan_r, b, p, "homogeneous"),
                )
            )
        drift = max(drift, max(vals) / min(vals))
    return float(sup), float(drift)


def sup_embedding_probe(plan: SpectralPlan, p, s, family: TestFamily,
                        dilations=(0.25, 0.5, 1.0, 2.0, 4.0), n_dilated=5):
    """sup of ||f||_inf / ||f||_{L^p_s}, defined only for s > Q/p.

    Returns (sup ratio, drift): the drift stresses the first members across
    scales on dilation-image grids, in the scale-covariant form — the
    homogeneous-seminorm ratio carries the exact dilation factor r^{s - Q/p},
    which is divided out before comparing across r.
    """
    Q = plan.law.algebra.homogeneous_dimension
    if not s > Q / p:
        raise SobolevError(f"no boundedness claim for s={s} <= Q/p={Q / p}")
    spec_den = SobolevNormSpec(plan, s, p)
    sup = 0.0
    for f in family.gridfunctions():
        den = sobolev_norm(spec_den, f)
        if den == 0:
            raise SobolevError("family member has zero denominator norm")
        sup = max(sup, lp_norm(f, np.inf, mask=plan.mask) / den)
    drift = 1.0
    for i in range(min(n_dilated, len(family.members))):
        vals = []
        for r in dilations:
            plan_r, fr = _dilated_pair(plan, family, i, r)
            den = sobolev_norm(SobolevNormSpec(plan_r, s, p, "homogeneous"), fr)
            num = lp_norm(fr, np.inf, mask=plan_r.mask)
            vals.append((num / den) / float(r) ** (Q / p - s))
        drift = max(drift, max(vals) / min(vals))
    return float(sup), float(drift)


def bump_multiplication_probe(spec: SobolevNormSpec, phi: GridFunction, family: TestFamily):
    """sup of ||f * phi||_{L^p_s} / ||f||_{L^p_s} for a fixed bump phi."""
    if phi.grid != spec.plan.grid:
        raise SobolevError("bump must live on the plan's grid")
    cache = FieldMatrices(spec.plan.law, spec.plan.grid)
    sup = 0.0
    for f in family.gridfunctions():
        den = sobolev_norm(spec, f, cache=cache)
        if den == 0:
            raise SobolevError("family member has zero norm")
        sup = max(sup, sobolev_norm(spec, f * phi, cache=cache) / den)
    return float(sup)


def type0_probe(plan: SpectralPlan, word, family: TestFamily):
    """Empirical L2 -> L2 ratio of f -> R^{-deg/nu} X^alpha f for [alpha] = deg.

    The composed operator has homogeneous degree zero; its discrete ratio over
    the family stays bounded and is frozen as a regression value.
    """
    weights = plan.law.algebra.weights
    deg = sum(int(weights[j]) for j in word)
    cache = FieldMatrices(plan.law, plan.grid)
    sup = 0.0
    for f in family.gridfunctions():
        den = lp_norm(f, 2)
        if den == 0:
            raise SobolevError("family member has zero norm")
        g = GridFunction(plan.grid, cache.apply_word(tuple(word), f.values))
        h = fractional_apply(plan, -float(deg), g, homogeneous=True)
        sup = max(sup, lp_norm(h, 2) / den)
    return float(sup)


# ---------------------------------------------------------------------------
# Sharpness table for the weights-(3,5,8) group


def sharpness_probe_H1tilde(s_values=(6, 8, 10), r_values=(1.0, 2.0, 4.0),
                            base_grid=None, law=None, member=None):
    """Ratios ||(X^2+Y^2) f_r||_2 / (Goodman norm of order s) on weights (3,5,8).

    f_r = f(D_r x) with the anisotropic dilations; each r gets the dilation
    image of the base grid so the bump stays equally resolved.  The order-s
    denominator is ||f||_2 + sum over words of weighted degree s.  The words
    of degree 10 include Y^2, which matches the numerator's fastest-scaling
    term, so that column stays bounded in r, while lower orders grow.
    """
    from .algebra import bch_group_law, builtin_group

    if law is None:
        law = bch_group_law(builtin_group("heisenberg358"))
    weights = law.algebra.weights
    if tuple(int(w) for w in weights) != (3, 5, 8):
        raise SobolevError("sharpness table is specific to dilation weights (3, 5, 8)")
    if base_grid is None:
        base_grid = Grid((3.0, 3.0, 3.0), (25, 25, 25))
    if member is None:
        member = _bump(np.zeros(3), np.full(3, 0.9), np.zeros(3), np.zeros(3))
    L = -(DiffOpExpr.generator(0) ** 2) - (DiffOpExpr.generator(1) ** 2)
    table = {}
    for s in s_values:
        col = []
        for r in r_values:
            grid_r = base_grid.dilated(1.0 / r, weights)
            fr = GridFunction(grid_r, member(dilate(r, grid_r.points(), weights)))
            cache = FieldMatrices(law, grid_r)
            num = lp_norm(apply_diffop(L, law, fr, cache=cache), 2)
            den = lp_norm(fr, 2)
            for word in words_of_degree(weights, s):
                den += lp_norm(GridFunction(grid_r, cache.apply_word(word, fr.values)), 2)
            col.append(num / den)
        table[s] = tuple(col)
    return table
