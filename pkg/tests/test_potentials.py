"""Riesz/Bessel kernels, fractional powers, classical oracles."""

import math

import numpy as np
import pytest

from gradecalc.geometry import GridFunction, group_convolve, lp_norm, pseudo_norm
from gradecalc.potentials import (
    GAMMA,
    GammaEvaluator,
    PotentialError,
    TLadder,
    bessel_apply_quadrature,
    bessel_kernel,
    default_ladder,
    fractional_apply,
    riesz_homogeneity_defect,
    riesz_kernel,
)
from gradecalc.sobolev import make_test_family

SEED = 0xC0FFEE


# ---------------------------------------------------------------------------
# Gamma and ladders


def test_gamma_evaluator():
    g = GammaEvaluator()
    assert g(1.0) == 1.0
    assert g(5) == 24.0
    assert g(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    # functional equation on a few points
    for x in (0.3, 1.7, 4.2):
        assert g(x + 1) == pytest.approx(x * g(x), rel=1e-12)
    with pytest.raises(PotentialError):
        g(0.0)
    with pytest.raises(PotentialError):
        g(-1.5)


def test_tladder_quadrature():
    # integral of t e^{-t} over (0, inf) = 1; the ladder covers [t_lo, t_hi]
    lad = TLadder.geometric(1e-6, 60.0, n=400)
    val = float(np.sum(lad.weights * lad.nodes * np.exp(-lad.nodes)))
    assert val == pytest.approx(1.0, rel=1e-4)
    assert lad.t_lo == pytest.approx(1e-6)
    assert lad.t_hi == pytest.approx(60.0)
    with pytest.raises(PotentialError):
        TLadder.geometric(1.0, 0.5)
    with pytest.raises(PotentialError):
        TLadder.geometric(0.1, 1.0, n=1)


def test_default_ladder_scales_with_grid(ab1_pot_plan):
    lad = default_ladder(ab1_pot_plan.grid, 2)
    d = max(ab1_pot_plan.grid.spacings)
    assert lad.t_lo == pytest.approx((0.5 * d) ** 2)
    assert lad.t_hi == pytest.approx(50.0)


# ---------------------------------------------------------------------------
# Bessel kernels: 1-D oracle and semigroup law


def test_bessel_oracle_1d(ab1_pot_plan, ab1_pot_source):
    # classical closed form on the line: B_2(x) = exp(-|x|)/2
    k = bessel_kernel(ab1_pot_plan, 2.0, source=ab1_pot_source)
    x = ab1_pot_plan.grid.points()[:, 0]
    sel = (np.abs(x) >= 0.3) & (np.abs(x) <= 4.0)
    exact = 0.5 * np.exp(-np.abs(x))
    rel = np.abs(k.values.values - exact)[sel] / exact[sel]
    assert rel.max() < 2e-2


def test_bessel_integrals(ab1_pot_plan, ab1_pot_source):
    for a in (1.0, 2.0, 3.0):
        k = bessel_kernel(ab1_pot_plan, a, source=ab1_pot_source)
        assert abs(k.integral - 1.0) < 1e-2
        assert k.l1_estimate == pytest.approx(1.0, abs=2e-2)


def test_bessel_convolution_semigroup(ab1_pot_plan, ab1_pot_source, ab1_law):
    k1 = bessel_kernel(ab1_pot_plan, 1.0, source=ab1_pot_source)
    k2 = bessel_kernel(ab1_pot_plan, 2.0, source=ab1_pot_source)
    conv = group_convolve(ab1_law, k1.values, k1.values, zero_tol=1e-10)
    assert lp_norm(conv - k2.values, 1) < 5e-2


def test_bessel_rejects_bad_exponent(ab1_pot_plan):
    with pytest.raises(PotentialError):
        bessel_kernel(ab1_pot_plan, 0.0)
    with pytest.raises(PotentialError):
        bessel_kernel(ab1_pot_plan, -1.0)


# ---------------------------------------------------------------------------
# Riesz kernels: 3-D Newtonian oracle and homogeneity


def test_riesz_newtonian_oracle(ab3_pot_plan, ab3_pot_source):
    # classical closed form in 3-space: I_2(x) = 1/(4 pi |x|)
    k = riesz_kernel(ab3_pot_plan, 2.0, source=ab3_pot_source)
    pts = ab3_pot_plan.grid.points()
    r = np.linalg.norm(pts, axis=1)
    sel = (r >= 0.3) & (r <= 1.0)
    exact = 1.0 / (4 * np.pi * np.where(r == 0, 1.0, r))
    rel = np.abs(k.values.values - exact)[sel] / exact[sel]
    assert rel.max() < 3e-2


def test_riesz_homogeneity(ab3_pot_plan, ab3_pot_source):
    k = riesz_kernel(ab3_pot_plan, 2.0, source=ab3_pot_source)
    defect = riesz_homogeneity_defect(
        k, (1, 1, 1), 1, 3, r=2, mask=ab3_pot_plan.mask
    )
    assert defect < 2e-2


def test_riesz_range_validation(ab3_pot_plan):
    with pytest.raises(PotentialError):
        riesz_kernel(ab3_pot_plan, 3.0)  # a = Q
    with pytest.raises(PotentialError):
        riesz_kernel(ab3_pot_plan, 0.0)


def test_riesz_origin_sentinel(ab1_pot_plan, ab1_pot_source):
    k = riesz_kernel(ab1_pot_plan, 0.5, source=ab1_pot_source)
    assert not np.isfinite(k.values.values[ab1_pot_plan.grid.origin_index])
    assert k.exclusion_radius == pytest.approx(3.0 * max(ab1_pot_plan.grid.spacings))


# ---------------------------------------------------------------------------
# Fractional powers


def test_fractional_roundtrip(ab1_pot_plan):
    fam = make_test_family(ab1_pot_plan.grid, n=3, seed=SEED)
    for f in fam.gridfunctions():
        base = GridFunction(
            ab1_pot_plan.grid, np.where(ab1_pot_plan.mask, f.values, 0.0)
        )
        for s in (0.7, 1.5, 3.0):
            rt = fractional_apply(
                ab1_pot_plan, -s, fractional_apply(ab1_pot_plan, s, f)
            )
            assert lp_norm(rt - base, 2) / lp_norm(base, 2) < 1e-8


def test_fractional_additivity(ab1_pot_plan):
    f = make_test_family(ab1_pot_plan.grid, n=1, seed=SEED).gridfunctions()[0]
    ab = fractional_apply(ab1_pot_plan, 0.8, fractional_apply(ab1_pot_plan, 1.2, f))
    direct = fractional_apply(ab1_pot_plan, 2.0, f)
    assert lp_norm(ab - direct, 2) / lp_norm(direct, 2) < 1e-10


def test_quadrature_matches_spectral(ab1_pot_plan):
    # Gamma-integral representation of (I+R)^{-a/nu} against the multiplier
    f = make_test_family(ab1_pot_plan.grid, n=1, seed=SEED).gridfunctions()[0]
    for a in (1.0, 2.0):
        gap = bessel_apply_quadrature(ab1_pot_plan, a, f) - fractional_apply(
            ab1_pot_plan, -a, f
        )
        assert lp_norm(gap, 2) / lp_norm(f, 2) < 1e-3


def test_homogeneous_negative_power_riesz_consistency(ab3_pot_plan, ab3_pot_source):
    # applying R^{-1} to a mask-supported bump equals convolution with I_2
    # only in the continuum; here cross-check the multiplier route against
    # the Balakrishnan-style time integral of the heat flow
    from gradecalc.heatflow import heat_apply

    f = make_test_family(ab3_pot_plan.grid, n=1, seed=SEED).gridfunctions()[0]
    target = fractional_apply(ab3_pot_plan, -2.0, f, homogeneous=True)
    lam = np.clip(ab3_pot_plan.eigenvalues, 0, None)
    lad = TLadder.geometric(1e-5, 30.0, n=300)
    g = np.zeros_like(lam)
    for t, w in zip(lad.nodes, lad.weights):
        g += w * np.exp(-t * lam)
    quad = ab3_pot_plan.apply_multiplier(lambda _: g, f)
    assert lp_norm(quad - target, 2) / lp_norm(target, 2) < 1e-3
