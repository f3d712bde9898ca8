"""Heat semigroup: plans, kernels, identity checks, oracles."""

import numpy as np
import pytest

from gradecalc.defaults import heat_defaults
from gradecalc.geometry import Grid, GridFunction, haar_integrate, lp_norm
from gradecalc.heatflow import (
    HeatError,
    HeatKernelSource,
    build_family,
    check_mass,
    check_self_similarity,
    check_semigroup,
    check_symmetry,
    dilated_plan,
    heat_apply,
    heat_kernel,
    spectral_plan,
)
from gradecalc.calculus import sublaplacian

SEED = 0xC0FFEE


# ---------------------------------------------------------------------------
# Oracles


def test_gaussian_oracle_1d(ab1_pot_plan):
    # independent closed form: h_t(x) = exp(-x^2/4t)/sqrt(4 pi t)
    g = ab1_pot_plan.grid
    x = g.points()[:, 0]
    for t in (0.1, 0.2, 0.5):
        h = heat_kernel(ab1_pot_plan, t).values
        exact = np.exp(-(x**2) / (4 * t)) / np.sqrt(4 * np.pi * t)
        err = np.max(np.abs(h - exact)[ab1_pot_plan.mask]) / exact.max()
        assert err < 1e-2, f"t={t}: {err}"


def test_gaussian_oracle_3d(ab3_pot_plan):
    # resolved times: the kernel is a few cells wide yet well inside the box
    g = ab3_pot_plan.grid
    pts = g.points()
    r2 = np.sum(pts**2, axis=1)
    for t in (0.06, 0.07):
        h = heat_kernel(ab3_pot_plan, t).values
        exact = np.exp(-r2 / (4 * t)) / (4 * np.pi * t) ** 1.5
        err = np.max(np.abs(h - exact)[ab3_pot_plan.mask]) / exact.max()
        assert err < 1e-2, f"t={t}: {err}"


def _mehler(t, pts, lam_max=80.0, n_lam=3000):
    """Independent oscillatory-integral formula for the stratified kernel

    on weights (1,1,2): h_t(x,y,u) =
    (1/pi) * int_0^inf cos(lam u) * lam/(4 pi sinh(lam t))
                      * exp(-(lam/4) coth(lam t) (x^2+y^2)) dlam.
    """
    lam = np.linspace(1e-6, lam_max, n_lam)
    A = lam / (4 * np.pi * np.sinh(lam * t))
    cth = lam / np.tanh(lam * t)
    out = np.empty(len(pts))
    for i in range(0, len(pts), 500):
        P = pts[i : i + 500]
        rho2 = P[:, 0] ** 2 + P[:, 1] ** 2
        integ = (
            np.cos(np.outer(P[:, 2], lam))
            * A[None, :]
            * np.exp(-0.25 * np.outer(rho2, cth))
        )
        out[i : i + 500] = np.trapezoid(integ, lam, axis=1) / np.pi
    return out


def test_mehler_oracle_heisenberg(h1_heat_plan):
    t = 0.15
    g = h1_heat_plan.grid
    pts = g.points()
    h = heat_kernel(h1_heat_plan, t).values
    sub = h1_heat_plan.mask & (np.arange(g.size) % 3 == 0)  # thin out for speed
    ref = _mehler(t, pts[sub])
    assert np.max(np.abs(h[sub] - ref)) / ref.max() < 5e-2


# ---------------------------------------------------------------------------
# Identity checks


def test_mass_conservation_1d(ab1_heat_plan):
    d = heat_defaults("abelian1")
    assert max(check_mass(heat_kernel(ab1_heat_plan, t)) for t in d.mass_times) < 1e-3


def test_symmetry_1d(ab1_heat_plan):
    assert check_symmetry(heat_kernel(ab1_heat_plan, 0.15)) < 1e-3


def test_semigroup_1d(ab1_heat_plan, ab1_law):
    fam = build_family(ab1_heat_plan, (0.1, 0.2))
    defect = check_semigroup(fam, ab1_law, mask=ab1_heat_plan.mask)
    assert defect < 1e-2


def test_semigroup_requires_pairs(ab1_heat_plan, ab1_law):
    fam = build_family(ab1_heat_plan, (0.1, 0.3))
    with pytest.raises(HeatError):
        check_semigroup(fam, ab1_law)


def test_self_similarity_1d(ab1_heat_plan, ab1_law):
    t1, t2 = 0.1, 0.2
    r = (t2 / t1) ** 0.5
    spec = sublaplacian(ab1_law.algebra)
    grid2 = ab1_heat_plan.grid.dilated(r, (1,))
    plan2 = spectral_plan(spec, ab1_law, grid2, margin=4, reg_strength=0.05)
    assert check_self_similarity(ab1_heat_plan, plan2, t1, t2) < 2e-2


def test_self_similarity_grid_mismatch(ab1_heat_plan):
    with pytest.raises(HeatError):
        check_self_similarity(ab1_heat_plan, ab1_heat_plan, 0.1, 0.2)


def test_exact_discrete_symmetries_heisenberg(h1_heat_plan):
    # rotation by pi (negate x, y) and the swap (x <-> y, u -> -u) are exact
    # symmetries of the discretized operator
    g = h1_heat_plan.grid
    h = heat_kernel(h1_heat_plan, 0.15).reshape()
    rot = h[::-1, ::-1, :]
    swap = np.swapaxes(h, 0, 1)[:, :, ::-1]
    assert np.max(np.abs(h - rot)) / h.max() < 1e-12
    assert np.max(np.abs(h - swap)) / h.max() < 1e-12


# ---------------------------------------------------------------------------
# Plan mechanics


def test_heat_apply_time_zero(ab1_heat_plan):
    g = ab1_heat_plan.grid
    f = GridFunction(g, np.where(ab1_heat_plan.mask, np.sin(g.points()[:, 0]), 0.0))
    out = heat_apply(ab1_heat_plan, f, 0.0)
    assert np.allclose(out.values, f.values, atol=1e-10)
    with pytest.raises(HeatError):
        heat_apply(ab1_heat_plan, f, -0.1)
    with pytest.raises(HeatError):
        heat_kernel(ab1_heat_plan, -1.0)


def test_plan_eigenbasis_orthonormal(ab1_heat_plan):
    V = ab1_heat_plan.eigenvectors
    assert np.allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-10)
    assert ab1_heat_plan.sym_defect < 1e-10


def test_dilated_plan_matches_fresh_solve(ab1_heat_plan, ab1_law):
    rho = 1.7
    spec = sublaplacian(ab1_law.algebra)
    fresh = spectral_plan(
        spec, ab1_law, ab1_heat_plan.grid.dilated(rho, (1,)), margin=4, reg_strength=0.05
    )
    cheap = dilated_plan(ab1_heat_plan, rho)
    h1 = heat_kernel(cheap, 0.3).values
    h2 = heat_kernel(fresh, 0.3).values
    assert np.max(np.abs(h1 - h2)) / np.max(np.abs(h2)) < 1e-10


def test_source_continuation(ab1_pot_plan, ab1_pot_source):
    src = ab1_pot_source
    assert np.isfinite(src.t_switch)
    # just past the switch the box still holds the kernel, so the dilation
    # identity keeps the box mass (far beyond it the support outgrows the box)
    h_late = src(1.2 * src.t_switch)
    assert abs(float(haar_integrate(h_late)) - src.mass_at_switch) < 5e-3
    # continued values match the 1-D closed form
    x = ab1_pot_plan.grid.points()[:, 0]
    t = 2.5 * src.t_switch
    exact = np.exp(-(x**2) / (4 * t)) / np.sqrt(4 * np.pi * t)
    assert np.max(np.abs(src(t).values - exact)) / exact.max() < 1e-2
    with pytest.raises(HeatError):
        src(0.0)


def test_value_at_origin_late(ab1_pot_source):
    # t^{Q/nu} h_t(0) -> (4 pi)^{-1/2} for the 1-D closed form
    c = ab1_pot_source.value_at_origin_late()
    assert c == pytest.approx((4 * np.pi) ** -0.5, rel=1e-2)
