"""Shared fixtures: group laws and the expensive spectral plans, built once."""

import numpy as np
import pytest

from gradecalc.algebra import bch_group_law, builtin_group
from gradecalc.calculus import power, sublaplacian
from gradecalc.defaults import heat_defaults, potential_defaults
from gradecalc.heatflow import HeatKernelSource, spectral_plan

SEED = 0xC0FFEE


@pytest.fixture(scope="session")
def ab1_law():
    return bch_group_law(builtin_group("abelian1"))


@pytest.fixture(scope="session")
def ab3_law():
    return bch_group_law(builtin_group("abelian3"))


@pytest.fixture(scope="session")
def h1_law():
    return bch_group_law(builtin_group("heisenberg"))


@pytest.fixture(scope="session")
def h1t_law():
    return bch_group_law(builtin_group("heisenberg358"))


@pytest.fixture(scope="session")
def ab1_heat_plan(ab1_law):
    d = heat_defaults("abelian1")
    spec = sublaplacian(ab1_law.algebra)
    return spectral_plan(spec, ab1_law, d.grid(), margin=d.margin, reg_strength=d.reg_strength)


@pytest.fixture(scope="session")
def ab1_pot_plan(ab1_law):
    d = potential_defaults("abelian1")
    spec = sublaplacian(ab1_law.algebra)
    return spectral_plan(spec, ab1_law, d.grid(), margin=d.margin, reg_strength=d.reg_strength)


@pytest.fixture(scope="session")
def ab1_pot_source(ab1_pot_plan):
    return HeatKernelSource(ab1_pot_plan)


@pytest.fixture(scope="session")
def ab3_pot_plan(ab3_law):
    d = potential_defaults("abelian3")
    spec = sublaplacian(ab3_law.algebra)
    return spectral_plan(spec, ab3_law, d.grid(), margin=d.margin, reg_strength=d.reg_strength)


@pytest.fixture(scope="session")
def ab3_pot_source(ab3_pot_plan):
    return HeatKernelSource(ab3_pot_plan)


@pytest.fixture(scope="session")
def h1_heat_plan(h1_law):
    d = heat_defaults("heisenberg")
    spec = sublaplacian(h1_law.algebra)
    return spectral_plan(spec, h1_law, d.grid(), margin=d.margin, reg_strength=d.reg_strength)


@pytest.fixture(scope="session")
def h1_heat_plan_scaled(h1_law):
    d = heat_defaults("heisenberg")
    t1, t2 = d.selfsim_times
    spec = sublaplacian(h1_law.algebra)
    r = (t2 / t1) ** (1.0 / spec.nu)
    grid = d.grid().dilated(r, h1_law.algebra.weights)
    return spectral_plan(spec, h1_law, grid, margin=d.margin, reg_strength=d.reg_strength)


@pytest.fixture(scope="session")
def h1_pot_plan(h1_law):
    d = potential_defaults("heisenberg")
    spec = sublaplacian(h1_law.algebra)
    return spectral_plan(spec, h1_law, d.grid(), margin=d.margin, reg_strength=d.reg_strength)


@pytest.fixture(scope="session")
def h1_pot_plan_L2(h1_law):
    d = potential_defaults("heisenberg")
    spec = power(sublaplacian(h1_law.algebra), 2)
    return spectral_plan(spec, h1_law, d.grid(), margin=d.margin, reg_strength=d.reg_strength)
