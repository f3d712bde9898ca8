"""Left-invariant fields, finite differences, operator expressions."""

import numpy as np
import pytest

from gradecalc.calculus import (
    CalculusError,
    DiffOpExpr,
    FieldMatrices,
    ParseError,
    RocklandSpec,
    StratificationError,
    apply_diffop,
    build_rockland_example,
    discretize,
    fd_weights,
    field_commutator_defect,
    homogeneous_degree,
    is_stratified,
    left_invariant_fields,
    parse_diffop,
    partial_matrix,
    power,
    sublaplacian,
)
from gradecalc.geometry import Grid, GridFunction


def test_fd_weights_first_derivative():
    # 4th-order central stencil for f'
    w = fd_weights(0.0, np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), 1)
    assert np.allclose(w, [1 / 12, -8 / 12, 0.0, 8 / 12, -1 / 12])


def test_partial_matrix_accuracy():
    g = Grid((2.0,), (81,))
    x = g.points()[:, 0]
    D = partial_matrix(g, 0)
    err = np.max(np.abs(D @ np.sin(x) - np.cos(x)))
    assert err < 1e-5


def test_left_invariant_fields_heisenberg(h1_law):
    # X = d/dx - (y/2) d/du, Y = d/dy + (x/2) d/du, T = d/du
    fields = left_invariant_fields(h1_law)
    pts = np.array([[0.7, -0.3, 0.2], [1.0, 2.0, -1.0]])
    X, Y, T = fields
    assert np.allclose(X.coeff_values(pts)[0], 1.0)
    assert np.allclose(X.coeff_values(pts)[1], 0.0)
    assert np.allclose(X.coeff_values(pts)[2], -pts[:, 1] / 2)
    assert np.allclose(Y.coeff_values(pts)[2], pts[:, 0] / 2)
    assert np.allclose(T.coeff_values(pts)[2], 1.0)


def test_field_commutators_match_brackets(h1_law):
    assert field_commutator_defect(h1_law) < 1e-9


def test_field_commutators_weights_358(h1t_law):
    assert field_commutator_defect(h1t_law) < 1e-9


def test_diffop_algebra():
    X, Y = DiffOpExpr.generator(0), DiffOpExpr.generator(1)
    expr = (X + Y) * (X - Y)
    # non-commutative expansion: XX - XY + YX - YY
    assert expr.word_degrees((1, 1)) == {2}
    assert (X**3).max_word_length() == 3
    with pytest.raises((TypeError, ValueError)):
        X * "bad"


def test_transpose_is_involution():
    X, Y = DiffOpExpr.generator(0), DiffOpExpr.generator(1)
    expr = 2.0 * (X * X * Y) - Y
    assert expr.transpose().transpose().terms == expr.terms


def test_homogeneous_degree():
    X, Y, T = (DiffOpExpr.generator(j) for j in range(3))
    w = (1, 1, 2)
    assert homogeneous_degree(-(X**2) - Y**2, w) == 2
    assert homogeneous_degree(T, w) == 2
    assert homogeneous_degree(X + T, w) == {1, 2}


def test_parse_diffop():
    expr = parse_diffop("X^4 + Y^4 - 1*T^2", ["X", "Y", "T"])
    assert homogeneous_degree(expr, (1, 1, 2)) == 4
    with pytest.raises(ParseError):
        parse_diffop("X^", ["X"])
    with pytest.raises(ParseError):
        parse_diffop("Z^2", ["X", "Y"])


def test_sublaplacian_heisenberg(h1_law):
    spec = sublaplacian(h1_law.algebra)
    assert spec.nu == 2
    assert spec.is_homogeneous((1, 1, 2))


def test_sublaplacian_requires_stratified(h1t_law):
    assert not is_stratified(h1t_law.algebra)
    with pytest.raises(StratificationError):
        sublaplacian(h1t_law.algebra)


def test_rockland_example_weights_358(h1t_law):
    # nu0 = lcm(3,5,8) = 120; degree 240; term exponents 2*nu0/w_j
    spec = build_rockland_example(h1t_law.algebra, 120)
    assert spec.nu == 240
    assert spec.is_homogeneous((3, 5, 8))
    with pytest.raises(CalculusError):
        build_rockland_example(h1t_law.algebra, 7)
    with pytest.raises(CalculusError):
        build_rockland_example(h1t_law.algebra, 120, c=[1.0, -1.0, 1.0])


def test_power():
    X = DiffOpExpr.generator(0)
    spec = RocklandSpec(expr=-(X**2), nu=2, provenance="test")
    assert power(spec, 2).nu == 4
    with pytest.raises(CalculusError):
        power(spec, 0)


def test_apply_diffop_heisenberg_exact(h1_law):
    # X f for f = x^2 + y*u: X = dx - (y/2) du -> 2x - y^2/2
    g = Grid((1.5, 1.5, 1.2), (13, 13, 17))
    pts = g.points()
    x, y, u = pts[:, 0], pts[:, 1], pts[:, 2]
    f = GridFunction(g, x**2 + y * u)
    X = DiffOpExpr.generator(0)
    got = apply_diffop(X, h1_law, f)
    mask = g.interior_mask(0)  # stencils are exact on polynomials of low degree
    assert np.allclose(got.values[mask], (2 * x - y**2 / 2)[mask], atol=1e-9)


def test_discretized_sublaplacian_annihilates_constants(h1_law):
    g = Grid((1.0, 1.0, 1.0), (9, 9, 9))
    A = discretize(sublaplacian(h1_law.algebra).expr, h1_law, g)
    ones = np.ones(g.size)
    # every operator word ends in a derivative: constants map to zero exactly
    assert np.max(np.abs(A @ ones)) < 1e-10


def test_field_matrices_cache_consistency(h1_law):
    g = Grid((1.0, 1.0, 1.0), (9, 9, 9))
    fm = FieldMatrices(h1_law, g)
    expr = sublaplacian(h1_law.algebra).expr
    f = np.random.default_rng(0xC0FFEE).standard_normal(g.size)
    direct = fm.apply_expr(expr, f)
    via_matrix = fm.matrix(expr) @ f
    assert np.allclose(direct, via_matrix, atol=1e-10)
