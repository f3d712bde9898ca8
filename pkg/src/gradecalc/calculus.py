"""Left-invariant vector fields, operator expressions and their discretization.

A left-invariant field X_j is computed from the group law as
a_{jk}(x) = d/ds m_k(x, s e_j) |_{s=0}; the coefficients are exact rational
polynomials.  Differential operators are formal sums of words in the fields,
realized on grids through 4th-order finite differences (one-sided stencils at
the boundary) composed with polynomial coefficient multiplication.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sparse
import sympy as sp

from .algebra import GroupLaw
from .geometry import Grid, GridFunction


class CalculusError(ValueError):
    pass


class StratificationError(CalculusError):
    """Algebra is not generated by its first stratum."""


class ParseError(CalculusError):
    pass


# ---------------------------------------------------------------------------
# Finite-difference machinery


def fd_weights(z, x, m):
    """Fornberg weights for the m-th derivative at z from nodes x."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=None)
def _diff_matrix_1d(n, dx, order=1, acc=4):
    """Sparse 1-D derivative matrix, ``acc``-order stencils, one-sided at edges."""
    width = 2 * ((order + 1) // 2) - 1 + acc
    if n < width:
        raise CalculusError(f"grid axis with {n} points too small for the stencil")
    xs = np.arange(n) * dx
    rows, cols, vals = [], [], []
    half = (width - 1) // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        nodes = np.arange(lo, lo + width)
        w = fd_weights(xs[i], xs[nodes], order)
        rows.extend([i] * width)
        cols.extend(nodes.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def partial_matrix(grid: Grid, axis, order=1, acc=4):
    """n-D sparse matrix of d/dx_axis on the grid (C ordering)."""
    mats = []
    for j, N in enumerate(grid.counts):
        if j == axis:
            mats.append(_diff_matrix_1d(N, grid.spacings[j], order, acc))
        else:
            mats.append(sparse.identity(N, format="csr"))
    out = mats[0]
    for m in mats[1:]:
        out = sparse.kron(out, m, format="csr")
    return out


# ---------------------------------------------------------------------------
# Left-invariant vector fields


@dataclass
class LeftInvariantField:
    """X_j f = sum_k a_{jk}(x) df/dx_k with exact polynomial coefficients."""

    index: int
    coeffs: tuple  # sympy expressions in the x symbols
    xs: tuple
    weights: tuple

    def coeff_values(self, points):
        """Evaluate all a_{jk} at an array of points, shape (M, n)."""
        out = []
        for k, a in enumerate(self.coeffs):
            if a == 0:
                out.append(np.zeros(len(points)))
            else:
                fn = sp.lambdify(self.xs, a, "numpy")
                vals = fn(*[points[:, i] for i in range(points.shape[1])])
                out.append(np.broadcast_to(np.asarray(vals, float), (len(points),)).copy())
        return out


def left_invariant_fields(law: GroupLaw):
    """Derive the fields from the group law by differentiating at the identity."""
    n = law.algebra.n
    s = sp.Symbol("_s")
    fields = []
    for j in range(n):
        coeffs = []
        for k in range(n):
            sub = {law.ys[i]: (s if i == j else 0) for i in range(n)}
            a = sp.expand(sp.diff(law.coords[k].subs(sub), s).subs(s, 0))
            coeffs.append(a)
        fields.append(
            LeftInvariantField(
                index=j, coeffs=tuple(coeffs), xs=law.xs, weights=law.algebra.weights
            )
        )
    return fields


def field_commutator_defect(law, fields=None):
    """Symbolic defect of [X_j, X_k] - sum_l c_jk^l X_l, as coefficient polynomials.

    Returns the maximal number of nonzero defect polynomials (0 means the
    fields reproduce the structure constants exactly).
    """
    alg = law.algebra
    if fields is None:
        fields = left_invariant_fields(law)
    bad = 0
    for j in range(alg.n):
        for k in range(alg.n):
            for m in range(alg.n):
                comm = sp.Integer(0)
                for l in range(alg.n):
                    comm += fields[j].coeffs[l] * sp.diff(fields[k].coeffs[m], law.xs[l])
                    comm -= fields[k].coeffs[l] * sp.diff(fields[j].coeffs[m], law.xs[l])
                expect = sum(
                    sp.Rational(c.numerator, c.denominator) * fields[l].coeffs[m]
                    for jj, kk, l, c in alg.nonzero_constants()
                    if (jj, kk) == (j, k)
                )
                if sp.expand(comm - expect) != 0:
                    bad += 1
    return bad


# ---------------------------------------------------------------------------
# Differential operator expressions


@dataclass
class DiffOpExpr:
    """Formal real-linear combination of words in the basis fields.

    ``terms`` maps a word (tuple of 0-based field indices, applied left to
    right as operators) to its real coefficient.  The empty word is the
    identity operator.
    """

    terms: dict = field(default_factory=dict)

    @classmethod
    def identity(cls):
        return cls({(): 1.0})

    @classmethod
    def generator(cls, j):
        return cls({(int(j),): 1.0})

    def __add__(self, other):
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0.0) + c
        return DiffOpExpr({w: c for w, c in out.items() if c != 0.0})

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, DiffOpExpr):
            out = {}
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    w = w1 + w2
                    out[w] = out.get(w, 0.0) + c1 * c2
            return DiffOpExpr({w: c for w, c in out.items() if c != 0.0})
        return DiffOpExpr({w: c * float(other) for w, c in self.terms.items()})

    def __rmul__(self, scalar):
        return self * scalar

    def __neg__(self):
        return self * -1.0

    def __pow__(self, k):
        if k < 0 or int(k) != k:
            raise CalculusError("power must be a nonnegative integer")
        out = DiffOpExpr.identity()
        for _ in range(int(k)):
            out = out * self
        return out

    def transpose(self):
        """Formal transpose: X_j^t = -X_j, words reversed."""
        return DiffOpExpr(
            {w[::-1]: c * (-1.0) ** len(w) for w, c in self.terms.items()}
        )

    def word_degrees(self, weights):
        return {sum(weights[j] for j in w) for w in self.terms}

    def max_word_length(self):
        return max((len(w) for w in self.terms), default=0)

    def format(self, labels):
        if not self.terms:
            return "0"
        parts = []
        for w, c in sorted(self.terms.items()):
            word = "I" if not w else " ".join(labels[j] for j in w)
            parts.append(f"{c:+g} {word}")
        return " ".join(parts)


def homogeneous_degree(expr: DiffOpExpr, weights):
    """The common weighted degree, or a set of degrees if inhomogeneous."""
    degs = expr.word_degrees(weights)
    if len(degs) == 1:
        return degs.pop()
    return degs


def transpose(expr: DiffOpExpr) -> DiffOpExpr:
    return expr.transpose()


# ---------------------------------------------------------------------------
# Rockland operator constructors


@dataclass
class RocklandSpec:
    """A candidate positive Rockland operator with its homogeneous degree."""

    expr: DiffOpExpr
    nu: int
    provenance: str
    algebra: object = None

    def is_homogeneous(self, weights):
        return self.expr.word_degrees(weights) == {self.nu}


def build_rockland_example(alg, nu0, c=None) -> RocklandSpec:
    """sum_j (-1)^{nu0/v_j} c_j X_j^{2 nu0/v_j}, homogeneous of degree 2*nu0."""
    weights = alg.weights
    for w in weights:
        if nu0 % w != 0:
            raise CalculusError(f"nu0={nu0} is not a common multiple of the weights")
    if c is None:
        c = [1.0] * alg.n
    if any(cj <= 0 for cj in c):
        raise CalculusError("coefficients must be positive")
    expr = DiffOpExpr()
    for j in range(alg.n):
        k = nu0 // weights[j]
        expr = expr + ((-1.0) ** k * float(c[j])) * (DiffOpExpr.generator(j) ** (2 * k))
    return RocklandSpec(expr=expr, nu=2 * nu0, provenance="example-2nu0", algebra=alg)


def is_stratified(alg):
    """True iff the weight-1 layer generates the whole algebra by brackets."""
    from fractions import Fraction

    first = [j for j in range(alg.n) if alg.weights[j] == 1]
    if not first:
        return False
    unit = lambda j: [Fraction(int(i == j)) for i in range(alg.n)]
    span = [unit(j) for j in first]
    current = list(span)
    for _ in range(alg.n):
        nxt = []
        for j in first:
            for v in current:
                w = alg.bracket_vec(unit(j), v)
                if any(x != 0 for x in w):
                    nxt.append(w)
        if not nxt:
            break
        span.extend(nxt)
        current = nxt
    mat = sp.Matrix([[sp.Rational(x.numerator, x.denominator) for x in v] for v in span])
    return mat.rank() == alg.n


def sublaplacian(alg) -> RocklandSpec:
    """R = -(Z_1^2 + ... + Z_{n'}^2) over the basis of the first stratum."""
    if not is_stratified(alg):
        raise StratificationError(
            "algebra is not stratified: the first stratum does not generate"
        )
    expr = DiffOpExpr()
    for j in range(alg.n):
        if alg.weights[j] == 1:
            expr = expr - DiffOpExpr.generator(j) ** 2
    return RocklandSpec(expr=expr, nu=2, provenance="sublaplacian-negative", algebra=alg)


def power(spec: RocklandSpec, k) -> RocklandSpec:
    """R^k, homogeneous of degree k * nu."""
    if k < 1 or int(k) != k:
        raise CalculusError("power must be a positive integer")
    return RocklandSpec(
        expr=spec.expr ** int(k),
        nu=spec.nu * int(k),
        provenance="power",
        algebra=spec.algebra,
    )


# ---------------------------------------------------------------------------
# Operator mini-language


_TOKEN = re.compile(r"\s*(?:(?P<num>[+-]?\d+(?:\.\d+)?(?:/\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[\^*+-]))")


def parse_diffop(text, labels) -> DiffOpExpr:
    """Parse expressions like ``X^4 + Y^4 - 1*T^2`` over the basis labels."""
    labels = list(labels)
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == m.start():
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r} at position {pos}")
        tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()

    expr = DiffOpExpr()
    i = 0

    def parse_term(i):
        coeff = 1.0
        word = ()
        saw_factor = False
        while i < len(tokens):
            kind, val, at = tokens[i]
            if kind == "op" and val in "+-" and saw_factor:
                break
            if kind == "op" and val in "+-":
                coeff *= -1.0 if val == "-" else 1.0
                i += 1
                continue
            if kind == "op" and val == "*":
                i += 1
                continue
            if kind == "num":
                if "/" in val:
                    num, den = val.split("/")
                    coeff *= float(num) / float(den)
                else:
                    coeff *= float(val)
                i += 1
                saw_factor = True
                continue
            if kind == "name":
                if val not in labels:
                    raise ParseError(f"unknown basis label {val!r} at position {at}")
                j = labels.index(val)
                e = 1
                if i + 2 < len(tokens) and tokens[i + 1][:2] == ("op", "^"):
                    if tokens[i + 2][0] != "num":
                        raise ParseError(f"expected exponent at position {tokens[i + 2][2]}")
                    e = int(float(tokens[i + 2][1]))
                    i += 2
                word = word + (j,) * e
                i += 1
                saw_factor = True
                continue
            raise ParseError(f"unexpected token {val!r} at position {at}")
        if not saw_factor:
            raise ParseError("empty term")
        return DiffOpExpr({word: coeff}), i

    while i < len(tokens):
        term, i = parse_term(i)
        expr = expr + term
    if not expr.terms and not tokens:
        raise ParseError("empty expression")
    return expr


# ---------------------------------------------------------------------------
# Discretization


class FieldMatrices:
    """Cached sparse matrices of the basis fields on a fixed grid."""

    def __init__(self, law: GroupLaw, grid: Grid, acc=4):
        self.law = law
        self.grid = grid
        self.acc = acc
        self._fields = left_invariant_fields(law)
        self._mats = {}

    def field(self, j):
        if j not in self._mats:
            fld = self._fields[j]
            pts = self.grid.points()
            coeff_vals = fld.coeff_values(pts)
            mat = None
            for k, a in enumerate(coeff_vals):
                if not np.any(a):
                    continue
                Dk = partial_matrix(self.grid, k, 1, self.acc)
                term = sparse.diags(a) @ Dk
                mat = term if mat is None else mat + term
            if mat is None:
                mat = sparse.csr_matrix((self.grid.size, self.grid.size))
            self._mats[j] = mat.tocsr()
        return self._mats[j]

    def apply_word(self, word, values):
        out = values
        for j in reversed(word):
            out = self.field(j) @ out
        return out

    def apply_expr(self, expr: DiffOpExpr, values):
        values = np.asarray(values)
        out = np.zeros(values.shape, dtype=values.dtype if np.iscomplexobj(values) else float)
        for w, c in expr.terms.items():
            out = out + c * self.apply_word(w, values)
        return out

    def matrix(self, expr: DiffOpExpr):
        N = self.grid.size
        out = sparse.csr_matrix((N, N))
        for w, c in expr.terms.items():
            m = sparse.identity(N, format="csr")
            for j in w:
                m = m @ self.field(j)
            out = out + c * m
        return out


def apply_diffop(expr: DiffOpExpr, law: GroupLaw, f: GridFunction, cache=None) -> GridFunction:
    """Apply a left-invariant operator to grid samples."""
    fm = cache if cache is not None else FieldMatrices(law, f.grid)
    return GridFunction(f.grid, fm.apply_expr(expr, f.values))


def discretize(expr: DiffOpExpr, law: GroupLaw, grid: Grid, cache=None):
    """Sparse matrix of the operator on the full grid."""
    fm = cache if cache is not None else FieldMatrices(law, grid)
    return fm.matrix(expr)
