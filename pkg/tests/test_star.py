import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import graphs as G
from artifact.algebra import AlgebraError, load_algebra
from artifact.operators import apply_b_gamma, exp_symbol
from artifact.poly import EpsPoly, Poly, monomials, parse_poly
from artifact.star import (ad_matrix_poly, associator, casimir, duflo_check, duflo_exp_symbol,
                           duflo_map, invariant_polynomials, is_invariant, j_series,
                           log_series_coeffs, mat_mul, pbw_star, plain_table, poisson_bracket,
                           star, star_exp_symbol, star_operator)

F = Fraction
WHEEL2 = "n=2;m=2;e=1>2,1>G1,2>1,2>G2"
WHEEL3 = "n=3;m=2;e=1>2,1>G1,2>3,2>G1,3>1,3>G2"
FIG2 = "n=5;m=2;e=1>G1,1>2,2>5,2>3,3>G2,3>4,4>G2,4>1,5>G1,5>G2"


def polys(d, max_deg=2):
    monos = monomials(d, max_deg)
    return st.lists(st.integers(-3, 3), min_size=len(monos), max_size=len(monos)).map(
        lambda cs: Poly(d, {e: c for e, c in zip(monos, cs) if c}))


def trace_of(alg, factors):
    """tr of a product of ad matrices in the (x, X, Y) variables."""
    d = alg.dim
    adX, adY = ad_matrix_poly(alg, 3 * d, d), ad_matrix_poly(alg, 3 * d, 2 * d)
    mats = {"X": adX, "Y": adY, "Z": _ad_of_bracket(alg, adX, adY)}
    m = mats[factors[0]]
    for ch in factors[1:]:
        m = mat_mul(m, mats[ch])
    return sum((m[i][i] for i in range(d)), Poly(3 * d))


def _ad_of_bracket(alg, adX, adY):
    a, b = mat_mul(adX, adY), mat_mul(adY, adX)
    return [[a[i][j] - b[i][j] for j in range(alg.dim)] for i in range(alg.dim)]


# --- algebras ---------------------------------------------------------------

def test_load_algebra_text_and_presets():
    alg = load_algebra("dim=2; basis=a,b; bracket a b = 1*b")
    assert alg.bracket([1, 0], [0, 1]) == [0, 1]
    assert load_algebra("sl2").dim == 3
    assert load_algebra("abelian4").is_abelian()
    swapped = load_algebra("dim=2; basis=a,b; bracket b a = -1*b")
    assert swapped.c == alg.c


def test_load_algebra_errors():
    with pytest.raises(AlgebraError, match="dim=3"):
        load_algebra("dim=3; basis=a,b")
    with pytest.raises(AlgebraError, match="unknown basis element"):
        load_algebra("dim=2; basis=a,b; bracket a c = 1*b")
    with pytest.raises(AlgebraError, match="column"):
        load_algebra("dim=2; basis=a,b; frobnicate")
    # [a,b]=a, [a,c]=b, [b,c]=0 violates Jacobi on the triple (a, b, c)
    with pytest.raises(AlgebraError, match="Jacobi"):
        load_algebra("dim=3; basis=a,b,c; bracket a b = 1*a; bracket a c = 1*b")


# --- graph operators -----------------------------------------------------------

def test_single_vertex_operator_is_half_bracket():
    alg = load_algebra("sl2")
    g = G.parse("n=1;m=2;e=1>G1,1>G2")
    H, X, Y = (Poly.var(3, i) for i in range(3))
    assert apply_b_gamma(g, alg, X, Y) == H * F(1, 2)
    assert apply_b_gamma(g, alg, H * H, X) == H * X * 2
    assert apply_b_gamma(G.swap_edges(g, 1), alg, X, Y) == H * F(-1, 2)


def test_abelian_operators_vanish():
    alg = load_algebra("abelian3")
    f = parse_poly("e1^2 e2 + 3 * e3", alg.basis_names)
    for g in G.enumerate_graphs(2, 2, G.ESSENTIAL):
        assert not apply_b_gamma(g, alg, f, f)


def test_operator_dimension_mismatch():
    with pytest.raises(ValueError, match="variables"):
        apply_b_gamma(G.parse("n=1;m=2;e=1>G1,1>G2"), load_algebra("sl2"), Poly.var(2, 0), Poly.var(3, 0))


@settings(max_examples=30, deadline=None)
@given(polys(3), polys(3), polys(3), st.integers(-3, 3))
def test_operator_bilinear(f1, f2, h, c):
    alg = load_algebra("sl2")
    g = G.parse("n=2;m=2;e=1>G1,1>2,2>G1,2>G2")
    assert apply_b_gamma(g, alg, f1 + f2 * c, h) == apply_b_gamma(g, alg, f1, h) + apply_b_gamma(g, alg, f2, h) * c


@settings(max_examples=30, deadline=None)
@given(polys(3, 3), polys(3, 3))
def test_operator_degree(f, h):
    # each aerial vertex removes two derivatives and adds one linear coefficient
    alg = load_algebra("sl2")
    for g in G.enumerate_graphs(2, 2, G.ESSENTIAL):
        r = apply_b_gamma(g, alg, f, h)
        for e in r.terms:
            assert sum(e) <= f.degree() + h.degree() - g.n_aerial


@pytest.mark.parametrize("name", ["sl2", "solvable4", "aff2"])
def test_wheel_symbols_are_traces(name):
    alg = load_algebra(name)
    d = alg.dim
    two = exp_symbol(plain_table(G.parse(WHEEL2), alg), d)
    assert two == trace_of(alg, "XY") * F(1, 4)
    three = exp_symbol(plain_table(G.parse(WHEEL3), alg), d)
    assert three == trace_of(alg, "XXY") * F(-1, 8)


@pytest.mark.parametrize("name", ["sl2", "solvable4", "heisenberg3"])
def test_fig2_wheel_symbol(name):
    # the 4-cycle with spokes X, [X,Y], Y, Y; the trace is zero on these
    # algebras, and so is the graph's symbol
    alg = load_algebra(name)
    assert G.classify(G.parse(FIG2)).kind == G.WHEEL
    assert not trace_of(alg, "XZYY")
    assert not exp_symbol(plain_table(G.parse(FIG2), alg), alg.dim)
    f = Poly.linear([1] * alg.dim)
    assert not apply_b_gamma(G.parse(FIG2), alg, f ** 2, f ** 3).terms.get((0,) * alg.dim)


# --- star product ----------------------------------------------------------------

def test_abelian_star_is_pointwise(source):
    alg = load_algebra("abelian3")
    f = parse_poly("e1^2 e2 + e3", alg.basis_names)
    h = parse_poly("e2^3 - 2 * e1 e3", alg.basis_names)
    r = star(alg, f, h, 3, source)
    assert r.parts == {0: f * h}


def test_heisenberg_star_examples(source):
    alg = load_algebra("heisenberg3")
    x, y, z = (Poly.var(3, i) for i in range(3))
    r = star(alg, x, y, 3, source)
    assert r[0] == x * y and r[1] == z * F(1, 2) and not r[2]
    comm = star(alg, x, y, 3, source) - star(alg, y, x, 3, source)
    assert comm.parts == {1: z}


def test_star_first_order_is_half_poisson(source):
    alg = load_algebra("sl2")
    f = parse_poly("H^2 + X Y", alg.basis_names)
    h = parse_poly("X^2 - H", alg.basis_names)
    r = star(alg, f, h, 2, source)
    assert r[1] == poisson_bracket(alg, f, h) * F(1, 2)


@pytest.mark.parametrize("name", ["sl2", "heisenberg3"])
def test_associativity(name, source):
    alg = load_algebra(name)
    a = parse_poly("1 + 2 * {0} {1} - {2}^2".format(*alg.basis_names), alg.basis_names)
    b = parse_poly("{0}^3 + {1} {2}".format(*alg.basis_names), alg.basis_names)
    c = parse_poly("{2} {0} - 3 * {1}^2".format(*alg.basis_names), alg.basis_names)
    assert associator(alg, a, b, c, 3, source).is_zero()


@settings(max_examples=10, deadline=None)
@given(polys(3), polys(3))
def test_star_eps_grading(source, f, h):
    # the eps^n part of a product of degree p and q polynomials has degree <= p + q - n
    alg = load_algebra("sl2")
    r = star(alg, f, h, 3, source)
    for n, p in r.parts.items():
        assert p.degree() <= f.degree() + h.degree() - n
        assert n <= f.degree() + h.degree()


def test_invariants_are_central(source):
    alg = load_algebra("sl2")
    C = casimir(alg)
    f = parse_poly("X^2 + H Y - 2 * X", alg.basis_names)
    assert is_invariant(alg, C)
    comm = star(alg, C, f, 3, source) - star(alg, f, C, 3, source)
    assert comm.is_zero()


def test_star_cap():
    with pytest.raises(ValueError, match="cap"):
        star_operator(load_algebra("sl2"), 5, None)


# --- invariants, j, Duflo ----------------------------------------------------------

def test_invariants():
    sl2 = load_algebra("sl2")
    C = casimir(sl2)
    assert C == parse_poly("H^2 + 4 * X Y", sl2.basis_names) * C.terms[(2, 0, 0)]
    assert len(invariant_polynomials(sl2, 2)) == 1
    assert invariant_polynomials(sl2, 1) == []
    heis = load_algebra("heisenberg3")
    assert is_invariant(heis, Poly.var(3, 2))
    assert not is_invariant(heis, Poly.var(3, 0))


def test_j_series_coefficients():
    assert log_series_coeffs(6) == {2: F(1, 24), 4: F(-1, 2880), 6: F(1, 181440)}
    assert j_series(None, 6).coeffs == log_series_coeffs(6)
    with pytest.raises(ValueError):
        j_series(None, 3)


def test_j_on_sl2_in_closed_form():
    # ad H has eigenvalues 0, +-2 at x = H: j(H) = (sinh(1)/1)^2
    alg = load_algebra("sl2")
    p = j_series(alg, 10).as_poly(alg)
    val = float(p.evaluate([1, 0, 0]))
    assert val == pytest.approx(math.sinh(1) ** 2, rel=1e-7)


def test_abelian_duflo_is_identity():
    alg = load_algebra("abelian3")
    f = parse_poly("e1^4 + e2 e3^2", alg.basis_names)
    assert j_series(alg, 4).as_poly(alg) == Poly.const(3, 1)
    assert duflo_map(alg, f, 4).parts == {0: f}


@pytest.mark.parametrize("a,b", [(1, 1), (1, 2)])
def test_duflo_is_multiplicative_on_invariants(a, b):
    assert duflo_check(load_algebra("sl2"), a, b, 4).is_zero()


def test_duflo_check_detects_a_wrong_map():
    # the plain symmetrization fails for C * C on sl2
    alg = load_algebra("sl2")
    C = casimir(alg)
    rhs = pbw_star(alg, C, C, 4)
    assert not (rhs - EpsPoly.from_poly(C * C)).is_zero()


@pytest.mark.parametrize("name", ["sl2", "heisenberg3", "aff2"])
def test_exponential_symbol_matches_duflo_density(name, source):
    alg = load_algebra(name)
    got = star_exp_symbol(alg, 3, source)
    want = duflo_exp_symbol(alg, 3)
    for n in range(4):
        assert got.get(n, Poly(3 * alg.dim)) == want.get(n, Poly(3 * alg.dim)), n
