"""Kontsevich star product on polynomial functions on g*, PBW star, Duflo map."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from . import graphs as G
from .algebra import LieAlgebraSpec
from .lieseries import dynkin_bch, standard_factor
from .linalg import nullspace
from .operators import DerivativeCache, exp_symbol, graph_table
from .poly import EpsPoly, Poly, monomials
from .weights import HALF_PLANE

STAR_CAP = 4

_TABLES: dict[tuple[str, str], dict] = {}


def _alg_key(alg: LieAlgebraSpec) -> str:
    return alg.to_text()


def plain_table(g: G.KGraph, alg: LieAlgebraSpec) -> dict:
    """Ground-keyed table of B_g (cached per algebra)."""
    key = (_alg_key(alg), g.id)
    if key not in _TABLES:
        _TABLES[key] = {k[1]: v for k, v in graph_table(g, alg).items()}
    return _TABLES[key]


class MissingWeightsError(LookupError):
    def __init__(self, ids):
        super().__init__("missing weights: " + ", ".join(ids))
        self.ids = list(ids)


def star_operator(alg: LieAlgebraSpec, order: int, weight_source) -> dict[int, dict]:
    """{n: {(I, J): coefficient poly}} for the eps^n part of the star product.

    The eps^n part is 1/n! sum over labeled essential graphs of w_G B_G; labeled
    graphs are grouped by canonical id with multiplicity n!/|Aut|.
    """
    if order > STAR_CAP:
        raise ValueError(f"star order {order} exceeds the cap {STAR_CAP}")
    ops: dict[int, dict] = {}
    missing = []
    for n in range(1, order + 1):
        acc: dict = defaultdict(lambda: Poly(alg.dim))
        for g in G.enumerate_graphs(n, 2, G.ESSENTIAL):
            table = plain_table(g, alg)
            if not table:
                continue
            try:
                w = weight_source(g, HALF_PLANE)
            except LookupError:
                missing.append(g.id)
                continue
            val = w.exact_or_value
            if val == 0:
                continue
            mult = Fraction(G.labeled_multiplicity(g), math.factorial(n))
            for k, p in table.items():
                acc[k] = acc[k] + p * (mult * val if isinstance(val, Fraction) else float(mult) * val)
        ops[n] = {k: v for k, v in acc.items() if v}
    if missing:
        raise MissingWeightsError(missing)
    return ops


def apply_bidiff(ops: dict[int, dict], f: Poly, h: Poly, order: int) -> EpsPoly:
    parts = {0: f * h}
    cf, ch = DerivativeCache(f), DerivativeCache(h)
    for n in range(1, order + 1):
        tot = Poly(f.nvars)
        for (I, J), coeff in ops.get(n, {}).items():
            a = cf(I)
            if not a:
                continue
            b = ch(J)
            if not b:
                continue
            tot = tot + coeff * a * b
        parts[n] = tot
    return EpsPoly(f.nvars, parts)


def star(alg: LieAlgebraSpec, f: Poly | EpsPoly, h: Poly | EpsPoly, order: int, weight_source,
         ops: dict | None = None) -> EpsPoly:
    """Truncated Kontsevich product; eps-graded inputs are multiplied bilinearly."""
    ops = ops if ops is not None else star_operator(alg, order, weight_source)
    fe = f if isinstance(f, EpsPoly) else EpsPoly.from_poly(f)
    he = h if isinstance(h, EpsPoly) else EpsPoly.from_poly(h)
    out = EpsPoly(alg.dim)
    for a, pf in fe.parts.items():
        for b, ph in he.parts.items():
            if a + b > order:
                continue
            r = apply_bidiff(ops, pf, ph, order - a - b)
            out = out + EpsPoly(alg.dim, {k + a + b: p for k, p in r.parts.items()})
    return out.truncate(order)


def associator(alg, f, g, h, order, weight_source) -> EpsPoly:
    ops = star_operator(alg, order, weight_source)
    left = star(alg, star(alg, f, g, order, None, ops), h, order, None, ops)
    right = star(alg, f, star(alg, g, h, order, None, ops), order, None, ops)
    return left - right


def star_exp_symbol(alg: LieAlgebraSpec, order: int, weight_source) -> dict[int, Poly]:
    """e^X * e^Y = (sum_n eps^n S_n(x, X, Y)) e^{X+Y}; returns {n: S_n}."""
    ops = star_operator(alg, order, weight_source)
    nv = 3 * alg.dim
    out = {0: Poly.const(nv, 1)}
    for n, table in ops.items():
        out[n] = exp_symbol(table, alg.dim)
    return out


# ---------------------------------------------------------------------------
# Poisson structure and invariants

def poisson_bracket(alg: LieAlgebraSpec, f: Poly, h: Poly) -> Poly:
    """{f, h} = sum c^k_ij x_k d_i f d_j h."""
    d = alg.dim
    out = Poly(d)
    df = [f.diff(i) for i in range(d)]
    dh = [h.diff(j) for j in range(d)]
    for i, j in alg.nonzero_pairs():
        if not df[i] or not dh[j]:
            continue
        lin = Poly.linear(alg.c[i][j])
        out = out + lin * df[i] * dh[j]
    return out


def coadjoint_action(alg: LieAlgebraSpec, i: int, f: Poly) -> Poly:
    return poisson_bracket(alg, Poly.var(alg.dim, i), f)


def invariant_polynomials(alg: LieAlgebraSpec, degree: int) -> list[Poly]:
    """Basis of homogeneous coadjoint invariants of the given degree."""
    d = alg.dim
    monos = [e for e in monomials(d, degree) if sum(e) == degree]
    images = [[coadjoint_action(alg, i, Poly(d, {e: 1})) for i in range(d)] for e in monos]
    keys = sorted({(i, k) for img in images for i, p in enumerate(img) for k in p.terms})
    rows = [[images[c][i].terms.get(k, 0) for c in range(len(monos))] for (i, k) in keys]
    return [Poly(d, {e: v for e, v in zip(monos, vec) if v}) for vec in nullspace(rows, len(monos))]


def is_invariant(alg: LieAlgebraSpec, f: Poly) -> bool:
    return all(not coadjoint_action(alg, i, f) for i in range(alg.dim))


def casimir(alg: LieAlgebraSpec) -> Poly:
    inv = invariant_polynomials(alg, 2)
    if not inv:
        raise ValueError(f"{alg.name or 'algebra'} has no quadratic invariant")
    return inv[0]


# ---------------------------------------------------------------------------
# j series and the Duflo map

@dataclass
class InvariantSeries:
    """log of a multiplicative invariant: sum_k coeffs[2k] tr((ad X)^{2k})."""

    coeffs: dict[int, Fraction]
    order: int
    power: Fraction = Fraction(1)  # the series represents exp(power * log)

    def log_poly(self, alg: LieAlgebraSpec) -> Poly:
        traces = ad_power_traces(alg, self.order)
        out = Poly(alg.dim)
        for k, c in self.coeffs.items():
            if k <= self.order:
                out = out + traces[k] * c
        return out

    def as_poly(self, alg: LieAlgebraSpec, power: Fraction | None = None) -> Poly:
        """exp(power * log) truncated at degree ``order`` in X."""
        power = self.power if power is None else Fraction(power)
        lp = self.log_poly(alg) * power
        return exp_truncated(lp, self.order)


def exp_truncated(p: Poly, degree: int) -> Poly:
    out = Poly.const(p.nvars, 1)
    term = Poly.const(p.nvars, 1)
    for k in range(1, degree + 1):
        term = _truncate(term * p, degree) * Fraction(1, k)
        if not term:
            break
        out = out + term
    return out


def _truncate(p: Poly, degree: int) -> Poly:
    return Poly(p.nvars, {e: c for e, c in p.terms.items() if sum(e) <= degree})


def log_series_coeffs(order: int) -> dict[int, Fraction]:
    """Taylor coefficients of log(sinh(u/2)/(u/2)) through u^order."""
    s = {2 * m: Fraction(1, 4 ** m * math.factorial(2 * m + 1)) for m in range(order // 2 + 1)}
    u = {k: v for k, v in s.items() if k > 0}
    out: dict[int, Fraction] = defaultdict(Fraction)
    power = {0: Fraction(1)}
    for k in range(1, order // 2 + 1):
        nxt: dict[int, Fraction] = defaultdict(Fraction)
        for a, ca in power.items():
            for b, cb in u.items():
                if a + b <= order:
                    nxt[a + b] += ca * cb
        power = nxt
        for e, c in power.items():
            out[e] += Fraction((-1) ** (k + 1), k) * c
    return {k: v for k, v in out.items() if v}


def j_series(alg: LieAlgebraSpec | None, order: int) -> InvariantSeries:
    """log j(X) = sum_k b_2k tr((ad X)^{2k}) since log det = tr log."""
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    if order > 12:
        raise ValueError("order exceeds the j-series cap 12")
    return InvariantSeries(log_series_coeffs(order), order)


def ad_matrix_poly(alg: LieAlgebraSpec, nvars: int | None = None, offset: int = 0) -> list[list[Poly]]:
    """ad X with X = sum X_i e_i symbolic (variables offset..offset+d-1)."""
    d = alg.dim
    nv = nvars or d
    m = [[Poly(nv) for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(d):
            for k, c in enumerate(alg.c[i][j]):
                if c:
                    m[k][j] = m[k][j] + Poly.var(nv, offset + i, c)
    return m


def mat_mul(a, b):
    n = len(a)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            s = Poly(a[0][0].nvars)
            for k in range(n):
                if a[i][k] and b[k][j]:
                    s = s + a[i][k] * b[k][j]
            row.append(s)
        out.append(row)
    return out


def ad_power_traces(alg: LieAlgebraSpec, order: int) -> dict[int, Poly]:
    ad = ad_matrix_poly(alg)
    out = {}
    power = ad
    for k in range(1, order + 1):
        if k > 1:
            power = mat_mul(power, ad)
        out[k] = sum((power[i][i] for i in range(alg.dim)), Poly(alg.dim))
    return out


def apply_symbol(symbol: Poly, f: Poly, eps_graded: bool = True) -> EpsPoly:
    """Constant-coefficient operator sym(eps d) applied to f."""
    cache = DerivativeCache(f)
    parts: dict[int, Poly] = defaultdict(lambda: Poly(f.nvars))
    for e, c in symbol.terms.items():
        idx = tuple(i for i, a in enumerate(e) for _ in range(a))
        dd = cache(idx)
        if dd:
            k = sum(e) if eps_graded else 0
            parts[k] = parts[k] + dd * c
    return EpsPoly(f.nvars, dict(parts))


def duflo_map(alg: LieAlgebraSpec, F: Poly, order: int) -> EpsPoly:
    """j^{1/2}(eps d) F, truncated at eps^order."""
    js = j_series(alg, order if order % 2 == 0 else order + 1)
    sym = js.as_poly(alg, Fraction(1, 2))
    return apply_symbol(sym, F).truncate(order)


def apply_eps_symbol(symbol: Poly, F: EpsPoly, order: int) -> EpsPoly:
    out = EpsPoly(F.nvars)
    for a, p in F.parts.items():
        r = apply_symbol(symbol, p)
        out = out + EpsPoly(F.nvars, {k + a: v for k, v in r.parts.items()})
    return out.truncate(order)


# ---------------------------------------------------------------------------
# PBW (symmetrization) star product from BCH

def lie_word_vector(alg: LieAlgebraSpec, w: str, X: list[Poly], Y: list[Poly]) -> list[Poly]:
    if len(w) == 1:
        return X if w == "X" else Y
    u, v = standard_factor(w)
    a = lie_word_vector(alg, u, X, Y)
    b = lie_word_vector(alg, v, X, Y)
    nv = X[0].nvars
    out = [Poly(nv) for _ in range(alg.dim)]
    for i, j in alg.nonzero_pairs():
        if not a[i] or not b[j]:
            continue
        prod = a[i] * b[j]
        for k, c in enumerate(alg.c[i][j]):
            if c:
                out[k] = out[k] + prod * c
    return out


def pbw_symbol(alg: LieAlgebraSpec, order: int) -> dict[int, Poly]:
    """exp(<Z_eps(X,Y) - X - Y, x>) by eps degree, as polys in (x, X, Y)."""
    d = alg.dim
    nv = 3 * d
    X = [Poly.var(nv, d + i) for i in range(d)]
    Y = [Poly.var(nv, 2 * d + i) for i in range(d)]
    Z = dynkin_bch(order + 1)
    W: dict[int, Poly] = defaultdict(lambda: Poly(nv))
    for w, c in Z.terms.items():
        if len(w) < 2:
            continue
        vec = lie_word_vector(alg, w, X, Y)
        W[len(w) - 1] = W[len(w) - 1] + sum((vec[k] * Poly.var(nv, k) for k in range(d) if vec[k]), Poly(nv)) * c
    # exp of the eps-graded series
    out = {0: Poly.const(nv, 1)}
    term = {0: Poly.const(nv, 1)}
    for m in range(1, order + 1):
        nxt: dict[int, Poly] = defaultdict(lambda: Poly(nv))
        for a, p in term.items():
            for b, q in W.items():
                if a + b <= order:
                    nxt[a + b] = nxt[a + b] + p * q * Fraction(1, m)
        term = dict(nxt)
        for k, p in term.items():
            out[k] = out.get(k, Poly(nv)) + p
    return out


def symbol_to_bidiff(symbol: Poly, d: int) -> dict:
    """Split a (x, X, Y) polynomial into {(I, J): coeff(x)}."""
    out: dict = defaultdict(lambda: Poly(d))
    for e, c in symbol.terms.items():
        xe, Xe, Ye = e[:d], e[d:2 * d], e[2 * d:]
        I = tuple(i for i, a in enumerate(Xe) for _ in range(a))
        J = tuple(i for i, a in enumerate(Ye) for _ in range(a))
        out[(I, J)] = out[(I, J)] + Poly(d, {xe: c})
    return dict(out)


def pbw_star(alg: LieAlgebraSpec, f: Poly | EpsPoly, h: Poly | EpsPoly, order: int,
             ops: dict | None = None) -> EpsPoly:
    if ops is None:
        sym = pbw_symbol(alg, order)
        ops = {n: symbol_to_bidiff(p, alg.dim) for n, p in sym.items() if n > 0}
    return star(alg, f, h, order, None, ops)


def duflo_check(alg: LieAlgebraSpec, a: int, b: int, order: int) -> EpsPoly:
    """duflo_map(C^a C^b) - duflo_map(C^a) *_PBW duflo_map(C^b) through eps^order."""
    C = casimir(alg)
    Fa, Fb = C ** a, C ** b
    lhs = duflo_map(alg, Fa * Fb, order)
    rhs = pbw_star(alg, duflo_map(alg, Fa, order), duflo_map(alg, Fb, order), order)
    return lhs - rhs


# ---------------------------------------------------------------------------
# Exponentials: e^X * e^Y = D(X, Y) e^{Z(X, Y)} with the Duflo density

def _grade(e: tuple, d: int) -> int:
    return sum(e[d:]) - sum(e[:d])


def truncate_grade(p: Poly, d: int, order: int) -> Poly:
    """Keep the terms of eps-grade (degree in X, Y minus degree in x) <= order."""
    return Poly(p.nvars, {e: c for e, c in p.terms.items() if _grade(e, d) <= order})


def split_grade(p: Poly, d: int) -> dict[int, Poly]:
    out: dict[int, dict] = defaultdict(dict)
    for e, c in p.terms.items():
        out[_grade(e, d)][e] = c
    return {k: Poly(p.nvars, v) for k, v in out.items()}


def _log_j_at(alg: LieAlgebraSpec, vec: list[Poly], order: int) -> Poly:
    """log j evaluated at a vector of polynomials (all of positive degree)."""
    nv = vec[0].nvars
    d = alg.dim
    ad = [[Poly(nv) for _ in range(d)] for _ in range(d)]
    for i in range(d):
        if not vec[i]:
            continue
        for j in range(d):
            for k, c in enumerate(alg.c[i][j]):
                if c:
                    ad[k][j] = ad[k][j] + vec[i] * c
    coeffs = log_series_coeffs(order if order % 2 == 0 else order + 1)
    out = Poly(nv)
    power = ad
    for k in range(1, max(coeffs, default=0) + 1):
        if k > 1:
            power = [[_truncate(x, order) for x in row] for row in mat_mul(power, ad)]
        if k in coeffs:
            tr = sum((power[i][i] for i in range(d)), Poly(nv))
            out = out + tr * coeffs[k]
    return _truncate(out, order)


def duflo_exp_symbol(alg: LieAlgebraSpec, order: int) -> dict[int, Poly]:
    """Predicted exponential symbol j^1/2(X) j^1/2(Y) / j^1/2(Z) e^<Z - X - Y, x>.

    Polynomials in (x, X, Y); eps-grade n collects the eps^n terms with
    Z = eps^-1 BCH(eps X, eps Y).
    """
    d = alg.dim
    nv = 3 * d
    X = [Poly.var(nv, d + i) for i in range(d)]
    Y = [Poly.var(nv, 2 * d + i) for i in range(d)]
    Zs = dynkin_bch(order + 1)
    Zvec = [Poly(nv) for _ in range(d)]
    W = Poly(nv)
    for w, c in Zs.terms.items():
        vec = lie_word_vector(alg, w, X, Y)
        for k in range(d):
            if vec[k]:
                Zvec[k] = Zvec[k] + vec[k] * c
                if len(w) > 1:
                    W = W + vec[k] * Poly.var(nv, k) * c
    Zvec = [_truncate(z, order) for z in Zvec]
    log_d = (_log_j_at(alg, X, order) + _log_j_at(alg, Y, order) - _log_j_at(alg, Zvec, order)) * Fraction(1, 2)
    expo = log_d + W
    out = Poly.const(nv, 1)
    term = Poly.const(nv, 1)
    for k in range(1, 2 * order + 1):
        term = truncate_grade(term * expo, d, order) * Fraction(1, k)
        if not term:
            break
        out = out + term
    return split_grade(out, d)
