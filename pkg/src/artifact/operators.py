"""Polydifferential operators B_G of graphs for linear Poisson structures.

Every aerial vertex carries pi^{ij} = 1/2 c^k_{ij} x_k.  An edge with index
i differentiates its target by d/dx_i.  Since pi is linear, an aerial vertex
hit by one edge of index k contributes the constant 1/2 c^k_{ij} and a vertex
hit twice contributes nothing.

An operator is returned in "table" form: a dict mapping a key
``(coloring, ground_multi_indices, infinity_indices)`` to the polynomial
coefficient in front of  prod_g d^{I_g} f_g.  Ground multi-indices are
sorted tuples of basis indices.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from fractions import Fraction
from typing import Callable, Sequence

from . import graphs as G
from .algebra import LieAlgebraSpec
from .poly import Poly

HALF = Fraction(1, 2)

OpKey = tuple  # (coloring tuple or None, tuple of ground index tuples, tuple of infinity indices)


def graph_table(g: G.KGraph, alg: LieAlgebraSpec, *,
                color_of: Callable[[int], G.EdgeColor] | None = None,
                unhit: Callable[[int], Poly | Fraction | int] | None = None,
                nvars: int | None = None,
                skip_edge: Callable[[int, int, G.EdgeColor | None], bool] | None = None,
                infinity_ok: Callable[[int], bool] | None = None) -> dict[OpKey, Poly]:
    """Sum over index assignments of the aerial part of B_g.

    ``color_of(index)`` induces the color of an edge from its index (two- or
    four-color operators); the induced coloring is part of the key.
    ``unhit(k)`` gives the value of the coefficient x_k at a vertex that no
    edge hits (default: the k-th coordinate among ``nvars`` variables).
    ``skip_edge(edge, index, color)`` prunes assignments whose weight is known
    to vanish.  Edges to infinity keep their index in the key.
    """
    d = alg.dim
    nv = d if nvars is None else nvars
    if unhit is None:
        def unhit(k):
            return Poly.var(nv, k)
    n = g.n_aerial
    pairs = alg.nonzero_pairs()
    in_edges = [g.in_edges(v) for v in range(1, n + 1)]
    if any(len(e) > 1 for e in in_edges):
        return {}
    unhit_cache: dict[tuple[int, int], Poly] = {}

    def vertex_poly(i, j):
        key = (i, j)
        if key not in unhit_cache:
            tot = Poly(nv)
            for k, c in enumerate(alg.c[i][j]):
                if c:
                    val = unhit(k)
                    tot = tot + (val * (c * HALF) if isinstance(val, Poly) else Poly.const(nv, c * HALF * val))
            unhit_cache[key] = tot
        return unhit_cache[key]

    out: dict[OpKey, Poly] = defaultdict(lambda: Poly(nv))
    for choice in itertools.product(pairs, repeat=n):
        idx = [0] * (2 * n)
        for v, (i, j) in enumerate(choice):
            idx[2 * v], idx[2 * v + 1] = i, j
        colors = None
        if color_of is not None:
            colors = tuple(color_of(i) for i in idx)
        if skip_edge is not None and any(skip_edge(e, idx[e], colors[e] if colors else None)
                                         for e in range(2 * n)):
            continue
        if infinity_ok is not None and not all(infinity_ok(idx[e]) for e, t in enumerate(g.targets)
                                               if t == G.INFINITY):
            continue
        coeff: Poly | Fraction = Fraction(1)
        ok = True
        for v in range(n):
            i, j = choice[v]
            ins = in_edges[v]
            if ins:
                c = alg.c[i][j][idx[ins[0]]]
                if not c:
                    ok = False
                    break
                coeff = coeff * (c * HALF)
            else:
                p = vertex_poly(i, j)
                if not p:
                    ok = False
                    break
                coeff = p * coeff if isinstance(coeff, Poly) else p * coeff
        if not ok:
            continue
        ground = tuple(tuple(sorted(idx[e] for e, t in enumerate(g.targets) if t == -k))
                       for k in range(1, g.n_ground + 1))
        inf = tuple(idx[e] for e, t in enumerate(g.targets) if t == G.INFINITY)
        if not isinstance(coeff, Poly):
            coeff = Poly.const(nv, coeff)
        key = (colors, ground, inf)
        out[key] = out[key] + coeff
    return {k: v for k, v in out.items() if v}


def multi_to_counts(index: Sequence[int], d: int) -> tuple[int, ...]:
    c = [0] * d
    for i in index:
        c[i] += 1
    return tuple(c)


class DerivativeCache:
    """Memoized partial derivatives d^I f for a fixed polynomial f."""

    def __init__(self, f: Poly):
        self.f = f
        self._c: dict[tuple, Poly] = {}

    def __call__(self, index: tuple) -> Poly:
        if index not in self._c:
            self._c[index] = self.f.diff_multi(multi_to_counts(index, self.f.nvars))
        return self._c[index]


def apply_table(table: dict[tuple, Poly], fs: Sequence[Poly]) -> Poly:
    """sum_key coeff(x) prod_g d^{I_g} f_g for a table keyed by ground multi-indices."""
    caches = [DerivativeCache(f) for f in fs]
    nv = fs[0].nvars
    out = Poly(nv)
    for ground, coeff in table.items():
        term = coeff
        for cache, idx in zip(caches, ground):
            dd = cache(idx)
            if not dd:
                term = None
                break
            term = term * dd
        if term is not None:
            out = out + term
    return out


def apply_b_gamma(g: G.KGraph, alg: LieAlgebraSpec, f: Poly, h: Poly) -> Poly:
    """B_g(f, h) for a plain graph with two ground vertices; exact rationals."""
    if g.n_ground != 2:
        raise ValueError("apply_b_gamma needs two ground vertices")
    if f.nvars != alg.dim or h.nvars != alg.dim:
        raise ValueError(f"polynomials have {f.nvars}/{h.nvars} variables but the algebra has dimension {alg.dim}")
    table = graph_table(g, alg)
    return apply_table({k[1]: v for k, v in table.items()}, [f, h])


def exp_symbol(table: dict[tuple, Poly], d: int, n_ground: int = 2) -> Poly:
    """Symbol of a ground-keyed table on exponentials.

    Returns a polynomial in 3d variables (x, X, Y): applying the operator to
    e^<X,x> and e^<Y,x> gives this polynomial times e^<X+Y,x>.
    """
    nv = d * (1 + n_ground)
    out = Poly(nv)
    for ground, coeff in table.items():
        lifted = Poly(nv, {e + (0,) * (nv - d): c for e, c in coeff.terms.items()})
        mono = [0] * nv
        for slot, idx in enumerate(ground):
            for i in idx:
                mono[d * (slot + 1) + i] += 1
        out = out + lifted * Poly(nv, {tuple(mono): 1})
    return out
