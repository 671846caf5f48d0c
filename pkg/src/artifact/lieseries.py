"""Exact arithmetic in the free Lie algebra on {X, Y}.

Lie elements are stored in the Lyndon basis (standard bracketing) with
``Fraction`` coefficients.  Products are computed by expanding into the free
associative algebra, where a Lie polynomial is recovered from its
associative expansion by triangular elimination on the smallest word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

from . import graphs as G

ALPHABET = "XY"
DEFAULT_CAP = 8

Assoc = dict  # word -> coefficient


class CapError(ValueError):
    pass


def is_lyndon(w: str) -> bool:
    return bool(w) and all(w < w[i:] + w[:i] for i in range(1, len(w)))


def lyndon_basis(order: int) -> list[str]:
    """Lyndon words of length <= order, by length then lexicographically (X < Y)."""
    out = []
    # Duval's generator yields Lyndon words of length <= n in lexicographic order
    w = [-1]
    k = len(ALPHABET)
    words = []
    while w:
        w[-1] += 1
        words.append("".join(ALPHABET[i] for i in w))
        m = len(w)
        while len(w) < order:
            w.append(w[len(w) - m])
        while w and w[-1] == k - 1:
            w.pop()
    out = sorted(words, key=lambda s: (len(s), s))
    return out


def witt_count(n: int, k: int = 2) -> int:
    tot = 0
    for d in range(1, n + 1):
        if n % d == 0:
            tot += _mobius(d) * k ** (n // d)
    return tot // n


def _mobius(n: int) -> int:
    res, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            res = -res
        p += 1
    return -res if n > 1 else res


@lru_cache(maxsize=None)
def standard_factor(w: str) -> tuple[str, str]:
    """Shirshov factorization w = uv with v the longest proper Lyndon suffix."""
    for i in range(1, len(w)):
        if is_lyndon(w[i:]):
            return w[:i], w[i:]
    raise ValueError(f"{w!r} has no standard factorization")


# --- free associative algebra ---------------------------------------------

def a_add(a: Assoc, b: Assoc, scale=1) -> Assoc:
    out = dict(a)
    for w, c in b.items():
        v = out.get(w, 0) + scale * c
        if v:
            out[w] = v
        else:
            out.pop(w, None)
    return out


def a_mul(a: Assoc, b: Assoc, max_len: int | None = None) -> Assoc:
    out: Assoc = {}
    for u, cu in a.items():
        for v, cv in b.items():
            if max_len is not None and len(u) + len(v) > max_len:
                continue
            w = u + v
            out[w] = out.get(w, 0) + cu * cv
    return {w: c for w, c in out.items() if c}


def a_bracket(a: Assoc, b: Assoc, max_len: int | None = None) -> Assoc:
    return a_add(a_mul(a, b, max_len), a_mul(b, a, max_len), -1)


@lru_cache(maxsize=None)
def _expand_lyndon(w: str) -> tuple:
    if len(w) == 1:
        return ((w, Fraction(1)),)
    u, v = standard_factor(w)
    return tuple(a_bracket(dict(_expand_lyndon(u)), dict(_expand_lyndon(v))).items())


def expand_lyndon(w: str) -> Assoc:
    return dict(_expand_lyndon(w))


def assoc_to_lyndon(a: Assoc) -> dict[str, Fraction]:
    """Lyndon coordinates of a Lie polynomial given by its associative expansion."""
    rest = {w: c for w, c in a.items() if c}
    out: dict[str, Fraction] = {}
    while rest:
        w = min(rest, key=lambda s: (len(s), s))
        if not is_lyndon(w):
            raise ValueError(f"not a Lie polynomial (leading word {w!r})")
        c = rest[w]
        out[w] = out.get(w, 0) + c
        rest = a_add(rest, expand_lyndon(w), -c)
    return out


# --- Lie series --------------------------------------------------------------

@dataclass
class LieSeries:
    terms: dict[str, Fraction] = field(default_factory=dict)
    max_order: int = DEFAULT_CAP
    errors: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.terms = {w: c for w, c in self.terms.items() if c != 0 and len(w) <= self.max_order}
        for w in self.terms:
            if not is_lyndon(w):
                raise ValueError(f"{w!r} is not a Lyndon word")

    @classmethod
    def generator(cls, letter: str, max_order: int = DEFAULT_CAP) -> "LieSeries":
        return cls({letter: Fraction(1)}, max_order)

    @classmethod
    def from_assoc(cls, a: Assoc, max_order: int) -> "LieSeries":
        return cls(assoc_to_lyndon({w: c for w, c in a.items() if len(w) <= max_order}), max_order)

    def to_assoc(self) -> Assoc:
        out: Assoc = {}
        for w, c in self.terms.items():
            out = a_add(out, expand_lyndon(w), c)
        return out

    def __add__(self, other: "LieSeries") -> "LieSeries":
        mo = min(self.max_order, other.max_order)
        t = dict(self.terms)
        for w, c in other.terms.items():
            t[w] = t.get(w, 0) + c
        return LieSeries(t, mo)

    def __neg__(self):
        return LieSeries({w: -c for w, c in self.terms.items()}, self.max_order)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "LieSeries":
        return LieSeries({w: v * c for w, v in self.terms.items()}, self.max_order)

    def bracket(self, other: "LieSeries") -> "LieSeries":
        mo = min(self.max_order, other.max_order)
        return LieSeries.from_assoc(a_bracket(self.to_assoc(), other.to_assoc(), mo), mo)

    def degree_part(self, n: int) -> "LieSeries":
        return LieSeries({w: c for w, c in self.terms.items() if len(w) == n}, self.max_order)

    def coefficient(self, w: str) -> Fraction:
        return self.terms.get(w, Fraction(0))

    def substitute(self, x: "LieSeries", y: "LieSeries") -> "LieSeries":
        """Replace the generators X, Y by Lie series x, y."""
        mo = min(self.max_order, x.max_order, y.max_order)
        imgs = {"X": x.to_assoc(), "Y": y.to_assoc()}
        out: Assoc = {}
        for w, c in self.terms.items():
            for word, cw in expand_lyndon(w).items():
                term: Assoc = {"": Fraction(1)}
                for ch in word:
                    term = a_mul(term, imgs[ch], mo)
                out = a_add(out, term, c * cw)
        return LieSeries.from_assoc(out, mo)

    def __eq__(self, other):
        return isinstance(other, LieSeries) and self.terms == other.terms

    def lines(self) -> list[str]:
        out = []
        for w in sorted(self.terms, key=lambda s: (len(s), s)):
            out.append(f"{self.terms[w]} * {bracket_string(w)}")
        return out

    def machine_lines(self) -> list[str]:
        out = []
        for w in sorted(self.terms, key=lambda s: (len(s), s)):
            c = Fraction(self.terms[w])
            err = self.errors.get(w, 0.0)
            out.append(f"{len(w)};{w};{c.numerator}/{c.denominator};{err:.3g}")
        return out


def bracket_string(w: str) -> str:
    if len(w) == 1:
        return w
    u, v = standard_factor(w)
    return f"[{bracket_string(u)},{bracket_string(v)}]"


# --- BCH oracle ---------------------------------------------------------------

def _exp_assoc(letter: str, order: int) -> Assoc:
    return {letter * k: Fraction(1, math.factorial(k)) for k in range(order + 1)}


def _log_assoc(a: Assoc, order: int) -> Assoc:
    """log(a) for a = 1 + (terms of positive length), truncated."""
    u = {w: c for w, c in a.items() if w}
    out: Assoc = {}
    power: Assoc = {"": Fraction(1)}
    for k in range(1, order + 1):
        power = a_mul(power, u, order)
        out = a_add(out, power, Fraction((-1) ** (k + 1), k))
    return out


def left_normed(word: str) -> Assoc:
    """Expansion of [x1,[x2,[...,xn]]] for the word x1...xn."""
    acc: Assoc = {word[-1]: Fraction(1)}
    for ch in reversed(word[:-1]):
        acc = a_bracket({ch: Fraction(1)}, acc)
    return acc


def dynkin_bch(order: int, cap: int = DEFAULT_CAP) -> LieSeries:
    """BCH series through ``order`` from the Dynkin formula.

    log(e^X e^Y) is expanded in the free associative algebra and each word w
    is replaced by [w]/|w| (iterated brackets), which is Dynkin's form.
    """
    if order > cap:
        raise CapError(f"order {order} exceeds the BCH cap {cap}")
    prod = a_mul(_exp_assoc("X", order), _exp_assoc("Y", order), order)
    log = _log_assoc(prod, order)
    lie: Assoc = {}
    for w, c in log.items():
        lie = a_add(lie, left_normed(w), c / len(w))
    return LieSeries.from_assoc(lie, order)


def bch_direct(order: int) -> LieSeries:
    """log(e^X e^Y) projected by triangular elimination (no Dynkin map)."""
    prod = a_mul(_exp_assoc("X", order), _exp_assoc("Y", order), order)
    return LieSeries.from_assoc(_log_assoc(prod, order), order)


# --- graph symbols --------------------------------------------------------------

@dataclass(frozen=True)
class GraphSymbol:
    graph_id: str
    word: str
    lie: LieSeries
    weight: object = None


def _tree_expr(g: G.KGraph, v: int) -> tuple[str, Assoc]:
    if v < 0:
        letter = ALPHABET[-v - 1]
        return letter, {letter: Fraction(1)}
    a, b = g.out(v)
    sa, ea = _tree_expr(g, a)
    sb, eb = _tree_expr(g, b)
    return f"[{sa},{sb}]", a_bracket(ea, eb)


def graph_symbol(g: G.KGraph) -> GraphSymbol:
    """Bracket word read from the root: first edge is the left slot, G1 = X, G2 = Y."""
    cls = G.classify(g)
    if cls.kind != G.LIE or g.n_ground != 2:
        raise ValueError(f"graph symbol needs a LieSimple graph with two ground vertices, got {cls.kind}")
    word, assoc = _tree_expr(g, G.root(g))
    return GraphSymbol(g.id, word, LieSeries.from_assoc(assoc, g.n_aerial + 1))


def lie_graphs(n: int) -> list[G.KGraph]:
    return [g for g in G.enumerate_graphs(n, 2, G.ESSENTIAL) if G.classify(g).kind == G.LIE]


class MissingWeights(KeyError):
    def __init__(self, ids):
        super().__init__(", ".join(ids))
        self.ids = list(ids)


def kontsevich_bch(order: int, weight_source: Callable, cap: int | None = None) -> LieSeries:
    """Graph expansion of BCH through ``order``.

    Z = X + Y + sum_n 1/n! sum over labeled LieSimple graphs w_G 2^-n G(X, Y);
    the 2^-n is the half-bracket carried by each aerial vertex.
    ``weight_source(graph)`` returns a WeightEstimate-like object with
    ``exact_or_value`` and ``std_error``; it may return None for a missing weight.
    Per-coefficient standard errors are stored on the result's ``errors``.
    """
    limit = (cap if cap is not None else G.DEFAULT_CAPS[G.ESSENTIAL]) + 1
    if order > limit:
        raise CapError(f"order {order} exceeds enumeration cap + 1")
    total: dict[str, Fraction | float] = {"X": Fraction(1), "Y": Fraction(1)}
    var: dict[str, float] = {}
    missing = []
    for n in range(1, order):
        per_key: dict[str, tuple[dict, float]] = {}
        for g in lie_graphs(n):
            try:
                w = weight_source(g)
            except LookupError:
                w = None
            if w is None:
                missing.append(g.id)
                continue
            sym = graph_symbol(g)
            mult = Fraction(G.labeled_multiplicity(g), math.factorial(n) * 2 ** n)
            val = w.exact_or_value
            for word, c in sym.lie.terms.items():
                total[word] = total.get(word, 0) + mult * c * val
            if w.snapped is None and w.std_error:
                key = getattr(w, "source_id", None) or g.id
                vec, s = per_key.get(key, ({}, w.std_error))
                for word, c in sym.lie.terms.items():
                    vec[word] = vec.get(word, 0) + float(mult * c) * getattr(w, "sign", 1)
                per_key[key] = (vec, s)
        for vec, s in per_key.values():
            for word, c in vec.items():
                var[word] = var.get(word, 0.0) + (c * s) ** 2
    if missing:
        raise MissingWeights(missing)
    exact = all(isinstance(c, (int, Fraction)) for c in total.values())
    if exact:
        series = LieSeries({w: Fraction(c) for w, c in total.items()}, order)
    else:
        series = _FloatLie(total, order)
    series.errors = {w: math.sqrt(v) for w, v in var.items()}
    return series


class _FloatLie(LieSeries):
    """Lyndon-basis series with float coefficients (unsnapped weights)."""

    def __post_init__(self):
        self.terms = {w: c for w, c in self.terms.items() if c != 0 and len(w) <= self.max_order}

    def machine_lines(self) -> list[str]:
        out = []
        for w in sorted(self.terms, key=lambda s: (len(s), s)):
            out.append(f"{len(w)};{w};{float(self.terms[w]):.10g};{self.errors.get(w, 0.0):.3g}")
        return out


def compare_to_dynkin(series: LieSeries, nsigma: float = 3.0, den_bound: int = 48) -> dict[str, dict]:
    """Per-word comparison with the Dynkin oracle.

    Each entry has the reference value, the difference, the propagated error,
    ``within`` (|diff| <= nsigma * err, or exact equality) and ``flag``: the
    error exceeds half the distance from the reference to its nearest other
    rational with denominator <= den_bound, so the estimate cannot tell them apart.
    """
    ref = dynkin_bch(series.max_order)
    words = set(ref.terms) | set(series.terms)
    out = {}
    for w in sorted(words, key=lambda s: (len(s), s)):
        r = ref.coefficient(w)
        v = series.terms.get(w, 0)
        err = series.errors.get(w, 0.0)
        diff = float(v) - float(r)
        gap = 1.0 / (Fraction(r).denominator * den_bound)
        out[w] = {
            "ref": r, "value": v, "diff": diff, "err": err,
            "within": (v == r) or abs(diff) <= nsigma * err,
            "flag": err > 0.5 * gap,
        }
    return out
