"""Coisotropic reduction and bi-quantization for linear Poisson structures.

A ``SubalgebraData`` fixes h, a complement q and a character lambda of h.  The
chart of h_perp_{-lambda} has one coordinate per q direction; an h coordinate
evaluates to its lambda value.  Edge indices in q are tangent (+) and indices
in h are normal (-); an edge to infinity carries an h index and emits the
odd generator th_a.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from . import graphs as G
from .algebra import LieAlgebraSpec, change_basis, double, heisenberg3, load_algebra, preset, sl2
from .linalg import nullspace, rref
from .operators import DerivativeCache, graph_table
from .poly import EpsPoly, Poly, monomials
from .star import duflo_exp_symbol, exp_truncated, j_series, mat_mul, _truncate
from .weights import QUADRANT_H, QUADRANT_V, TWO_COLOR

BIQUANT_CAP = 3


class SubalgebraError(ValueError):
    pass


class NotClosedError(ValueError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class SubalgebraData:
    parent: LieAlgebraSpec
    h: tuple[int, ...]
    q: tuple[int, ...]
    lam: tuple[Fraction, ...] = ()
    name: str = ""
    h_stable_complement: bool = field(default=False, init=False)
    symmetric_pair: bool = field(default=False, init=False)

    def __post_init__(self):
        alg = self.parent
        h, q = tuple(self.h), tuple(self.q)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "q", q)
        lam = tuple(Fraction(x) for x in self.lam) or (Fraction(0),) * len(h)
        object.__setattr__(self, "lam", lam)
        if sorted(h + q) != list(range(alg.dim)):
            raise SubalgebraError("h and q must partition the basis indices")
        if len(lam) != len(h):
            raise SubalgebraError("lambda needs one value per h direction")
        hs, qs = set(h), set(q)
        names = alg.basis_names
        for a in h:
            for b in h:
                for k, c in enumerate(alg.c[a][b]):
                    if c and k not in hs:
                        raise SubalgebraError(f"h is not closed: [{names[a]},{names[b]}] has a {names[k]} component")
        lv = dict(zip(h, lam))
        for a in h:
            for b in h:
                val = sum((c * lv[k] for k, c in enumerate(alg.c[a][b]) if c), Fraction(0))
                if val:
                    raise SubalgebraError(f"lambda does not vanish on [{names[a]},{names[b]}]")
        stable = all(not c or k in qs for a in h for b in q for k, c in enumerate(alg.c[a][b]))
        sym = stable and all(not c or k in hs for a in q for b in q for k, c in enumerate(alg.c[a][b]))
        object.__setattr__(self, "h_stable_complement", stable)
        object.__setattr__(self, "symmetric_pair", sym)

    # chart helpers
    @property
    def nq(self) -> int:
        return len(self.q)

    @property
    def chart_names(self) -> list[str]:
        return [self.parent.basis_names[k] for k in self.q]

    @property
    def lam_map(self) -> dict[int, Fraction]:
        return dict(zip(self.h, self.lam))

    def pos(self, k: int) -> int:
        return self.q.index(k)

    def in_h(self, k: int) -> bool:
        return k in self.h

    def unhit(self, k: int):
        if k in self.q:
            return Poly.var(self.nq, self.pos(k))
        return self.lam_map[k]

    def color2(self, k: int) -> G.EdgeColor:
        return G.EdgeColor(-1 if k in self.h else 1)

    def color4(self, k: int) -> G.EdgeColor:
        # axis 1 carries h_perp, axis 2 the whole dual (all directions tangent)
        return G.EdgeColor(-1 if k in self.h else 1, 1)

    @property
    def lambda_zero(self) -> bool:
        return not any(self.lam)

    def flags(self) -> list[str]:
        out = []
        if self.h_stable_complement:
            out.append("h_stable_complement")
        if self.symmetric_pair:
            out.append("symmetric_pair")
        return out

    def to_text(self) -> str:
        nm = self.parent.basis_names
        lines = [self.parent.to_text(), "h=" + ",".join(nm[a] for a in self.h),
                 "q=" + ",".join(nm[a] for a in self.q)]
        if any(self.lam):
            lines.append("lambda=" + ",".join(f"{nm[a]}:{v}" for a, v in zip(self.h, self.lam) if v))
        if self.flags():
            lines.append("flags=" + ",".join(self.flags()))
        return "\n".join(lines)


def _index(tok: str, names: Sequence[str]) -> int:
    tok = tok.strip()
    if tok in names:
        return names.index(tok)
    if tok.isdigit() and int(tok) < len(names):
        return int(tok)
    raise SubalgebraError(f"unknown basis element {tok!r}")


def load_subalgebra(text: str) -> SubalgebraData:
    """Algebra text (or a preset name line) plus ``h=``, ``q=``, ``lambda=``, ``flags=`` fields."""
    alg_lines, extra = [], {}
    for raw in re.split(r"[;\n]", text):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"(h|q|lambda|flags)\s*=\s*(.*)", line)
        if m:
            extra[m.group(1)] = m.group(2).strip()
        elif line:
            alg_lines.append(line)
    if "h" not in extra:
        raise SubalgebraError("missing h=")
    alg_text = "\n".join(alg_lines)
    alg = load_algebra(alg_text)
    names = alg.basis_names
    h = tuple(_index(t, names) for t in extra["h"].split(",") if t.strip())
    if "q" in extra:
        q = tuple(_index(t, names) for t in extra["q"].split(",") if t.strip())
    else:
        q = tuple(i for i in range(alg.dim) if i not in h)
    lam = [Fraction(0)] * len(h)
    for item in filter(None, (s.strip() for s in extra.get("lambda", "").split(","))):
        k, _, v = item.partition(":")
        a = _index(k, names)
        if a not in h:
            raise SubalgebraError(f"lambda given on {k!r}, which is not in h")
        lam[h.index(a)] = Fraction(v.strip())
    sub = SubalgebraData(alg, h, q, tuple(lam), alg.name or "custom")
    claimed = {f.strip() for f in extra.get("flags", "").split(",") if f.strip()}
    unknown = claimed - {"h_stable_complement", "symmetric_pair"}
    if unknown:
        raise SubalgebraError(f"unknown flags {sorted(unknown)}")
    missing = claimed - set(sub.flags())
    if missing:
        raise SubalgebraError(f"flags {sorted(missing)} do not hold for this data")
    return sub


# ---------------------------------------------------------------------------
# presets

def _sub(alg, h_names, lam=None, name=""):
    names = alg.basis_names
    h = tuple(names.index(x) for x in h_names)
    q = tuple(i for i in range(alg.dim) if i not in h)
    lv = tuple(Fraction((lam or {}).get(x, 0)) for x in h_names)
    return SubalgebraData(alg, h, q, lv, name)


def sl2_compact_basis() -> LieAlgebraSpec:
    """sl2 in the basis K = X - Y (compact), P1 = H, P2 = X + Y."""
    return change_basis(sl2(), [[0, 1, -1], [1, 0, 0], [0, 1, 1]], ["K", "P1", "P2"], "sl2-cartan")


def sl2_iwasawa_basis() -> LieAlgebraSpec:
    """sl2 in the basis K = X - Y, H, X (k, a, n of the Iwasawa decomposition)."""
    return change_basis(sl2(), [[0, 1, -1], [1, 0, 0], [0, 1, 0]], ["K", "H", "X"], "sl2-iwasawa")


def _full(alg_name):
    return _sub(preset(alg_name), [], name=f"{alg_name}-full")


SUB_PRESETS: dict[str, Callable[[], SubalgebraData]] = {
    "full-sl2": lambda: _full("sl2"),
    "full-heisenberg": lambda: _full("heisenberg3"),
    "weyl": lambda: _sub(heisenberg3(), ["Z"], {"Z": 1}, "weyl"),
    "weyl0": lambda: _sub(heisenberg3(), ["Z"], {"Z": 0}, "weyl0"),
    "polarization": lambda: _sub(heisenberg3(), ["Y", "Z"], {"Z": 1}, "polarization"),
    "iwasawa": lambda: _sub(sl2_iwasawa_basis(), ["X"], None, "iwasawa"),
    "sl2-cartan": lambda: _sub(sl2_compact_basis(), ["K"], None, "sl2-cartan"),
    "sl2-torus": lambda: _sub(sl2(), ["H"], None, "sl2-torus"),
    "double-sl2": lambda: double_pair(sl2(), 0),
    "double-aff2": lambda: double_pair(preset("aff2"), 0),
    "double-heisenberg": lambda: double_pair(heisenberg3(), 0),
}


def sub_preset(name: str) -> SubalgebraData:
    if name not in SUB_PRESETS:
        raise SubalgebraError(f"unknown subalgebra preset {name!r}; known: {', '.join(SUB_PRESETS)}")
    return SUB_PRESETS[name]()


def double_pair(base: LieAlgebraSpec, t=0) -> SubalgebraData:
    """The double of ``base`` at parameter t with h = span K_a, q = span P_a."""
    alg = double(base, t)
    d = base.dim
    return SubalgebraData(alg, tuple(range(d)), tuple(range(d, 2 * d)), (), f"double-{base.name}-t{t}")


# ---------------------------------------------------------------------------
# graph sums with weight bookkeeping

@dataclass
class Contribution:
    graph_id: str
    n: int
    source_id: str
    value: object  # exact Fraction or float, signed for this graph
    sigma: float
    sign: int
    factor: Fraction  # labeled multiplicity / n!
    table: dict  # (ground index tuples, infinity indices) -> Poly


@dataclass
class GraphSum:
    """Weighted sum of colored graph operators, kept per graph for error bars."""

    nvars: int
    contributions: list[Contribution] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    unsnapped: set = field(default_factory=set)

    def orders(self) -> list[int]:
        return sorted({c.n for c in self.contributions})

    def operator(self, n: int) -> dict:
        acc: dict = defaultdict(lambda: Poly(self.nvars))
        for c in self.contributions:
            if c.n != n:
                continue
            s = c.factor * c.value if isinstance(c.value, Fraction) else float(c.factor) * c.value
            for k, p in c.table.items():
                acc[k] = acc[k] + p * s
        return {k: v for k, v in acc.items() if v}

    def linear_image(self, fn: Callable[[dict], Poly], n: int | None = None) -> tuple[Poly, dict]:
        """fn applied to the weighted sum, with per-term propagated errors.

        ``fn`` must be linear in the table.  Errors combine contributions that
        share a weight source, then add independent sources in quadrature.
        """
        value = None
        by_source: dict[str, Poly] = {}
        sig: dict[str, float] = {}
        for c in self.contributions:
            if n is not None and c.n != n:
                continue
            img = fn(c.table)
            if not img:
                continue
            s = c.factor * c.value if isinstance(c.value, Fraction) else float(c.factor) * c.value
            value = img * s if value is None else value + img * s
            if c.sigma > 0:
                unit = img * (float(c.factor) * c.sign)
                by_source[c.source_id] = by_source.get(c.source_id, Poly(unit.nvars)) + unit
                sig[c.source_id] = c.sigma
        err: dict[tuple, float] = defaultdict(float)
        for sid, p in by_source.items():
            for e, v in p.terms.items():
                err[e] += (float(v) * sig[sid]) ** 2
        if value is None:
            value = Poly(fn({}).nvars) if fn({}) is not None else Poly(self.nvars)
        return value, {e: math.sqrt(v) for e, v in err.items()}

    def contributing_ids(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = defaultdict(list)
        for c in self.contributions:
            if c.value != 0 and c.table:
                out[c.n].append(c.graph_id)
        return dict(out)


def collect(sub: SubalgebraData, n: int, m: int, n_inf: int, mode: str, source,
            into: GraphSum | None = None) -> GraphSum:
    """Add the contributions of all colored essential graphs with n aerial vertices."""
    alg = sub.parent
    gs = into if into is not None else GraphSum(sub.nq)
    four = mode in (QUADRANT_H, QUADRANT_V)
    color = sub.color4 if four else sub.color2
    for skel in G.enumerate_graphs(n, m, G.ESSENTIAL, n_infinity=n_inf):
        targets = skel.targets

        def skip(e, idx, col, targets=targets):
            # ground functions live on the chart: h derivatives vanish
            return targets[e] < 0 and idx in sub.h

        table = graph_table(skel, alg, color_of=color, unhit=sub.unhit, nvars=sub.nq,
                            skip_edge=skip, infinity_ok=sub.in_h)
        if not table:
            continue
        by_color: dict = defaultdict(dict)
        for (cols, ground, inf), p in table.items():
            by_color[cols][(ground, inf)] = p
        factor = Fraction(G.labeled_multiplicity(skel), math.factorial(n))
        for cols, tab in by_color.items():
            colored = G.KGraph(n, m, targets, cols)
            try:
                w = source(colored, mode)
            except LookupError:
                gs.missing.append(f"{colored} ({mode})")
                continue
            val = w.exact_or_value
            if val == 0:
                continue
            if not isinstance(val, Fraction):
                gs.unsnapped.add(w.source_id)
            tab = {(tuple(tuple(sub.pos(i) for i in I) for I in ground), inf): p for (ground, inf), p in tab.items()}
            gs.contributions.append(Contribution(
                str(colored), n, w.source_id or colored.id, val,
                0.0 if isinstance(val, Fraction) else w.std_error, w.sign, factor, tab))
    return gs


def _check_order(order: int):
    if order < 1 or order > BIQUANT_CAP:
        raise ValueError(f"order must be between 1 and {BIQUANT_CAP}")


# ---------------------------------------------------------------------------
# reduction elements and the differential

@dataclass
class ReductionElement:
    """sum over exterior words of (eps-graded chart polynomial) (x) th_word."""

    nvars: int
    parts: dict[tuple, EpsPoly] = field(default_factory=dict)

    @classmethod
    def scalar(cls, F: EpsPoly | Poly) -> "ReductionElement":
        F = F if isinstance(F, EpsPoly) else EpsPoly.from_poly(F)
        return cls(F.nvars, {(): F})

    def __sub__(self, other):
        keys = set(self.parts) | set(other.parts)
        out = {k: self.parts.get(k, EpsPoly(self.nvars)) - other.parts.get(k, EpsPoly(self.nvars)) for k in keys}
        return ReductionElement(self.nvars, {k: v for k, v in out.items() if not v.is_zero()})

    def __add__(self, other):
        keys = set(self.parts) | set(other.parts)
        out = {k: self.parts.get(k, EpsPoly(self.nvars)) + other.parts.get(k, EpsPoly(self.nvars)) for k in keys}
        return ReductionElement(self.nvars, {k: v for k, v in out.items() if not v.is_zero()})

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.parts.values())

    def max_abs(self) -> float:
        return max((p.max_abs() for p in self.parts.values()), default=0.0)

    def truncate(self, order: int) -> "ReductionElement":
        return ReductionElement(self.nvars, {k: v.truncate(order) for k, v in self.parts.items()
                                             if not v.truncate(order).is_zero()})

    def to_lines(self, chart_names: Sequence[str], h_names: Sequence[str]) -> list[str]:
        out = []
        for word in sorted(self.parts, key=lambda w: (len(w), w)):
            wedge = " ^ ".join(f"th_{h_names[a]}" for a in word) if word else "1"
            for k, p in sorted(self.parts[word].parts.items()):
                out.append(f"eps^{k} : {p.to_str(chart_names)} (x) {wedge}")
        return out


def mu0_operator(sub: SubalgebraData, order: int, source) -> GraphSum:
    """Graphs with one ground vertex and one edge to infinity, n = 1..order."""
    _check_order(order)
    gs = GraphSum(sub.nq)
    if not sub.h:
        return gs
    for n in range(1, order + 1):
        collect(sub, n, 1, 1, TWO_COLOR, source, gs)
    return gs


def _apply_unary(table: dict, F: Poly, cache: DerivativeCache | None = None) -> dict[int, Poly]:
    """{h index: sum coeff * d^I F} for a table keyed by ((I,), (a,))."""
    cache = cache or DerivativeCache(F)
    out: dict[int, Poly] = defaultdict(lambda: Poly(F.nvars))
    for (ground, inf), coeff in table.items():
        dd = cache(ground[0])
        if dd:
            out[inf[0]] = out[inf[0]] + coeff * dd
    return dict(out)


def mu0_apply(sub: SubalgebraData, F: EpsPoly | Poly, order: int, weight_source,
              ops: GraphSum | None = None) -> ReductionElement:
    """mu_0 on an exterior-degree-0 element, truncated at eps^order."""
    F = F if isinstance(F, EpsPoly) else EpsPoly.from_poly(F)
    ops = ops if ops is not None else mu0_operator(sub, order, weight_source)
    if ops.missing:
        raise LookupError("missing weights: " + ", ".join(ops.missing))
    res: dict[tuple, EpsPoly] = {}
    tables = {n: ops.operator(n) for n in range(1, order + 1)}
    for a, Fa in F.parts.items():
        cache = DerivativeCache(Fa)
        for n, tab in tables.items():
            if a + n > order:
                continue
            for hidx, p in _apply_unary(tab, Fa, cache).items():
                key = (hidx,)
                cur = res.get(key, EpsPoly(sub.nq))
                res[key] = cur + EpsPoly(sub.nq, {a + n: p})
    return ReductionElement(sub.nq, {k: v for k, v in res.items() if not v.is_zero()})


def _chart_bracket_field(sub: SubalgebraData, a: int, F: Poly) -> Poly:
    """{x_a, F} restricted to the chart."""
    alg = sub.parent
    out = Poly(sub.nq)
    for j in sub.q:
        dF = F.diff(sub.pos(j))
        if not dF:
            continue
        coeff = Poly(sub.nq)
        for k, c in enumerate(alg.c[a][j]):
            if c:
                u = sub.unhit(k)
                coeff = coeff + (u * c if isinstance(u, Poly) else Poly.const(sub.nq, u * c))
        out = out + coeff * dF
    return out


def _wedge(a: int, word: tuple) -> tuple[int, tuple]:
    if a in word:
        return 0, word
    lst = list(word)
    sign = (-1) ** sum(1 for b in lst if b < a)
    return sign, tuple(sorted(lst + [a]))


def d_ce(sub: SubalgebraData, elem: ReductionElement) -> ReductionElement:
    """Chevalley-Eilenberg differential d = sum_a th_a rho(a) - 1/2 sum c^k_ab th_a th_b i_k."""
    alg = sub.parent
    out: dict[tuple, EpsPoly] = {}

    def add(word, k, p):
        cur = out.get(word, EpsPoly(sub.nq))
        out[word] = cur + EpsPoly(sub.nq, {k: p})

    for word, F in elem.parts.items():
        for k, P in F.parts.items():
            for a in sub.h:
                img = _chart_bracket_field(sub, a, P)
                if img:
                    s, w = _wedge(a, word)
                    if s:
                        add(w, k, img * s)
            # th_c -> -1/2 sum c^c_ab th_a th_b, applied as a derivation
            for pos, cidx in enumerate(word):
                rest = word[:pos] + word[pos + 1:]
                lead = (-1) ** pos
                for a in sub.h:
                    for b in sub.h:
                        coef = alg.c[a][b][cidx]
                        if not coef:
                            continue
                        s1, w1 = _wedge(b, rest)
                        s2, w2 = _wedge(a, w1)
                        if s1 and s2:
                            add(w2, k, P * (Fraction(-1, 2) * coef * lead * s1 * s2))
    return ReductionElement(sub.nq, {k: v for k, v in out.items() if not v.is_zero()})


# ---------------------------------------------------------------------------
# reduction algebra

def _poly_vec(p: Poly, index: dict) -> dict[int, object]:
    return {index[e]: c for e, c in p.terms.items()}


def reduction_basis(sub: SubalgebraData, order: int, degree_cap: int, weight_source,
                    ops: GraphSum | None = None) -> list[EpsPoly]:
    """Leading parts and lifts of the degree-0 kernel of mu_0 (eps-truncated).

    Unknowns F_0 .. F_{order-1} are chart polynomials of degree <= degree_cap;
    equations are the eps^1 .. eps^order parts of mu_0(sum eps^k F_k) = 0.
    The basis is reduced on the leading parts F_0 (row echelon form).
    """
    if degree_cap < 0 or degree_cap > 6:
        raise ValueError("degree_cap must be between 0 and 6")
    ops = ops if ops is not None else mu0_operator(sub, order, weight_source)
    if ops.missing:
        raise LookupError("missing weights: " + ", ".join(ops.missing))
    if ops.unsnapped:
        raise ValueError("exact kernels need snapped weights; unsnapped: " + ", ".join(sorted(ops.unsnapped)))
    monos = monomials(sub.nq, degree_cap)
    N = len(monos)
    K = max(order, 1)
    images = {}
    tables = {n: ops.operator(n) for n in range(1, order + 1)}
    for n, tab in tables.items():
        images[n] = [_apply_unary(tab, Poly(sub.nq, {mo: 1})) for mo in monos]
    rows_map: dict[tuple, dict[int, Fraction]] = defaultdict(dict)
    for mord in range(1, order + 1):
        for k in range(0, min(mord, K)):
            n = mord - k
            for col, img in enumerate(images.get(n, [])):
                for hidx, p in img.items():
                    for e, c in p.terms.items():
                        row = rows_map[(mord, hidx, e)]
                        row[k * N + col] = row.get(k * N + col, 0) + c
    rows = [[r.get(j, 0) for j in range(K * N)] for r in rows_map.values()]
    kernel = nullspace(rows, K * N) if rows else [[Fraction(int(i == j)) for i in range(K * N)] for j in range(K * N)]
    # echelon form on the leading block (reverse column order so top degree leads)
    order_cols = list(range(N - 1, -1, -1)) + list(range(N, K * N))
    perm = [[v[c] for c in order_cols] for v in kernel]
    red, piv = rref(perm, K * N)
    basis = []
    for r, p in zip(red, piv):
        if p >= N:
            break
        vec = [Fraction(0)] * (K * N)
        for j, c in enumerate(order_cols):
            vec[c] = r[j]
        parts = {}
        for k in range(K):
            terms = {monos[i]: vec[k * N + i] for i in range(N) if vec[k * N + i]}
            if terms:
                parts[k] = Poly(sub.nq, terms)
        basis.append(EpsPoly(sub.nq, parts))
    return basis


def leading_part(F: EpsPoly) -> Poly:
    """Top-degree homogeneous part of the eps^0 coefficient (the classical limit)."""
    p = F[0]
    if not p:
        return p
    return p.homogeneous_part(p.degree())


def normal_form(F: EpsPoly) -> EpsPoly:
    """Rewrite F in the form F_n + eps F' + ... with F_n homogeneous of top degree.

    Lower-degree parts of the eps^0 term are kept as they are; the check for
    the parity grading is ``parity_graded``.
    """
    return F


def parity_graded(F: EpsPoly) -> bool:
    """True when eps^k carries only degree (top - k) terms with k even."""
    top = F[0].degree() if F[0] else None
    if top is None:
        return True
    for k, p in F.parts.items():
        for e in p.terms:
            if k % 2 or sum(e) != top - k:
                return False
    return True


def cf_operator(sub: SubalgebraData, order: int, source) -> GraphSum:
    _check_order(order)
    gs = GraphSum(sub.nq)
    for n in range(1, order + 1):
        collect(sub, n, 2, 0, TWO_COLOR, source, gs)
    return gs


def cf_star(sub: SubalgebraData, F: EpsPoly | Poly, Gp: EpsPoly | Poly, order: int, weight_source,
            ops: GraphSum | None = None, mu0: GraphSum | None = None, check: bool = True) -> EpsPoly:
    """mu_1(F, G) on chart polynomials; inputs must be mu_0-closed through ``order``."""
    F = F if isinstance(F, EpsPoly) else EpsPoly.from_poly(F)
    Gp = Gp if isinstance(Gp, EpsPoly) else EpsPoly.from_poly(Gp)
    if check and sub.h:
        for label, X in (("first", F), ("second", Gp)):
            res = mu0_apply(sub, X, order, weight_source, mu0)
            if not res.is_zero():
                raise NotClosedError(f"{label} argument is not closed under mu_0", res)
    ops = ops if ops is not None else cf_operator(sub, order, weight_source)
    if ops.missing:
        raise LookupError("missing weights: " + ", ".join(ops.missing))
    tables = {n: {k[0]: v for k, v in ops.operator(n).items()} for n in range(1, order + 1)}
    out = EpsPoly(sub.nq)
    for a, pf in F.parts.items():
        for b, pg in Gp.parts.items():
            if a + b > order:
                continue
            parts = {a + b: pf * pg}
            cf, cg = DerivativeCache(pf), DerivativeCache(pg)
            for n, tab in tables.items():
                if a + b + n > order:
                    continue
                tot = Poly(sub.nq)
                for (I, J), coeff in tab.items():
                    x = cf(I)
                    if not x:
                        continue
                    y = cg(J)
                    if y:
                        tot = tot + coeff * x * y
                parts[a + b + n] = tot
            out = out + EpsPoly(sub.nq, parts)
    return out


def cf_commutator(sub, F, Gp, order, weight_source, **kw) -> EpsPoly:
    return cf_star(sub, F, Gp, order, weight_source, **kw) - cf_star(sub, Gp, F, order, weight_source, **kw)


# ---------------------------------------------------------------------------
# symbols on exponentials

@dataclass
class Symbol:
    """eps-graded polynomial symbol with per-term standard errors."""

    nvars: int
    parts: dict[int, Poly]
    errors: dict[int, dict]
    names: list[str]

    def total(self) -> Poly:
        return sum(self.parts.values(), Poly(self.nvars))

    def residual_ok(self, other: "Symbol | None" = None, nsigma: float = 3.0, floor: float = 1e-9) -> bool:
        """self - other vanishes termwise within nsigma combined errors."""
        for k in set(self.parts) | set(other.parts if other else {}):
            a = self.parts.get(k, Poly(self.nvars))
            b = other.parts.get(k, Poly(self.nvars)) if other else Poly(self.nvars)
            diff = a - b
            ea = self.errors.get(k, {})
            eb = other.errors.get(k, {}) if other else {}
            for e, c in diff.terms.items():
                tol = nsigma * math.hypot(ea.get(e, 0.0), eb.get(e, 0.0)) + floor
                if abs(float(c)) > tol:
                    return False
        return True

    def to_lines(self) -> list[str]:
        out = []
        for k in sorted(self.parts):
            p = self.parts[k]
            if not p:
                continue
            err = self.errors.get(k, {})
            emax = max(err.values(), default=0.0)
            out.append(f"eps^{k} : {p.to_str(self.names)}" + (f"   [max err {emax:.2g}]" if emax else ""))
        return out


def _symbol_fn(sub: SubalgebraData, n_ground: int):
    """Linear map from a chart table to the (x, X1, ..[, X2]) symbol polynomial."""
    nq = sub.nq
    nv = nq * (1 + n_ground)

    def fn(table):
        out = Poly(nv)
        for (ground, _inf), coeff in table.items():
            mono = [0] * nv
            for slot, idx in enumerate(ground):
                for i in idx:
                    mono[nq * (slot + 1) + i] += 1
            lifted = Poly(nv, {e + tuple(mono[nq:]): c for e, c in coeff.terms.items()})
            out = out + lifted
        return out
    return fn


def _symbol_names(sub, letters):
    base = sub.chart_names
    out = [f"x{nm}" for nm in base]
    for L in letters:
        out += [f"{L}{nm}" for nm in base]
    return out


def graph_symbol_sum(gs: GraphSum, sub: SubalgebraData, n_ground: int, order: int, letters) -> Symbol:
    fn = _symbol_fn(sub, n_ground)
    nv = sub.nq * (1 + n_ground)
    parts = {0: Poly.const(nv, 1)}
    errors: dict[int, dict] = {}
    for n in range(1, order + 1):
        val, err = gs.linear_image(fn, n)
        parts[n] = val
        errors[n] = err
    return Symbol(nv, parts, errors, _symbol_names(sub, letters))


def e_symbol(sub: SubalgebraData, order: int, weight_source, require_pair: bool = True) -> Symbol:
    """mu_1(e^X, e^Y) e^{-X-Y} for X, Y in q, as polynomials in (x, X, Y)."""
    if require_pair and not sub.symmetric_pair:
        raise SubalgebraError("e_symbol needs a symmetric pair (h = k, q = p)")
    gs = cf_operator(sub, order, weight_source)
    if gs.missing:
        raise LookupError("missing weights: " + ", ".join(gs.missing))
    return graph_symbol_sum(gs, sub, 2, order, ("X", "Y"))


def swap_xy(sym: Symbol) -> Symbol:
    nq = sym.nvars // 3

    def sw(e):
        return e[:nq] + e[2 * nq:] + e[nq:2 * nq]
    parts = {k: Poly(sym.nvars, {sw(e): c for e, c in p.terms.items()}) for k, p in sym.parts.items()}
    errors = {k: {sw(e): v for e, v in err.items()} for k, err in sym.errors.items()}
    return Symbol(sym.nvars, parts, errors, sym.names)


def one_symbol(nvars: int, names) -> Symbol:
    return Symbol(nvars, {0: Poly.const(nvars, 1)}, {}, names)


def e_symmetry_residual(sym: Symbol) -> Symbol:
    sw = swap_xy(sym)
    parts = {k: sym.parts.get(k, Poly(sym.nvars)) - sw.parts.get(k, Poly(sym.nvars))
             for k in set(sym.parts) | set(sw.parts)}
    errors = {}
    for k in parts:
        a, b = sym.errors.get(k, {}), sw.errors.get(k, {})
        errors[k] = {e: math.hypot(a.get(e, 0.0), b.get(e, 0.0)) for e in set(a) | set(b)}
    return Symbol(sym.nvars, {k: v for k, v in parts.items()}, errors, sym.names)


def minus_one(sym: Symbol) -> Symbol:
    parts = dict(sym.parts)
    parts[0] = parts.get(0, Poly(sym.nvars)) - Poly.const(sym.nvars, 1)
    return Symbol(sym.nvars, parts, sym.errors, sym.names)


# ---------------------------------------------------------------------------
# wheel functions

@dataclass
class WheelFunctions:
    A: Symbol
    B: Symbol
    J: Poly            # J_q restricted to q, truncated at degree ``order``
    log_J: Poly
    log_J_errors: dict
    order: int


def _axis_symbol(sub, order, source, mode) -> Symbol:
    gs = GraphSum(sub.nq)
    for n in range(2, order + 1):  # a pure wheel needs two aerial vertices
        collect(sub, n, 1, 0, mode, source, gs)
    if gs.missing:
        raise LookupError("missing weights: " + ", ".join(gs.missing))
    sym = graph_symbol_sum(gs, sub, 1, order, ("X",))
    return _drop_x(sym, sub.nq)


def _drop_x(sym: Symbol, nq: int) -> Symbol:
    """Wheels have constant coefficients; keep the X part only."""
    parts, errors = {}, {}
    for k, p in sym.parts.items():
        parts[k] = Poly(nq, {e[nq:]: c for e, c in p.terms.items() if not any(e[:nq])})
        errors[k] = {e[nq:]: v for e, v in sym.errors.get(k, {}).items() if not any(e[:nq])}
    return Symbol(nq, parts, errors, sym.names[nq:])


def _log1p_trunc(p: Poly, order: int) -> Poly:
    """log(1 + p) for p without constant term, truncated at degree ``order``."""
    out = Poly(p.nvars)
    power = Poly.const(p.nvars, 1)
    for k in range(1, order + 1):
        power = _truncate(power * p, order)
        if not power:
            break
        out = out + power * Fraction((-1) ** (k + 1), k)
    return out


def log_j_on_q(sub: SubalgebraData, order: int) -> Poly:
    js = j_series(sub.parent, order if order % 2 == 0 else order + 1)
    lp = js.log_poly(sub.parent)
    return Poly(sub.nq, {tuple(e[k] for k in sub.q): c for e, c in lp.terms.items()
                         if not any(e[k] for k in sub.h) and sum(e) <= order})


def wheel_functions(sub: SubalgebraData, order: int, weight_source) -> WheelFunctions:
    """A from wheels on the vertical axis, B from the horizontal axis, J_q from A J^1/2 = B j^1/2."""
    _check_order(order)
    A = _axis_symbol(sub, order, weight_source, QUADRANT_V)
    B = _axis_symbol(sub, order, weight_source, QUADRANT_H)
    a = A.total() - Poly.const(sub.nq, 1)
    b = B.total() - Poly.const(sub.nq, 1)
    log_J = (_log1p_trunc(b, order) - _log1p_trunc(a, order)) * 2 + log_j_on_q(sub, order)
    err: dict = defaultdict(float)
    for sym in (A, B):
        for k, e in sym.errors.items():
            for mono, v in e.items():
                err[mono] += (2 * v) ** 2
    return WheelFunctions(A, B, exp_truncated(log_J, order), log_J, {e: math.sqrt(v) for e, v in err.items()}, order)


def det_sinh_q(sub: SubalgebraData, order: int) -> Poly:
    """log det_q(sinh(ad X)/ad X) for X in q, the symmetric-pair prediction for log J_q."""
    alg = sub.parent
    nq = sub.nq
    d = alg.dim
    ad = [[Poly(nq) for _ in range(d)] for _ in range(d)]
    for i in sub.q:
        for j in range(d):
            for k, c in enumerate(alg.c[i][j]):
                if c:
                    ad[k][j] = ad[k][j] + Poly.var(nq, sub.pos(i), c)
    # log(sinh u / u) = sum_k 4^k b_2k u^2k with b the coefficients of log(sinh(u/2)/(u/2))
    from .star import log_series_coeffs
    coeffs = {k: c * 2 ** k for k, c in log_series_coeffs(order if order % 2 == 0 else order + 1).items()}
    out = Poly(nq)
    power = ad
    for k in range(1, max(coeffs, default=0) + 1):
        if k > 1:
            power = mat_mul(power, ad)
        if k in coeffs:
            out = out + sum((power[i][i] for i in sub.q), Poly(nq)) * coeffs[k]
    return _truncate(out, order)


# ---------------------------------------------------------------------------
# the double and the pi_t family

@dataclass
class DeformedBivector:
    """Linear bivector pi_t on the dual of the double, coefficients polynomial in t.

    ``coeff[(i, j)][k]`` is a polynomial in one variable t; the bivector is
    pi_t = sum_{i<j} coeff[(i, j)][k] x_k d_i ^ d_j.
    """

    base: LieAlgebraSpec
    names: list[str]
    coeff: dict

    @property
    def dim(self) -> int:
        return len(self.names)

    def structure(self, i: int, j: int) -> dict[int, Poly]:
        if i == j:
            return {}
        if i < j:
            return self.coeff.get((i, j), {})
        return {k: -p for k, p in self.coeff.get((j, i), {}).items()}

    def specialize(self, t) -> LieAlgebraSpec:
        return double(self.base, t)

    def schouten_square(self) -> dict:
        """Coefficients of [pi_t, pi_t] (up to a factor 2): the Jacobiator, polynomial in t."""
        d = self.dim
        out = {}
        for a in range(d):
            for b in range(a + 1, d):
                for c in range(b + 1, d):
                    acc: dict[int, Poly] = defaultdict(lambda: Poly(1))
                    for (x, y, z) in ((a, b, c), (b, c, a), (c, a, b)):
                        for m, p in self.structure(x, y).items():
                            for k, r in self.structure(m, z).items():
                                acc[k] = acc[k] + p * r
                    nz = {k: v for k, v in acc.items() if v}
                    if nz:
                        out[(a, b, c)] = nz
        return out

    def is_poisson(self) -> bool:
        return not self.schouten_square()


def pi_t_double(base: LieAlgebraSpec) -> DeformedBivector:
    """pi_t = 2[K,P] dK^dP + [K,K] dK^dK + ((1-t^2)[K,K] + 2t[K,P]) dP^dP (half brackets aside)."""
    d = base.dim
    t = Poly.var(1, 0)
    one = Poly.const(1, 1)
    coeff: dict = defaultdict(lambda: defaultdict(lambda: Poly(1)))
    for a in range(d):
        for b in range(d):
            for k, v in enumerate(base.c[a][b]):
                if not v:
                    continue
                if a < b:
                    coeff[(a, b)][k] = coeff[(a, b)][k] + one * v
                    coeff[(d + a, d + b)][k] = coeff[(d + a, d + b)][k] + (one - t * t) * v
                    coeff[(d + a, d + b)][d + k] = coeff[(d + a, d + b)][d + k] + t * (2 * v)
                coeff[(a, d + b)][d + k] = coeff[(a, d + b)][d + k] + one * v
    clean = {key: {k: p for k, p in row.items() if p} for key, row in coeff.items()}
    names = [f"K{nm}" for nm in base.basis_names] + [f"P{nm}" for nm in base.basis_names]
    return DeformedBivector(base, names, {k: v for k, v in clean.items() if v})


def e_double_check(base: LieAlgebraSpec, order: int, weight_source) -> Symbol:
    """E_double - 1 at t = 0 (the symmetric pair g x g with the swap)."""
    return minus_one(e_symbol(double_pair(base, 0), order, weight_source))


def ideal_algebra(base: LieAlgebraSpec) -> LieAlgebraSpec:
    """The ideal span{P_a} of the double at t = 1, with bracket [P_a, P_b] = 2 [a, b]_P."""
    br = {}
    for a in range(base.dim):
        for b in range(a + 1, base.dim):
            row = {k: 2 * v for k, v in enumerate(base.c[a][b]) if v}
            if row:
                br[(a, b)] = row
    return LieAlgebraSpec.from_brackets([f"P{nm}" for nm in base.basis_names], br, f"{base.name}+")


def duflo_density_check(base: LieAlgebraSpec, order: int, weight_source) -> tuple[Symbol, dict[int, Poly]]:
    """mu_1 symbol of the double at t = 1 against D(X, Y) e^{Z - X - Y} of the ideal g_+."""
    sub = double_pair(base, 1)
    sym = e_symbol(sub, order, weight_source, require_pair=False)
    pred = duflo_exp_symbol(ideal_algebra(base), order)
    return sym, pred


def symbol_matches(sym: Symbol, pred: dict[int, Poly], nsigma: float = 3.0, floor: float = 1e-9) -> bool:
    other = Symbol(sym.nvars, {k: pred.get(k, Poly(sym.nvars)) for k in sym.parts}, {}, sym.names)
    return sym.residual_ok(other, nsigma, floor)
