"""Admissible Kontsevich graphs: construction, enumeration, canonical ids.

Vertices are encoded as integers.  Aerial vertices are ``1..n``, ground
vertices ``G1..Gm`` are stored as ``-1..-m`` and the point at infinity (used
by the reduction differential) is ``0``.  Aerial vertex ``i`` owns the edges
at positions ``2(i-1)`` and ``2(i-1)+1`` of the global edge list.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

INFINITY = 0

PLAIN = "plain"
ESSENTIAL = "essential"
TWO_COLOR = "two-color"
FOUR_COLOR = "four-color"
MODES = (PLAIN, ESSENTIAL, TWO_COLOR, FOUR_COLOR)

DEFAULT_CAPS = {PLAIN: 4, ESSENTIAL: 6, TWO_COLOR: 4, FOUR_COLOR: 3}


class GraphError(ValueError):
    """Raised for inadmissible graphs or malformed graph text."""


class SizingError(ValueError):
    """Raised when an enumeration request exceeds the configured cap."""


@dataclass(frozen=True)
class EdgeColor:
    axis1_sign: int
    axis2_sign: int | None = None

    def __post_init__(self):
        if self.axis1_sign not in (1, -1):
            raise GraphError("axis1_sign must be +1 or -1")
        if self.axis2_sign not in (None, 1, -1):
            raise GraphError("axis2_sign must be +1, -1 or absent")

    @property
    def four(self) -> bool:
        return self.axis2_sign is not None

    def __str__(self) -> str:
        s = "+" if self.axis1_sign > 0 else "-"
        if self.axis2_sign is not None:
            s += "+" if self.axis2_sign > 0 else "-"
        return s

    @classmethod
    def parse(cls, text: str) -> "EdgeColor":
        signs = [1 if c == "+" else -1 for c in text]
        if not 1 <= len(signs) <= 2 or any(c not in "+-" for c in text):
            raise GraphError(f"bad color tag {text!r}")
        return cls(*signs)


def _vertex_str(v: int) -> str:
    if v > 0:
        return str(v)
    if v == INFINITY:
        return "I"
    return f"G{-v}"


@dataclass(frozen=True)
class KGraph:
    """Oriented labeled graph with ``n_aerial`` aerial and ``n_ground`` ground vertices.

    ``targets`` lists the target of every edge in global order; the source of
    edge ``e`` is aerial vertex ``e // 2 + 1``.
    """

    n_aerial: int
    n_ground: int
    targets: tuple[int, ...]
    colors: tuple[EdgeColor, ...] | None = None
    _id: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.colors is not None:
            object.__setattr__(self, "colors", tuple(self.colors))
        check_admissible(self)

    # basic accessors
    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(e // 2 + 1, t) for e, t in enumerate(self.targets)]

    def out(self, v: int) -> tuple[int, int]:
        return self.targets[2 * v - 2], self.targets[2 * v - 1]

    def in_degree(self, v: int) -> int:
        return sum(1 for t in self.targets if t == v)

    def in_edges(self, v: int) -> list[int]:
        return [e for e, t in enumerate(self.targets) if t == v]

    @property
    def n_edges(self) -> int:
        return len(self.targets)

    @property
    def n_infinity(self) -> int:
        return sum(1 for t in self.targets if t == INFINITY)

    @property
    def id(self) -> str:
        if self._id is None:
            object.__setattr__(self, "_id", canonical_id(self))
        return self._id

    def __str__(self) -> str:
        return serialize(self)


def check_admissible(g: KGraph) -> None:
    n, m = g.n_aerial, g.n_ground
    if n < 0 or m < 0:
        raise GraphError("vertex counts must be non-negative")
    if len(g.targets) != 2 * n:
        raise GraphError(f"expected {2 * n} edges, got {len(g.targets)} (two edges per aerial vertex)")
    if g.colors is not None:
        if len(g.colors) != len(g.targets):
            raise GraphError("one color per edge required")
        if len({c.four for c in g.colors}) > 1:
            raise GraphError("mixed two-color and four-color tags")
    for v in range(1, n + 1):
        a, b = g.out(v)
        for t in (a, b):
            if not (-m <= t <= n):
                raise GraphError(f"edge target {_vertex_str(t)} out of range (rule i)")
            if t == v:
                raise GraphError("loop forbidden (rule ii)")
        if a == b and a != INFINITY:
            raise GraphError("multiple edge forbidden (rule iii)")


# ---------------------------------------------------------------------------
# text grammar

def serialize(g: KGraph) -> str:
    parts = []
    for e, t in enumerate(g.targets):
        s = f"{e // 2 + 1}>{_vertex_str(t)}"
        if g.colors is not None:
            s += f":{g.colors[e]}"
        parts.append(s)
    return f"n={g.n_aerial};m={g.n_ground};e=" + ",".join(parts)


_EDGE_RE = re.compile(r"(\d+)>(G\d+|I|\d+)(?::([+-]{1,2}))?$")


def _parse_error(msg: str, line: int, col: int) -> GraphError:
    return GraphError(f"line {line}, column {col}: {msg}")


def parse(text: str, line: int = 1) -> KGraph:
    """Parse one graph in the ``n=..;m=..;e=..`` grammar.

    Missing ``n``/``m`` fields are inferred from the edge list (``m`` from the
    largest ground label, at least 2).
    """
    text = text.split("#", 1)[0].strip()
    fields: dict[str, tuple[str, int]] = {}
    col = 1
    for chunk in text.split(";"):
        stripped = chunk.strip()
        if not stripped:
            col += len(chunk) + 1
            continue
        if "=" not in stripped:
            raise _parse_error(f"expected key=value, got {stripped!r}", line, col)
        key, val = stripped.split("=", 1)
        key = key.strip()
        if key not in ("n", "m", "e") or key in fields:
            raise _parse_error(f"unexpected or repeated field {key!r}", line, col)
        fields[key] = (val.strip(), col + chunk.index("=") + 1)
        col += len(chunk) + 1
    edges: list[tuple[int, int, EdgeColor | None]] = []
    if "e" in fields and fields["e"][0]:
        val, ecol = fields["e"]
        for tok in val.split(","):
            mt = _EDGE_RE.match(tok.strip())
            if mt is None:
                raise _parse_error(f"malformed edge {tok.strip()!r}", line, ecol)
            src = int(mt.group(1))
            tg = mt.group(2)
            tgt = INFINITY if tg == "I" else (-int(tg[1:]) if tg[0] == "G" else int(tg))
            if tgt == src:
                raise _parse_error("loop forbidden (rule ii)", line, ecol)
            col_tag = EdgeColor.parse(mt.group(3)) if mt.group(3) else None
            edges.append((src, tgt, col_tag))
            ecol += len(tok) + 1
    try:
        n = int(fields["n"][0]) if "n" in fields else max((s for s, _, _ in edges), default=0)
        m_default = max([2] + [-t for _, t, _ in edges if t < 0])
        m = int(fields["m"][0]) if "m" in fields else m_default
    except ValueError as exc:
        raise _parse_error(str(exc), line, 1) from None
    srcs = [s for s, _, _ in edges]
    if any(s < 1 or s > n for s in srcs):
        raise GraphError("edge source must be an aerial vertex (rule i)")
    if srcs != sorted(srcs) or any(srcs.count(v) != 2 for v in range(1, n + 1)):
        raise GraphError("edge order must list two edges per aerial vertex in vertex order")
    seen = set()
    for s, t, _ in edges:
        if t != INFINITY and (s, t) in seen:
            raise GraphError("multiple edge forbidden (rule iii)")
        seen.add((s, t))
    tags = [c for _, _, c in edges]
    colors = None
    if any(c is not None for c in tags):
        if any(c is None for c in tags):
            raise GraphError("either all edges carry colors or none")
        colors = tuple(tags)
    return KGraph(n, m, tuple(t for _, t, _ in edges), colors)


def parse_many(text: str) -> list[KGraph]:
    out = []
    for k, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append(parse(body, line=k))
    return out


# ---------------------------------------------------------------------------
# relabeling and canonical ids

def relabel(g: KGraph, perm: Sequence[int]) -> KGraph:
    """Rename aerial vertex ``i`` to ``perm[i-1]``; edge pairs move with their owner."""
    n = g.n_aerial
    new_t = [0] * (2 * n)
    new_c = [None] * (2 * n) if g.colors is not None else None

    def mp(t):
        return perm[t - 1] if t > 0 else t

    for v in range(1, n + 1):
        w = perm[v - 1]
        for k in (0, 1):
            new_t[2 * w - 2 + k] = mp(g.targets[2 * v - 2 + k])
            if new_c is not None:
                new_c[2 * w - 2 + k] = g.colors[2 * v - 2 + k]
    return KGraph(n, g.n_ground, tuple(new_t), tuple(new_c) if new_c is not None else None)


def _key(g: KGraph, perm: Sequence[int]) -> tuple:
    n = g.n_aerial
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p - 1] = i + 1
    key = []
    for w in range(1, n + 1):
        v = inv[w - 1]
        for k in (0, 1):
            t = g.targets[2 * v - 2 + k]
            key.append(perm[t - 1] if t > 0 else t)
            if g.colors is not None:
                c = g.colors[2 * v - 2 + k]
                key.append((c.axis1_sign, c.axis2_sign or 0))
    return tuple(key)


def canonical_form(g: KGraph) -> KGraph:
    n = g.n_aerial
    best, best_perm = None, None
    for perm in itertools.permutations(range(1, n + 1)):
        k = _key(g, perm)
        if best is None or _cmp_key(k) < _cmp_key(best):
            best, best_perm = k, perm
    return relabel(g, best_perm) if n else g


def _cmp_key(k: tuple) -> tuple:
    # ground targets (negative) sort before aerial ones; flatten colors
    return tuple(x if not isinstance(x, tuple) else (x[0] * 3 + x[1]) * 1000 for x in k)


def canonical_id(g: KGraph) -> str:
    return serialize(canonical_form(g))


def automorphism_count(g: KGraph) -> int:
    k0 = _key(g, tuple(range(1, g.n_aerial + 1)))
    return sum(1 for p in itertools.permutations(range(1, g.n_aerial + 1)) if _key(g, p) == k0)


def labeled_multiplicity(g: KGraph) -> int:
    """Number of labeled graphs sharing the canonical id of ``g``."""
    n = g.n_aerial
    return _factorial(n) // automorphism_count(g)


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def swap_edges(g: KGraph, v: int) -> KGraph:
    t = list(g.targets)
    t[2 * v - 2], t[2 * v - 1] = t[2 * v - 1], t[2 * v - 2]
    c = None
    if g.colors is not None:
        c = list(g.colors)
        c[2 * v - 2], c[2 * v - 1] = c[2 * v - 1], c[2 * v - 2]
    return KGraph(g.n_aerial, g.n_ground, tuple(t), c)


def mirror(g: KGraph) -> KGraph:
    """Reverse the order of the ground vertices."""
    m = g.n_ground
    t = tuple(-(m + 1 + x) if x < 0 else x for x in g.targets)
    return KGraph(g.n_aerial, m, t, g.colors)


def edge_sorted(g: KGraph) -> tuple[KGraph, int]:
    """Representative up to swapping edge pairs, and the sign relating the two.

    Swapping the two edges of one vertex flips the sign of both the weight and
    the operator, so weights only need to be computed on these representatives.
    """
    sign = 1
    t = list(g.targets)
    c = list(g.colors) if g.colors is not None else None
    for v in range(g.n_aerial):
        a, b = 2 * v, 2 * v + 1
        ka = (t[a], str(c[a]) if c else "")
        kb = (t[b], str(c[b]) if c else "")
        if _tkey(ka) > _tkey(kb):
            t[a], t[b] = t[b], t[a]
            if c:
                c[a], c[b] = c[b], c[a]
            sign = -sign
    return KGraph(g.n_aerial, g.n_ground, tuple(t), c), sign


def _tkey(k):
    t, c = k
    return (t, c)


# ---------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class GraphClass:
    kind: str
    components: tuple[tuple[str, frozenset[int]], ...] = ()


LIE = "LieSimple"
WHEEL = "Wheel"
SUPERPOSITION = "Superposition"
NON_ESSENTIAL = "NonEssential"


def is_essential(g: KGraph) -> bool:
    return all(g.in_degree(v) <= 1 for v in range(1, g.n_aerial + 1))


def components(g: KGraph) -> list[frozenset[int]]:
    """Weakly connected components of the aerial part (ground and infinity ignored)."""
    parent = list(range(g.n_aerial + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for s, t in g.edges:
        if t > 0:
            parent[find(s)] = find(t)
    groups: dict[int, set[int]] = {}
    for v in range(1, g.n_aerial + 1):
        groups.setdefault(find(v), set()).add(v)
    return sorted((frozenset(c) for c in groups.values()), key=min)


def _component_kind(g: KGraph, comp: frozenset[int]) -> str:
    inner = sum(1 for s, t in g.edges if s in comp and t in comp)
    return LIE if inner == len(comp) - 1 else WHEEL


def classify(g: KGraph) -> GraphClass:
    if not is_essential(g):
        return GraphClass(NON_ESSENTIAL)
    comps = tuple((_component_kind(g, c), c) for c in components(g))
    if len(comps) == 1:
        return GraphClass(comps[0][0], comps)
    return GraphClass(SUPERPOSITION, comps)


def root(g: KGraph) -> int:
    roots = [v for v in range(1, g.n_aerial + 1) if g.in_degree(v) == 0]
    if len(roots) != 1:
        raise GraphError("graph has no unique root")
    return roots[0]


def wheel_cycle(g: KGraph, comp: Iterable[int] | None = None) -> list[int]:
    """Vertices of the directed cycle of a wheel component, in cycle order."""
    comp = set(comp) if comp is not None else set(range(1, g.n_aerial + 1))
    on_cycle = [v for v in sorted(comp) if any(t in comp and _reaches(g, t, v, comp) for t in g.out(v))]
    if not on_cycle:
        raise GraphError("component has no cycle")
    start = on_cycle[0]
    cycle = [start]
    v = next(t for t in g.out(start) if t in comp and _reaches(g, t, start, comp))
    while v != start:
        cycle.append(v)
        v = next(t for t in g.out(v) if t in comp and _reaches(g, t, start, comp))
    return cycle


def _reaches(g: KGraph, a: int, b: int, comp: set[int]) -> bool:
    stack, seen = [a], set()
    while stack:
        x = stack.pop()
        if x == b:
            return True
        if x in seen:
            continue
        seen.add(x)
        stack.extend(t for t in g.out(x) if t in comp)
    return False


# ---------------------------------------------------------------------------
# enumeration

def _color_choices(mode: str) -> list[EdgeColor | None]:
    if mode == TWO_COLOR:
        return [EdgeColor(1), EdgeColor(-1)]
    if mode == FOUR_COLOR:
        return [EdgeColor(a, b) for a in (1, -1) for b in (1, -1)]
    return [None]


def iter_labeled(n: int, m: int, mode: str = PLAIN, n_infinity: int = 0,
                 essential: bool | None = None) -> Iterator[KGraph]:
    """All labeled admissible graphs (no deduplication).

    Colored modes are essential unless ``essential=False`` is passed.  With
    ``n_infinity > 0`` exactly that many edges go to infinity.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if essential is None:
        essential = mode != PLAIN
    targets_pool = [t for t in range(-m, n + 1) if t != INFINITY]
    if n_infinity:
        targets_pool.append(INFINITY)
    per_vertex = []
    for v in range(1, n + 1):
        pairs = [(a, b) for a in targets_pool for b in targets_pool
                 if a != v and b != v and a != b]
        per_vertex.append(pairs)
    colors = _color_choices(mode)

    out_t = [0] * (2 * n)
    indeg = [0] * (n + 1)

    def rec(v, inf_used):
        if v > n:
            if inf_used != n_infinity:
                return
            base = tuple(out_t)
            for cols in itertools.product(colors, repeat=2 * n):
                yield KGraph(n, m, base, None if cols and cols[0] is None else cols)
            return
        for a, b in per_vertex[v - 1]:
            k = (a == INFINITY) + (b == INFINITY)
            if inf_used + k > n_infinity:
                continue
            if essential and ((a > 0 and indeg[a]) or (b > 0 and indeg[b])):
                continue
            out_t[2 * v - 2], out_t[2 * v - 1] = a, b
            for t in (a, b):
                if t > 0:
                    indeg[t] += 1
            yield from rec(v + 1, inf_used + k)
            for t in (a, b):
                if t > 0:
                    indeg[t] -= 1

    if n == 0:
        if n_infinity == 0:
            yield KGraph(0, m, ())
        return
    yield from rec(1, 0)


def enumerate_graphs(n: int, m: int, mode: str = PLAIN, n_infinity: int = 0,
                     cap: int | None = None) -> list[KGraph]:
    """One canonical representative per canonical id, in sorted id order."""
    if n < 0 or m < 0 or (m < 1 and n_infinity == 0) or n + m < 2 and n_infinity == 0:
        raise ValueError("need n >= 0, m >= 1 and n + m >= 2")
    limit = DEFAULT_CAPS[mode] if cap is None else cap
    if n > limit:
        raise SizingError(f"n={n} exceeds the {mode} enumeration cap {limit}")
    seen: dict[str, KGraph] = {}
    for g in iter_labeled(n, m, mode, n_infinity):
        cid = canonical_id(g)
        if cid not in seen:
            seen[cid] = parse(cid)
    return [seen[k] for k in sorted(seen)]
