"""Weight lookup: exact vanishing rules, factorization, cache, lazy integration."""

from __future__ import annotations

import logging
import math
from fractions import Fraction

from . import graphs as G
from .weights import (HALF_PLANE, QUADRANT_H, QUADRANT_V, TWO_COLOR, WeightCache, WeightEstimate,
                      integrate_weight, snap_rational, zero_estimate)

log = logging.getLogger(__name__)


class MissingWeight(LookupError):
    pass


def subgraph(g: G.KGraph, comp) -> G.KGraph:
    """The component ``comp`` as a graph of its own, vertices renumbered in order."""
    verts = sorted(comp)
    ren = {v: k + 1 for k, v in enumerate(verts)}
    t, c = [], [] if g.colors is not None else None
    for v in verts:
        for e in (2 * v - 2, 2 * v - 1):
            x = g.targets[e]
            t.append(ren[x] if x > 0 else x)
            if c is not None:
                c.append(g.colors[e])
    return G.KGraph(len(verts), g.n_ground, tuple(t), c)


def known_zero(g: G.KGraph, mode: str) -> bool:
    """Weights that vanish for structural reasons (no integration needed)."""
    if g.n_aerial == 0:
        return False
    hit = {t for t in g.targets if t < 0}
    if mode in (HALF_PLANE, TWO_COLOR) and g.n_ground == 2 and len(hit) < 2:
        return True  # the form does not see one ground point
    if g.colors is not None and mode in (TWO_COLOR,):
        for e, t in enumerate(g.targets):
            if t < 0 and g.colors[e].axis1_sign < 0:
                return True  # normal edge ending on the ground line
    if g.colors is not None and mode in (QUADRANT_V, QUADRANT_H):
        for e, t in enumerate(g.targets):
            col = g.colors[e]
            if t < 0 and ((mode == QUADRANT_H and col.axis1_sign < 0)
                          or (mode == QUADRANT_V and (col.axis2_sign or 1) < 0)):
                return True
    return False


class WeightSource:
    """Callable ``source(graph, mode)`` returning a signed, optionally snapped estimate.

    Parameters mirror the CLI flags: ``samples`` and ``seed`` drive
    integration of missing weights, ``den_bound`` the rational snapping
    (``snap=False`` keeps raw numeric values), ``compute=False`` turns a
    cache miss into ``MissingWeight``.
    """

    def __init__(self, cache: WeightCache | None = None, samples: int = 2 ** 22, seed: int = 0,
                 den_bound: int = 48, snap: bool = True, compute: bool = True):
        self.cache = cache if cache is not None else WeightCache()
        self.samples, self.seed = samples, seed
        self.den_bound, self.snap, self.compute = den_bound, snap, compute
        self.computed: list[WeightEstimate] = []
        self.unsnapped: set[str] = set()

    def __call__(self, g: G.KGraph, mode: str = HALF_PLANE) -> WeightEstimate:
        if known_zero(g, mode):
            return zero_estimate(g.id, mode)
        if g.n_aerial == 0:
            return WeightEstimate(1.0, 0.0, 0, "exact", g.id, mode, Fraction(1), source_id=g.id)
        comps = G.components(g)
        if len(comps) > 1:
            if g.n_ground == 1 and mode == TWO_COLOR:
                return zero_estimate(g.id, mode)
            return self._product(g, comps, mode)
        rep, sign = G.edge_sorted(g)
        rep = G.canonical_form(rep)
        w = self.cache.get(rep.id, mode)
        if w is None:
            if not self.compute:
                raise MissingWeight(f"{rep.id} ({mode})")
            log.info("integrating %s (%s) with %d samples", rep.id, mode, self.samples)
            w = integrate_weight(rep, mode, samples=self.samples, seed=self.seed)
            self.computed.append(w)
            w = self.cache.put(w)
        if self.snap:
            w = snap_rational(w, self.den_bound)
            if w.snapped is None:
                self.unsnapped.add(rep.id)
        return w.signed(sign, g.id)

    def _product(self, g, comps, mode) -> WeightEstimate:
        parts = [self(subgraph(g, c), mode) for c in comps]
        val = math.prod(p.value for p in parts)
        var = 0.0
        for i, p in enumerate(parts):
            others = math.prod(q.value for j, q in enumerate(parts) if j != i)
            var += (p.std_error * others) ** 2
        snapped = None
        if all(p.snapped is not None for p in parts):
            snapped = math.prod((p.snapped for p in parts), start=Fraction(1))
        return WeightEstimate(val, math.sqrt(var), sum(p.samples for p in parts), "product",
                              g.id, mode, snapped, source_id="*".join(p.source_id for p in parts))


def exact_only(source: WeightSource) -> bool:
    return not source.unsnapped
