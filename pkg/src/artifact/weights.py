"""Angle forms and quasi-Monte Carlo integration of graph weights.

The configuration spaces are gauge fixed as follows.

``half-plane`` / ``two-color`` with two ground vertices
    ground points at 0 and 1, aerial points free in the upper half-plane.
``two-color`` with one ground vertex
    ground point at 0, first aerial point on the unit half-circle
    (p1 = e^{i t}), the other aerial points free.  Orientation
    dt ^ dx2 ^ dy2 ^ ...
``quadrant-v`` / ``quadrant-h``
    one ground point at i (vertical axis) or at 1 (horizontal axis),
    aerial points free in the open first quadrant.

Sampling mixes several channels with the balance heuristic: in the base
channel every aerial point is drawn from a chart adapted to the ground
points, and in the other channels some points are drawn in hyperbolic polar
coordinates around another aerial point they are joined to by an edge.  This
resolves the 1/r collision singularities of the angle forms, which otherwise
make the estimator heavy tailed.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from . import graphs as G

log = logging.getLogger(__name__)

CONVENTION_VERSION = 1
HALF_PLANE = "half-plane"
TWO_COLOR = "two-color"
QUADRANT_V = "quadrant-v"
QUADRANT_H = "quadrant-h"
WEIGHT_MODES = (HALF_PLANE, TWO_COLOR, QUADRANT_V, QUADRANT_H)
N_SCRAMBLES = 16
DISTANCE_FLOOR = 1e-9
TWO_PI = 2.0 * math.pi
ERROR_FLOOR = 1e-8


class SingularConfiguration(ValueError):
    pass


class DimensionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# angle functions

def _check(p: complex, q: complex, floor: float) -> None:
    for other in (q, q.conjugate()):
        if abs(p - other) < floor:
            raise SingularConfiguration(f"|p - q| below {floor}")


def angle(p: complex, q: complex, floor: float = DISTANCE_FLOOR) -> float:
    """Hyperbolic angle arg(p - q) + arg(p - conj q)."""
    p, q = complex(p), complex(q)
    _check(p, q, floor)
    return math.atan2((p - q).imag, (p - q).real) + math.atan2((p - q.conjugate()).imag, (p - q.conjugate()).real)


# reflection maps T and their (diagonal) real Jacobians
_REFLECTIONS = {
    "id": (lambda z: z, (1.0, 1.0)),
    "conj": (lambda z: np.conj(z), (1.0, -1.0)),
    "negconj": (lambda z: -np.conj(z), (-1.0, 1.0)),
    "neg": (lambda z: -z, (-1.0, -1.0)),
}


def _terms(color: G.EdgeColor | None, quadrant: bool) -> list[tuple[str, float]]:
    s1 = 1 if color is None else color.axis1_sign
    if not quadrant:
        return [("id", 1.0), ("conj", float(s1))]
    s2 = 1 if color is None or color.axis2_sign is None else color.axis2_sign
    return [("id", 1.0), ("conj", float(s1)), ("negconj", float(s2)), ("neg", float(s1 * s2))]


def angle_colored(p: complex, q: complex, color: G.EdgeColor, mode: str = "half-plane",
                  floor: float = DISTANCE_FLOOR) -> float:
    p, q = complex(p), complex(q)
    quadrant = mode == "quadrant"
    tot = 0.0
    for name, coef in _terms(color, quadrant):
        z = p - complex(_REFLECTIONS[name][0](np.complex128(q)))
        if abs(z) < floor:
            raise SingularConfiguration("near-singular configuration")
        tot += coef * math.atan2(z.imag, z.real)
    return tot


def angle_gradient(p: complex, q: complex, color: G.EdgeColor | None = None,
                   mode: str = "half-plane") -> np.ndarray:
    """d(angle) with respect to (p.x, p.y, q.x, q.y)."""
    quadrant = mode == "quadrant"
    out = np.zeros(4)
    for name, coef in _terms(color, quadrant):
        fn, (dx, dy) = _REFLECTIONS[name]
        z = p - complex(fn(np.complex128(q)))
        r2 = abs(z) ** 2
        gx, gy = -z.imag / r2, z.real / r2
        out += coef * np.array([gx, gy, -dx * gx, -dy * gy])
    return out


# ---------------------------------------------------------------------------
# geometries

def _angle_chart(u, v):
    """(0,1)^2 -> H: b = arg(p - 1), a = arg p; ground points 0 and 1."""
    b = np.pi * u
    a = b * v
    return np.sin(b) / np.sin(b - a) * np.exp(1j * a)


def _angle_density(p):
    b = np.angle(p - 1.0)
    return p.imag / (np.pi * b * np.abs(p) ** 2 * np.abs(p - 1.0) ** 2)


def _logpolar_chart(u, v):
    """(0,1)^2 -> H: p = e^{s + i a}, s = 2 logit(u), a = pi v (ground point 0 only)."""
    s = 2.0 * np.log(u / (1.0 - u))
    return np.exp(s + 1j * np.pi * v)


def _logpolar_density(p):
    r2 = np.abs(p) ** 2
    s = 0.5 * np.log(r2)
    t = np.exp(-np.abs(s) / 2.0)
    ds = 0.5 * t / (1.0 + t) ** 2
    return ds / (np.pi * r2)


def _hyp_chart(p, u, v):
    """Point at hyperbolic distance d = -log(1-u) from p, direction 2 pi v."""
    d = -np.log1p(-u)
    zeta = np.tanh(d / 2.0) * np.exp(1j * TWO_PI * v)
    w = 1j * (1.0 + zeta) / (1.0 - zeta)
    return p.real + p.imag * w


def _hyp_density(p, q):
    ch = 1.0 + np.abs(p - q) ** 2 / (2.0 * p.imag * q.imag)
    sh = np.sqrt(np.maximum(ch * ch - 1.0, 1e-300))
    d = np.arccosh(ch)
    return np.exp(-d) / (TWO_PI * q.imag ** 2 * sh)


@dataclass(frozen=True)
class Geometry:
    """Where ground points sit and how aerial points are parametrized."""

    name: str
    ground: tuple[complex, ...]
    quadrant: bool = False
    circle_first: bool = False  # first aerial point on the unit half-circle
    model: str = "angle"        # base chart in the model half-plane
    to_domain: str = "id"       # model half-plane -> configuration domain

    def dim(self, n: int) -> int:
        return 2 * n - 1 if self.circle_first else 2 * n


def geometry_for(mode: str, m: int) -> Geometry:
    if mode in (HALF_PLANE, TWO_COLOR):
        if m == 2:
            return Geometry(f"{mode}/2", (0j, 1 + 0j))
        if m == 1:
            return Geometry(f"{mode}/1", (0j,), circle_first=True, model="logpolar")
        raise DimensionError(f"{mode} weights are implemented for one or two ground vertices, not {m}")
    if mode in (QUADRANT_V, QUADRANT_H):
        if m != 1:
            raise DimensionError("quadrant weights use a single ground point on an axis")
        gp = 1j if mode == QUADRANT_V else 1 + 0j
        return Geometry(mode, (gp,), quadrant=True, to_domain="sqrt-v" if mode == QUADRANT_V else "sqrt-h")
    raise ValueError(f"unknown weight mode {mode!r}")


def _forests(n: int, allowed: set[frozenset], roots_forced: set[int]) -> list[tuple[int, ...]]:
    """Parent maps (-1 = root) whose parent links are graph edges."""
    out = []
    for par in itertools.product(range(-1, n), repeat=n):
        ok = True
        for i, p in enumerate(par):
            if p == -1:
                continue
            if i in roots_forced or p == i or frozenset((i, p)) not in allowed:
                ok = False
                break
        if not ok:
            continue
        for i in range(n):
            seen, j = set(), i
            while j != -1:
                if j in seen:
                    ok = False
                    break
                seen.add(j)
                j = par[j]
            if not ok:
                break
        if ok:
            out.append(par)
    return out


def _order(par):
    done: list[int] = []
    while len(done) < len(par):
        for i, p in enumerate(par):
            if i not in done and (p == -1 or p in done):
                done.append(i)
    return done


class _Integrand:
    """Vectorized integrand of one graph in one geometry."""

    def __init__(self, g: G.KGraph, geom: Geometry):
        self.g, self.geom = g, geom
        n = g.n_aerial
        self.n = n
        form_edges = [e for e, t in enumerate(g.targets) if t != G.INFINITY]
        self.form_edges = form_edges
        if len(form_edges) != geom.dim(n):
            raise DimensionError(
                f"graph has {len(form_edges)} form edges but the configuration space has dimension {geom.dim(n)}")
        pairs = set()
        for e in form_edges:
            s, t = e // 2 + 1, g.targets[e]
            if t > 0:
                pairs.add(frozenset((s - 1, t - 1)))
        forced = {0} if geom.circle_first else set()
        self.channels = _forests(n, pairs, forced)

    # model-space points -> domain points, with |d domain / d model|^2 per point
    def _to_domain(self, w):
        kind = self.geom.to_domain
        if kind == "id":
            return w, np.ones(w.shape)
        s = np.sqrt(w)  # principal branch maps H into the open first quadrant
        jac = 1.0 / (4.0 * np.abs(w))
        if kind == "sqrt-h":
            return s, jac
        return 1j * np.conj(s), jac

    def sample(self, par, u):
        n = self.n
        pts = [None] * n
        for i in _order(par):
            a, b = u[:, 2 * i], u[:, 2 * i + 1]
            if par[i] == -1:
                if i == 0 and self.geom.circle_first:
                    pts[i] = np.exp(1j * np.pi * a)
                elif self.geom.model == "logpolar":
                    pts[i] = _logpolar_chart(a, b)
                else:
                    pts[i] = _angle_chart(a, b)
            else:
                pts[i] = _hyp_chart(pts[par[i]], a, b)
        return pts

    def densities(self, pts):
        """Mixture density (in model coordinates) of the configuration."""
        n = self.n
        base = []
        for i in range(n):
            if i == 0 and self.geom.circle_first:
                base.append(np.full(pts[0].shape, 1.0 / np.pi))
            elif self.geom.model == "logpolar":
                base.append(_logpolar_density(pts[i]))
            else:
                base.append(_angle_density(pts[i]))
        cache = {}
        tot = 0.0
        for par in self.channels:
            d = 1.0
            for i, p in enumerate(par):
                if p == -1:
                    d = d * base[i]
                else:
                    if (p, i) not in cache:
                        cache[(p, i)] = _hyp_density(pts[p], pts[i])
                    d = d * cache[(p, i)]
            tot = tot + d
        return tot / len(self.channels)

    def form(self, model_pts):
        """Coefficient of the top form in domain coordinates, times the model->domain Jacobian."""
        g, geom = self.g, self.geom
        pts = []
        jac = 1.0
        for w in model_pts:
            z, j = self._to_domain(w)
            pts.append(z)
            jac = jac * j
        N = pts[0].shape[0]
        D = geom.dim(self.n)
        J = np.zeros((N, D, D))

        def col(i):  # first real column of aerial point i
            if geom.circle_first:
                return 0 if i == 0 else 2 * i - 1
            return 2 * i

        def add(row, i, gx, gy):
            if geom.circle_first and i == 0:
                z = pts[0]
                J[:, row, 0] += gx * (-z.imag) + gy * z.real
            else:
                c = col(i)
                J[:, row, c] += gx
                J[:, row, c + 1] += gy

        for row, e in enumerate(self.form_edges):
            s = e // 2
            t = g.targets[e]
            color = g.colors[e] if g.colors is not None else None
            p = pts[s]
            q = pts[t - 1] if t > 0 else geom.ground[-t - 1]
            for name, coef in _terms(color, geom.quadrant):
                fn, (dx, dy) = _REFLECTIONS[name]
                z = p - (fn(q) if t > 0 else complex(fn(np.complex128(q))))
                r2 = z.real ** 2 + z.imag ** 2
                gx, gy = -z.imag / r2, z.real / r2
                add(row, s, coef * gx, coef * gy)
                if t > 0:
                    add(row, t - 1, -coef * dx * gx, -coef * dy * gy)
        val = np.linalg.det(J) if D else np.ones(N)
        bad = np.zeros(N, dtype=bool)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                bad |= np.abs(pts[i] - pts[j]) < DISTANCE_FLOOR
        val = np.where(bad, 0.0, val)
        return val * jac / TWO_PI ** D


# ---------------------------------------------------------------------------
# estimates

@dataclass
class WeightEstimate:
    value: float
    std_error: float
    samples: int
    seed: str
    graph_id: str
    mode: str = HALF_PLANE
    snapped: Fraction | None = None
    den_bound: int | None = None
    ambiguity: int = 0
    converged: bool = True
    source_id: str = ""
    sign: int = 1

    @property
    def exact_or_value(self):
        return self.snapped if self.snapped is not None else self.value

    def signed(self, sign: int, graph_id: str) -> "WeightEstimate":
        """The same estimate seen from a graph whose weight is ``sign`` times this one."""
        return replace(self, value=sign * self.value,
                       snapped=None if self.snapped is None else sign * self.snapped,
                       graph_id=graph_id, source_id=self.source_id or self.graph_id,
                       sign=sign * self.sign)


def zero_estimate(graph_id: str, mode: str) -> WeightEstimate:
    return WeightEstimate(0.0, 0.0, 0, "exact", graph_id, mode, Fraction(0), source_id=graph_id)


def koszul_sign(g: G.KGraph) -> int:
    """Sign from moving every edge to infinity in front of the form edges.

    Edges to infinity carry an odd generator instead of a 1-form; pulling
    them to the left makes the weight change sign when the two edges of a
    vertex are swapped, exactly like the operator does.
    """
    sign = 1
    for e, t in enumerate(g.targets):
        if t == G.INFINITY:
            earlier = sum(1 for f in range(e) if g.targets[f] != G.INFINITY)
            sign *= (-1) ** earlier
    return sign


def integrate_weight(g: G.KGraph, mode: str = HALF_PLANE, samples: int = 2 ** 20, seed: int = 0,
                     chunk: int = 2 ** 15) -> WeightEstimate:
    """QMC estimate of (2 pi)^-E times the integral of the ordered wedge of edge forms.

    ``samples`` is the total number of integrand evaluations; they are split
    across ``N_SCRAMBLES`` independent scramblings and the sampling channels.
    The standard error is taken from the spread of the scrambled replicas.
    """
    geom = geometry_for(mode, g.n_ground)
    integ = _Integrand(g, geom)
    n = g.n_aerial
    if n == 0:
        return WeightEstimate(1.0, 0.0, 1, str(seed), g.id, mode, source_id=g.id)
    nch = len(integ.channels)
    per = max(2, samples // (N_SCRAMBLES * nch))
    per = 1 << (per.bit_length() - 1)  # Sobol balance wants powers of two
    dim = 2 * n
    means_half, means_full = [], []
    for s in range(N_SCRAMBLES):
        half_sum = full_sum = 0.0
        for c, par in enumerate(integ.channels):
            eng = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng([seed, s, c]))
            done = 0
            csum = 0.0
            step = max(1, min(chunk, per // 2))
            while done < per:
                k = min(step, per - done)
                u = np.clip(eng.random(k), 1e-15, 1 - 1e-15)
                pts = integ.sample(par, u)
                f = integ.form(pts) / integ.densities(pts)
                f = np.where(np.isfinite(f), f, 0.0)
                csum += math.fsum(f.tolist()) if k <= 64 else float(np.sum(f))
                done += k
                if done == per // 2:
                    half_sum += csum / (per // 2) / nch
            full_sum += csum / per / nch
        means_half.append(half_sum)
        means_full.append(full_sum)
    mf = np.array(means_full)
    mh = np.array(means_half)
    value = float(mf.mean()) * koszul_sign(g)
    # floor for integrands that are exactly constant up to the clipping bias
    err = max(float(mf.std(ddof=1) / math.sqrt(N_SCRAMBLES)), ERROR_FLOOR)
    err_half = float(mh.std(ddof=1) / math.sqrt(N_SCRAMBLES))
    converged = err <= err_half * 1.05 or err <= ERROR_FLOOR
    return WeightEstimate(value, err, per * nch * N_SCRAMBLES, str(seed), g.id, mode,
                          converged=converged, source_id=g.id)


# ---------------------------------------------------------------------------
# rational snapping

def rational_candidates(lo: float, hi: float, den_bound: int) -> list[Fraction]:
    out = []
    for q in range(1, den_bound + 1):
        for p in range(math.ceil(lo * q), math.floor(hi * q) + 1):
            if math.gcd(p, q) == 1:
                out.append(Fraction(p, q))
    return out


@dataclass
class SnapReport:
    snapped: Fraction | None
    candidates: list[Fraction] = field(default_factory=list)
    status: str = "ok"  # ok | ambiguous | empty


def snap_value(value: float, std_error: float, den_bound: int = 48, nsigma: float = 3.0) -> SnapReport:
    """Simplest rational in the nsigma window.

    The candidate with the smallest denominator wins unless another candidate
    has denominator at most twice that size, which is reported as ambiguous.
    An exact zero error snaps only if the value itself is such a rational.
    """
    if std_error < 0:
        raise ValueError("std_error must be non-negative")
    half = nsigma * std_error
    cands = rational_candidates(value - half, value + half, den_bound)
    if std_error == 0:
        cands = [c for c in cands if float(c) == value]
    if not cands:
        return SnapReport(None, [], "empty")
    best = min(cands, key=lambda c: (c.denominator, abs(float(c) - value)))
    rivals = [c for c in cands if c != best and c.denominator <= 2 * best.denominator]
    if rivals:
        return SnapReport(None, cands, "ambiguous")
    return SnapReport(best, cands, "ok")


def snap_rational(w: WeightEstimate, den_bound: int = 48) -> WeightEstimate:
    if w.std_error <= 0 and w.snapped is None:
        raise ValueError("snapping needs a positive std_error")
    rep = snap_value(w.value, w.std_error, den_bound)
    amb = len(rep.candidates) if rep.status == "ambiguous" else 0
    return replace(w, snapped=rep.snapped, den_bound=den_bound, ambiguity=amb)


# ---------------------------------------------------------------------------
# cache

def default_cache_dir() -> Path:
    env = os.environ.get("ARTIFACT_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "artifact"


BUNDLED = Path(__file__).with_name("data") / "weights.cache"


class WeightCache:
    """Append-merged text cache, one estimate per line.

    ``<graph_id> <mode> <convention_version> <value> <std_error> <samples> <seed>``
    Lines with the same key are merged by inverse-variance weighting on load.
    """

    FILENAME = "weights.cache"

    def __init__(self, cache_dir: str | Path | None = None, bundled: bool = True,
                 version: int = CONVENTION_VERSION):
        self.dir = Path(cache_dir) if cache_dir is not None else None
        self.version = version
        self.entries: dict[tuple[str, str], WeightEstimate] = {}
        self.stale: dict[tuple[str, str], int] = {}
        if bundled and BUNDLED.exists():
            self._load(BUNDLED)
        if self.dir is not None and self.path.exists():
            self._load(self.path)

    @property
    def path(self) -> Path:
        return self.dir / self.FILENAME

    def _load(self, path: Path) -> None:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                gid, mode, ver, val, err, ns, seed = line.split()
                if int(ver) != self.version:
                    self.stale[(gid, mode)] = int(ver)
                    continue
                w = WeightEstimate(float(val), float(err), int(ns), seed, gid, mode, source_id=gid)
                self._merge_in((gid, mode), w)

    def _merge_in(self, key, w):
        old = self.entries.get(key)
        self.entries[key] = w if old is None else merge_estimates(old, w)

    def get(self, graph_id: str, mode: str) -> WeightEstimate | None:
        key = (graph_id, mode)
        if key in self.stale and key not in self.entries:
            log.warning("cache entry for %s (%s) has convention version %d, expected %d; ignored",
                        graph_id, mode, self.stale[key], self.version)
        return self.entries.get(key)

    def put(self, w: WeightEstimate) -> WeightEstimate:
        key = (w.graph_id, w.mode)
        self._merge_in(key, replace(w, snapped=None))
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(format_line(w, self.version) + "\n")
        return self.entries[key]


def format_line(w: WeightEstimate, version: int = CONVENTION_VERSION) -> str:
    return f"{w.graph_id} {w.mode} {version} {w.value!r} {w.std_error!r} {w.samples} {w.seed}"


def merge_estimates(a: WeightEstimate, b: WeightEstimate) -> WeightEstimate:
    if a.std_error == 0:
        return a
    if b.std_error == 0:
        return b
    wa, wb = 1.0 / a.std_error ** 2, 1.0 / b.std_error ** 2
    val = (a.value * wa + b.value * wb) / (wa + wb)
    err = 1.0 / math.sqrt(wa + wb)
    return replace(a, value=val, std_error=err, samples=a.samples + b.samples,
                   seed=f"{a.seed}+{b.seed}", snapped=None)
