import cmath
import logging
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import qmc

from artifact import graphs as G
from artifact.graphs import EdgeColor, parse
from artifact.source import WeightSource
from artifact.star import star_operator
from artifact.algebra import sl2
from artifact.lieseries import kontsevich_bch
from artifact.weights import (HALF_PLANE, DimensionError, SingularConfiguration, WeightCache, WeightEstimate,
                              angle, angle_colored, angle_gradient, integrate_weight, merge_estimates,
                              snap_rational, snap_value)


# angle forms

def test_angle_examples():
    assert angle(1j, 2j) == pytest.approx(0.0, abs=1e-15)
    p = 0.3 + 0.7j
    for q in (-1.0, 0.0, 2.5):
        assert angle(p, q) == pytest.approx(2 * cmath.phase(p - q))
    with pytest.raises(SingularConfiguration):
        angle(1j, 1j + 1e-12)


def test_angle_differential_is_not_symmetric():
    p, q = 0.2 + 1.1j, -0.7 + 0.4j
    a = angle_gradient(p, q)
    b = angle_gradient(q, p)
    # d phi(p, q) versus d phi(q, p) with the roles of the coordinates exchanged
    assert not np.allclose(a, b[[2, 3, 0, 1]])
    # finite differences agree with the analytic gradient
    h = 1e-6
    num = [(angle(p + h, q) - angle(p - h, q)) / (2 * h), (angle(p + 1j * h, q) - angle(p - 1j * h, q)) / (2 * h),
           (angle(p, q + h) - angle(p, q - h)) / (2 * h), (angle(p, q + 1j * h) - angle(p, q - 1j * h)) / (2 * h)]
    assert np.allclose(a, num, atol=1e-6)


def test_colored_angle_on_the_ground_line():
    p = 0.4 + 0.9j
    for q in (-0.5, 0.0, 1.3):
        assert angle_colored(p, q, EdgeColor(1)) == pytest.approx(angle(p, q))
        # q stays on the line, so its normal coordinate is not a variable
        assert np.allclose(angle_gradient(p, q, EdgeColor(-1))[:3], 0.0)


def test_quadrant_angle_on_the_vertical_axis():
    rng = random.Random(3)
    for _ in range(3):
        a, b = rng.uniform(0.1, 3), rng.uniform(0.1, 3)
        val = angle_colored(1j * a, 1j * b, EdgeColor(1, 1), "quadrant")
        # rotating by i sends the vertical axis to the horizontal one
        assert val % (2 * math.pi) == pytest.approx(angle(-a, -b) % (2 * math.pi), abs=1e-12)


def _rotated_gradient(p, q, color):
    """Gradient of (p, q) -> half-plane angle of (i p, i q)."""
    gx = angle_gradient(1j * p, 1j * q, color)
    return np.array([gx[1], -gx[0], gx[3], -gx[2]])


@pytest.mark.parametrize("s1", [1, -1])
@pytest.mark.parametrize("s2", [1, -1])
def test_quadrant_form_degenerates_to_half_plane_forms(s1, s2):
    u, v = 0.3 + 0.5j, -0.2 + 0.9j
    for R, tol in ((1e3, 5e-3), (1e5, 5e-5)):
        # far out along the horizontal axis: sign eps1
        p, q = R + u, R + v
        quad = angle_gradient(p, q, EdgeColor(s1, s2), "quadrant")
        half = angle_gradient(p, q, EdgeColor(s1))
        assert np.abs(quad - half).max() < tol
        # far up the vertical axis: sign eps2 after the rotation
        p, q = 1j * R + u.imag + 1j * u.real, 1j * R + v.imag + 1j * v.real
        p, q = complex(abs(p.real), p.imag), complex(abs(q.real), q.imag)
        quad = angle_gradient(p, q, EdgeColor(s1, s2), "quadrant")
        assert np.abs(quad - _rotated_gradient(p, q, EdgeColor(s2))).max() < tol


# integration

def _two_form(y, x):
    """dphi(p, 0) ^ dphi(p, 1) / (2 pi)^2 at p = x + iy, in the gauge used by the package."""
    p = complex(x, y)
    (a1, a2), (b1, b2) = [(-2 * (p - q).imag / abs(p - q) ** 2, 2 * (p - q).real / abs(p - q) ** 2) for q in (0, 1)]
    return (a1 * b2 - a2 * b1) / (2 * math.pi) ** 2


def test_first_weight_and_low_dimensional_quadrature():
    g = parse("n=1;m=2;e=1>G1,1>G2")
    w = integrate_weight(g, samples=2 ** 12)
    assert abs(w.value - 0.5) <= 3 * w.std_error
    val = err = 0.0
    for lo, hi in [(-np.inf, -1), (-1, 0), (0, 0.5), (0.5, 1), (1, 2), (2, np.inf)]:
        v, e = integrate.dblquad(_two_form, lo, hi, 0, np.inf, epsabs=1e-10)
        val, err = val + v, err + e
    assert val == pytest.approx(0.5, abs=1e-6)
    assert abs(w.value - val) <= 3 * w.std_error + err


def _darg(z):
    r2 = z.real ** 2 + z.imag ** 2
    return -z.imag / r2, z.real / r2


def weight_other_gauge(g, m=2 ** 15, seed=0, reps=8):
    """Weight of an n=2, m=2 graph with the first aerial point fixed at i.

    The ground points a < b and the second aerial point are integrated over,
    the latter from an equal mixture of a hyperbolic chart around i and an
    angle chart adapted to (a, b).
    """
    vals = []
    for r in range(reps):
        u = qmc.Sobol(4, scramble=True, seed=np.random.default_rng([seed, r])).random(m)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        a, b = np.tan(np.pi * (u[:, 0] - 0.5)), np.tan(np.pi * (u[:, 1] - 0.5))
        dens_ab = 1 / (np.pi * (1 + a * a)) / (np.pi * (1 + b * b))
        rad, ang = -np.log1p(-u[:, 2]), 2 * np.pi * u[:, 3]
        zeta = np.tanh(rad / 2) * np.exp(1j * ang)
        p_hyp = 1j * (1 + zeta) / (1 - zeta)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        beta = np.pi * u[:, 2]
        alpha = beta * u[:, 3]
        p_ang = lo + (hi - lo) * np.sin(beta) / np.sin(beta - alpha) * np.exp(1j * alpha)
        p2 = np.where(np.arange(m) < m // 2, p_hyp, p_ang)
        ch = 1 + np.abs(p2 - 1j) ** 2 / (2 * p2.imag)
        d = np.arccosh(ch)
        dens_hyp = np.exp(-d) / (2 * np.pi * p2.imag ** 2 * np.sqrt(np.maximum(ch * ch - 1, 1e-300)))
        w = (p2 - lo) / (hi - lo)
        dens_ang = w.imag / (np.pi * np.angle(w - 1) * np.abs(w) ** 2 * np.abs(w - 1) ** 2) / (hi - lo) ** 2
        dens = 0.5 * (dens_hyp + dens_ang) * dens_ab
        pts = {1: np.full(m, 1j), 2: p2}
        ground = {-1: a, -2: b}
        J = np.zeros((m, 4, 4))  # columns a, b, x2, y2
        for row, t in enumerate(g.targets):
            s = row // 2 + 1
            p = pts[s]
            if t < 0:
                gx, gy = _darg(p - ground[t])
                if s == 2:
                    J[:, row, 2] += 2 * gx
                    J[:, row, 3] += 2 * gy
                J[:, row, -t - 1] -= 2 * gx
            else:
                q = pts[t]
                for conj in (False, True):
                    gx, gy = _darg(p - (np.conj(q) if conj else q))
                    if s == 2:
                        J[:, row, 2] += gx
                        J[:, row, 3] += gy
                    if t == 2:
                        J[:, row, 2] -= gx
                        J[:, row, 3] += gy if conj else -gy
        f = np.linalg.det(J) / (2 * np.pi) ** 4 / dens
        vals.append(np.where((a < b) & np.isfinite(f), f, 0.0).mean())
    vals = np.array(vals)
    return vals.mean(), vals.std(ddof=1) / np.sqrt(reps)


@pytest.mark.parametrize("spec,exact", [
    ("n=2;m=2;e=1>G1,1>G2,2>1,2>G1", Fraction(-1, 12)),
    ("n=2;m=2;e=1>G1,1>G2,2>1,2>G2", Fraction(1, 12)),
    ("n=2;m=2;e=1>G1,1>2,2>1,2>G2", Fraction(1, 24)),
    ("n=2;m=2;e=1>G1,1>G2,2>G1,2>G2", Fraction(1, 4)),
])
def test_gauge_invariance(spec, exact, raw_source):
    g = parse(spec)
    w = raw_source(g)
    val, err = weight_other_gauge(g)
    combined = math.hypot(err, w.std_error)
    assert abs(val - w.value) <= 3 * combined
    assert abs(val - float(exact)) <= 3 * err + 1e-6


def test_odd_wheels_vanish(raw_source):
    wheels = [g for g in G.enumerate_graphs(3, 2, G.ESSENTIAL)
              if G.classify(g).kind == G.WHEEL and len(G.wheel_cycle(g)) == 3]
    assert wheels
    for g in wheels:
        w = raw_source(g)
        assert abs(w.value) <= 3 * w.std_error, g
    fresh = integrate_weight(G.edge_sorted(wheels[0])[0], samples=2 ** 15, seed=7)
    assert abs(fresh.value) <= 3 * fresh.std_error


@pytest.mark.parametrize("n", [1, 2])
def test_mirror_sign(n, raw_source):
    for g in G.enumerate_graphs(n, 2, G.ESSENTIAL):
        w, wm = raw_source(g), raw_source(G.mirror(g))
        assert abs(wm.value - (-1) ** n * w.value) <= 3 * math.hypot(w.std_error, wm.std_error) + 1e-9


def test_determinism_and_error_decay():
    g = parse("n=2;m=2;e=1>G1,1>G2,2>1,2>G2")
    a = integrate_weight(g, samples=2 ** 13, seed=5)
    b = integrate_weight(g, samples=2 ** 13, seed=5)
    assert a.value == b.value and a.std_error == b.std_error
    c = integrate_weight(g, samples=2 ** 17, seed=5)
    assert c.std_error < a.std_error
    assert abs(c.value - a.value) <= 3 * math.hypot(a.std_error, c.std_error)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        integrate_weight(parse("n=2;m=1;e=1>G1,1>2,2>G1,2>1"), HALF_PLANE, samples=64)


def test_non_essential_graphs_are_never_requested(source):
    requested = []

    def spy(g, mode=HALF_PLANE):
        requested.append(g)
        return source(g, mode)

    star_operator(sl2(), 3, spy)
    kontsevich_bch(4, spy)
    assert requested
    assert all(G.is_essential(g) for g in requested)


# snapping

def test_snap_examples():
    assert snap_value(0.4999, 0.0008).snapped == Fraction(1, 2)
    assert snap_value(0.0832, 0.0011).snapped == Fraction(1, 12)
    rep = snap_value(0.2501, 0.2)
    assert rep.snapped is None and rep.status == "ambiguous"
    assert snap_value(0.123456, 1e-9).status == "empty"
    w = snap_rational(WeightEstimate(0.2501, 0.2, 10, "0", "g"))
    assert w.snapped is None and w.ambiguity > 1
    with pytest.raises(ValueError):
        snap_rational(WeightEstimate(0.5, 0.0, 10, "0", "g"))


@settings(max_examples=200, deadline=None)
@given(st.floats(-2, 2), st.floats(1e-6, 1e-2), st.integers(2, 64))
def test_snapped_value_lies_in_window(value, err, bound):
    rep = snap_value(value, err, bound)
    if rep.snapped is not None:
        assert abs(value - float(rep.snapped)) <= 3 * err * (1 + 1e-12)
        assert rep.snapped.denominator <= bound


# cache

def _est(v, e, seed="0"):
    return WeightEstimate(v, e, 1000, seed, "n=1;m=2;e=1>G2,1>G1", HALF_PLANE, source_id="n=1;m=2;e=1>G2,1>G1")


def test_cache_round_trip_and_merge(tmp_path):
    c = WeightCache(tmp_path, bundled=False)
    c.put(_est(0.51, 0.02))
    got = c.get("n=1;m=2;e=1>G2,1>G1", HALF_PLANE)
    assert (got.value, got.std_error) == (0.51, 0.02)
    merged = c.put(_est(0.49, 0.01, "1"))
    assert merged.std_error <= 0.01
    assert merged.value == pytest.approx((0.51 / 0.02 ** 2 + 0.49 / 0.01 ** 2) / (1 / 0.02 ** 2 + 1 / 0.01 ** 2))
    again = WeightCache(tmp_path, bundled=False).get("n=1;m=2;e=1>G2,1>G1", HALF_PLANE)
    assert again.value == pytest.approx(merged.value) and again.std_error == pytest.approx(merged.std_error)
    assert merge_estimates(_est(1.0, 0.0), _est(2.0, 1.0)).value == 1.0


def test_cache_version_bump_is_a_miss(tmp_path, caplog):
    WeightCache(tmp_path, bundled=False).put(_est(0.5, 0.01))
    bumped = WeightCache(tmp_path, bundled=False, version=2)
    with caplog.at_level(logging.WARNING):
        assert bumped.get("n=1;m=2;e=1>G2,1>G1", HALF_PLANE) is None
    assert "convention version" in caplog.text


def test_source_computes_and_caches_missing_weights(tmp_path):
    src = WeightSource(WeightCache(tmp_path, bundled=False), samples=2 ** 12)
    w = src(parse("n=1;m=2;e=1>G1,1>G2"))
    assert w.snapped == Fraction(1, 2)
    assert len(src.computed) == 1
    assert (tmp_path / "weights.cache").read_text().count("\n") == 1
    offline = WeightSource(WeightCache(tmp_path / "empty", bundled=False), compute=False)
    with pytest.raises(LookupError):
        offline(parse("n=2;m=2;e=1>G1,1>G2,2>1,2>G2"))
