"""Sparse multivariate polynomials with exact (or float) coefficients.

A ``Poly`` maps exponent tuples to coefficients.  ``EpsPoly`` adds the
formal deformation parameter as a grading: ``{k: Poly}`` is the coefficient
of ``eps**k``.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from typing import Mapping, Sequence

Number = "Fraction | int | float"


def _clean(c):
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c)
    return c


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, object] | None = None):
        self.nvars = nvars
        self.terms: dict[tuple, object] = {}
        if terms:
            for e, c in terms.items():
                if c != 0:
                    if len(e) != nvars:
                        raise ValueError("exponent length does not match nvars")
                    self.terms[tuple(e)] = c

    # constructors
    @classmethod
    def const(cls, nvars: int, c) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int, c=1) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    @classmethod
    def linear(cls, coeffs: Sequence) -> "Poly":
        n = len(coeffs)
        return sum((cls.var(n, i, c) for i, c in enumerate(coeffs) if c != 0), cls(n))

    # arithmetic
    def copy(self) -> "Poly":
        p = Poly(self.nvars)
        p.terms = dict(self.terms)
        return p

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = out.get(e, 0) + c
            if v == 0:
                out.pop(e, None)
            else:
                out[e] = v
        p = Poly(self.nvars)
        p.terms = out
        return p

    __radd__ = __add__

    def __neg__(self):
        p = Poly(self.nvars)
        p.terms = {e: -c for e, c in self.terms.items()}
        return p

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            if other == 0:
                return Poly(self.nvars)
            p = Poly(self.nvars)
            p.terms = {e: c * other for e, c in self.terms.items()}
            return p
        out: dict[tuple, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(self.nvars, 1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other) if self.nvars is not None else other
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __len__(self):
        return len(self.terms)

    # calculus
    def diff(self, i: int, k: int = 1) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[i] >= k:
                f = 1
                for j in range(k):
                    f *= e[i] - j
                ne = list(e)
                ne[i] -= k
                out[tuple(ne)] = c * f
        return Poly(self.nvars, out)

    def diff_multi(self, counts: Sequence[int]) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            f = 1
            ok = True
            for a, k in zip(e, counts):
                if a < k:
                    ok = False
                    break
                for j in range(k):
                    f *= a - j
            if ok:
                out[tuple(a - k for a, k in zip(e, counts))] = c * f
        return Poly(self.nvars, out)

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def homogeneous_part(self, d: int) -> "Poly":
        return Poly(self.nvars, {e: c for e, c in self.terms.items() if sum(e) == d})

    def evaluate(self, point: Sequence):
        tot = 0
        for e, c in self.terms.items():
            t = c
            for x, a in zip(point, e):
                if a:
                    t = t * x ** a
            tot += t
        return tot

    def substitute(self, images: Sequence["Poly"]) -> "Poly":
        """Compose with ``x_i -> images[i]`` (all images share one ring)."""
        nv = images[0].nvars
        out = Poly(nv)
        for e, c in self.terms.items():
            t = Poly.const(nv, c)
            for img, a in zip(images, e):
                if a:
                    t = t * img ** a
            out = out + t
        return out

    def map_coeffs(self, fn) -> "Poly":
        return Poly(self.nvars, {e: fn(c) for e, c in self.terms.items()})

    def max_abs(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    def to_str(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"x{i + 1}" for i in range(self.nvars)]
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda e: (sum(e), tuple(-a for a in e))):
            c = _clean(self.terms[e])
            mono = " ".join(f"{names[i]}^{a}" if a > 1 else names[i] for i, a in enumerate(e) if a)
            parts.append(f"{c} * {mono}" if mono else f"{c}")
        return " + ".join(parts)

    def __repr__(self):
        return f"Poly({self.to_str()})"




def parse_poly(text: str, names: Sequence[str]) -> Poly:
    """Parse ``coeff * a^i b^j + ...`` (monomials separated by '+' or '-')."""
    nv = len(names)
    index = {nm: i for i, nm in enumerate(names)}
    out = Poly(nv)
    text = text.replace("-", "+-").strip()
    for chunk in text.split("+"):
        chunk = chunk.strip()
        if not chunk:
            continue
        sign = 1
        if chunk.startswith("-"):
            sign, chunk = -1, chunk[1:].strip()
        coeff, mono = Fraction(1), chunk
        head = chunk.split("*", 1)
        if len(head) == 2 or re.fullmatch(r"[0-9./]+", chunk):
            try:
                coeff = Fraction(head[0].strip())
                mono = head[1] if len(head) == 2 else ""
            except ValueError:
                coeff, mono = Fraction(1), chunk
        e = [0] * nv
        for factor in mono.replace("*", " ").split():
            nm, _, pw = factor.partition("^")
            if nm not in index:
                raise ValueError(f"unknown variable {nm!r}")
            e[index[nm]] += int(pw) if pw else 1
        out = out + Poly(nv, {tuple(e): sign * coeff})
    return out


class EpsPoly:
    """Polynomial coefficients graded by powers of the deformation parameter."""

    __slots__ = ("nvars", "parts", "base_point")

    def __init__(self, nvars: int, parts: Mapping[int, Poly] | None = None, base_point=None):
        self.nvars = nvars
        self.parts: dict[int, Poly] = {k: p for k, p in (parts or {}).items() if p}
        self.base_point = base_point

    @classmethod
    def from_poly(cls, p: Poly) -> "EpsPoly":
        return cls(p.nvars, {0: p})

    def __getitem__(self, k: int) -> Poly:
        return self.parts.get(k, Poly(self.nvars))

    def __add__(self, other: "EpsPoly") -> "EpsPoly":
        keys = set(self.parts) | set(other.parts)
        return EpsPoly(self.nvars, {k: self[k] + other[k] for k in keys}, self.base_point)

    def __sub__(self, other: "EpsPoly") -> "EpsPoly":
        keys = set(self.parts) | set(other.parts)
        return EpsPoly(self.nvars, {k: self[k] - other[k] for k in keys}, self.base_point)

    def __mul__(self, c) -> "EpsPoly":
        return EpsPoly(self.nvars, {k: p * c for k, p in self.parts.items()}, self.base_point)

    def truncate(self, order: int) -> "EpsPoly":
        return EpsPoly(self.nvars, {k: p for k, p in self.parts.items() if k <= order}, self.base_point)

    def is_zero(self) -> bool:
        return not self.parts

    def max_abs(self) -> float:
        return max((p.max_abs() for p in self.parts.values()), default=0.0)

    def __eq__(self, other):
        return isinstance(other, EpsPoly) and self.parts == other.parts

    def to_lines(self, names: Sequence[str] | None = None) -> list[str]:
        return [f"eps^{k} : {self.parts[k].to_str(names)}" for k in sorted(self.parts)]

    def __repr__(self):
        return "EpsPoly(" + "; ".join(self.to_lines()) + ")"


def parse_eps_poly(text: str, names: Sequence[str]) -> EpsPoly:
    """Parse ``eps^k : <poly>`` lines; a bare polynomial is taken at eps^0."""
    parts: dict[int, Poly] = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        k = 0
        if ":" in line:
            head, line = line.split(":", 1)
            head = head.strip()
            if not head.startswith("eps^"):
                raise ValueError(f"bad grading prefix {head!r}")
            k = int(head[4:])
        parts[k] = parts.get(k, Poly(len(names))) + parse_poly(line, names)
    return EpsPoly(len(names), parts)


def monomials(nvars: int, max_degree: int) -> list[tuple]:
    """All exponent tuples of total degree <= max_degree, graded."""
    out: list[tuple] = []
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out
