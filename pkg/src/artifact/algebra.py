"""Finite-dimensional Lie algebras given by exact structure constants."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class AlgebraError(ValueError):
    pass


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Structure constants ``[e_i, e_j] = sum_k c[i][j][k] e_k``.

    Only ``i < j`` entries are user data; the full antisymmetric table is kept
    in ``c`` for convenience.
    """

    dim: int
    basis_names: tuple[str, ...]
    c: tuple  # c[i][j][k] as nested tuples of Fraction
    name: str = ""

    @classmethod
    def from_brackets(cls, names: Sequence[str], brackets: dict, name: str = "",
                      check: bool = True) -> "LieAlgebraSpec":
        """``brackets`` maps ``(i, j)`` (i<j, indices or names) to ``{k: coeff}``."""
        d = len(names)
        idx = {nm: i for i, nm in enumerate(names)}
        table = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]
        for (a, b), out in brackets.items():
            i = idx[a] if isinstance(a, str) else a
            j = idx[b] if isinstance(b, str) else b
            if i == j:
                raise AlgebraError("bracket of a basis vector with itself must vanish")
            for k, v in out.items():
                k = idx[k] if isinstance(k, str) else k
                table[i][j][k] += Fraction(v)
                table[j][i][k] -= Fraction(v)
        c = tuple(tuple(tuple(row) for row in plane) for plane in table)
        alg = cls(d, tuple(names), c, name)
        if check:
            alg.check_jacobi()
        return alg

    @property
    def structure(self) -> dict:
        return {(i, j): [(k, v) for k, v in enumerate(self.c[i][j]) if v]
                for i in range(self.dim) for j in range(i + 1, self.dim) if any(self.c[i][j])}

    def bracket(self, x: Sequence, y: Sequence) -> list:
        out = [Fraction(0)] * self.dim
        for i, xi in enumerate(x):
            if not xi:
                continue
            for j, yj in enumerate(y):
                if not yj:
                    continue
                for k, v in enumerate(self.c[i][j]):
                    if v:
                        out[k] += xi * yj * v
        return out

    def ad_matrix(self, x: Sequence) -> list[list]:
        """Matrix of ad x in the basis: column j is [x, e_j]."""
        d = self.dim
        m = [[Fraction(0)] * d for _ in range(d)]
        for j in range(d):
            e = [0] * d
            e[j] = 1
            col = self.bracket(x, e)
            for k in range(d):
                m[k][j] = col[k]
        return m

    def is_abelian(self) -> bool:
        return not any(v for plane in self.c for row in plane for v in row)

    def check_jacobi(self) -> None:
        d = self.dim
        basis = [[1 if k == i else 0 for k in range(d)] for i in range(d)]
        for i, j, k in itertools.combinations(range(d), 3):
            a, b, c = basis[i], basis[j], basis[k]
            s = [x + y + z for x, y, z in zip(self.bracket(a, self.bracket(b, c)),
                                              self.bracket(b, self.bracket(c, a)),
                                              self.bracket(c, self.bracket(a, b)))]
            if any(s):
                names = self.basis_names
                raise AlgebraError(f"Jacobi identity fails on ({names[i]}, {names[j]}, {names[k]})")

    def nonzero_pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.dim) for j in range(self.dim) if any(self.c[i][j])]

    def to_text(self) -> str:
        parts = [f"dim={self.dim}", "basis=" + ",".join(self.basis_names)]
        for (i, j), out in self.structure.items():
            rhs = " + ".join(f"{v}*{self.basis_names[k]}" for k, v in out)
            parts.append(f"bracket {self.basis_names[i]} {self.basis_names[j]} = {rhs}")
        return "; ".join(parts)


_BRACKET_RE = re.compile(r"bracket\s+(\S+)\s+(\S+)\s*=\s*(.+)$")


def load_algebra(text: str) -> LieAlgebraSpec:
    """Parse ``dim=<d>; basis=a,b,c; bracket a b = 1*c; ...`` or a preset name."""
    stripped = text.strip()
    if stripped in PRESETS or re.fullmatch(r"abelian\d+", stripped):
        return preset(stripped)
    dim = None
    names: list[str] | None = None
    brackets: dict = {}
    pos = 0
    statements = re.split(r"[;\n]", text)
    for stmt in statements:
        col = pos + 1
        pos += len(stmt) + 1
        s = stmt.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("dim="):
            dim = int(s[4:])
        elif s.startswith("basis="):
            names = [t.strip() for t in s[6:].split(",") if t.strip()]
        elif s.startswith("bracket"):
            mt = _BRACKET_RE.match(s)
            if mt is None or names is None:
                raise AlgebraError(f"column {col}: malformed bracket statement {s!r}")
            a, b, rhs = mt.groups()
            for nm in (a, b):
                if nm not in names:
                    raise AlgebraError(f"column {col}: unknown basis element {nm!r}")
            out: dict = {}
            for term in rhs.replace("-", "+-").split("+"):
                term = term.strip()
                if not term:
                    continue
                coeff, _, nm = term.rpartition("*")
                coeff = coeff.strip() or "1"
                if coeff == "-":
                    coeff = "-1"
                if nm.strip() not in names:
                    raise AlgebraError(f"column {col}: unknown basis element {nm.strip()!r}")
                out[nm.strip()] = out.get(nm.strip(), 0) + Fraction(coeff)
            i, j = names.index(a), names.index(b)
            if i > j:
                i, j = j, i
                out = {k: -v for k, v in out.items()}
            brackets[(i, j)] = out
        else:
            raise AlgebraError(f"column {col}: cannot parse {s!r}")
    if names is None:
        raise AlgebraError("missing basis=")
    if dim is not None and dim != len(names):
        raise AlgebraError(f"dim={dim} but {len(names)} basis names")
    return LieAlgebraSpec.from_brackets(names, brackets)


def abelian(d: int) -> LieAlgebraSpec:
    return LieAlgebraSpec.from_brackets([f"e{i + 1}" for i in range(d)], {}, f"abelian{d}")


def heisenberg3() -> LieAlgebraSpec:
    return LieAlgebraSpec.from_brackets(["X", "Y", "Z"], {("X", "Y"): {"Z": 1}}, "heisenberg3")


def sl2() -> LieAlgebraSpec:
    # standard basis: [H,X]=2X, [H,Y]=-2Y, [X,Y]=H
    return LieAlgebraSpec.from_brackets(
        ["H", "X", "Y"],
        {("H", "X"): {"X": 2}, ("H", "Y"): {"Y": -2}, ("X", "Y"): {"H": 1}}, "sl2")


def solvable4() -> LieAlgebraSpec:
    return LieAlgebraSpec.from_brackets(
        ["T", "X", "Y", "Z"],
        {("T", "X"): {"X": 1}, ("T", "Y"): {"Y": 1}, ("T", "Z"): {"Z": 2}, ("X", "Y"): {"Z": 1}},
        "solvable4")


def aff2() -> LieAlgebraSpec:
    """The two-dimensional non-abelian algebra [T, X] = X."""
    return LieAlgebraSpec.from_brackets(["T", "X"], {("T", "X"): {"X": 1}}, "aff2")


def double(base: LieAlgebraSpec, t: Fraction | int = 0) -> LieAlgebraSpec:
    """g (x) A_t with A_t = span{k, p}, p^2 = (1 - t^2) k + 2 t p.

    In the basis ``K_a = e_a (x) k`` and ``P_a = e_a (x) p``:
    [K_a, K_b] = K_[ab], [K_a, P_b] = P_[ab], [P_a, P_b] = (1-t^2) K_[ab] + 2t P_[ab].
    At t = 0 this is g x g written in the symmetric-pair basis (K diagonal, P
    antidiagonal).  At t = 1 the span of the P_a is an ideal isomorphic to g
    (via P_a / 2) with the K_a acting on it.
    """
    t = Fraction(t)
    d = base.dim
    names = [f"K{nm}" for nm in base.basis_names] + [f"P{nm}" for nm in base.basis_names]
    brackets: dict = {}
    for a in range(d):
        for b in range(d):
            for k, v in enumerate(base.c[a][b]):
                if not v:
                    continue
                if a < b:
                    _acc(brackets, (a, b), k, v)
                    _acc(brackets, (d + a, d + b), k, v * (1 - t * t))
                    _acc(brackets, (d + a, d + b), d + k, v * 2 * t)
                _acc(brackets, (a, d + b), d + k, v)
    return LieAlgebraSpec.from_brackets(names, brackets, f"double({base.name},t={t})")


def change_basis(alg: LieAlgebraSpec, rows: list[list], names: list[str], name: str | None = None) -> LieAlgebraSpec:
    """Rewrite ``alg`` in the basis f_i = sum_j rows[i][j] e_j."""
    from .linalg import rref
    d = alg.dim
    if len(rows) != d or len(names) != d:
        raise AlgebraError("a change of basis needs dim rows and names")
    # columns of the inverse: solve rows^T y = v
    aug = [[Fraction(rows[j][i]) for j in range(d)] + [Fraction(int(i == k)) for k in range(d)] for i in range(d)]
    red, piv = rref(aug, d)
    if piv != list(range(d)):
        raise AlgebraError("basis change matrix is singular")
    inv = [r[d:] for r in red]  # old e_k = sum_i inv[i][k] f_i
    brackets: dict = {}
    for i in range(d):
        for j in range(i + 1, d):
            vec = [Fraction(0)] * d
            for a, ca in enumerate(rows[i]):
                for b, cb in enumerate(rows[j]):
                    if ca and cb:
                        for k, c in enumerate(alg.c[a][b]):
                            vec[k] += Fraction(ca) * Fraction(cb) * c
            new = [sum(inv[m][k] * vec[k] for k in range(d)) for m in range(d)]
            for m, v in enumerate(new):
                _acc(brackets, (i, j), m, v)
    return LieAlgebraSpec.from_brackets(names, brackets, name or alg.name)


def _acc(br, key, k, v):
    if v:
        br.setdefault(key, {})
        br[key][k] = br[key].get(k, 0) + v


PRESETS = {
    "heisenberg3": heisenberg3,
    "sl2": sl2,
    "solvable4": solvable4,
    "aff2": aff2,
}


def preset(name: str) -> LieAlgebraSpec:
    mt = re.fullmatch(r"abelian(\d+)", name)
    if mt:
        return abelian(int(mt.group(1)))
    mt = re.fullmatch(r"double\((\w+)\)", name)
    if mt:
        return double(preset(mt.group(1)))
    try:
        return PRESETS[name]()
    except KeyError:
        raise AlgebraError(f"unknown preset {name!r}") from None
