"""Piecewise-polynomial volume of ``P(b) = {xi in [0,1]^d : A xi <= b}``.

``F_k(s) = vol {xi in [0,1]^k : A_k xi <= s}`` (first ``k`` columns of an
integer ``A``) satisfies ``F_k(s) = int_0^1 F_{k-1}(s - a_k t) dt``.  Each
``F_k`` is a polynomial of total degree <= k on every chamber of the
arrangement of "walls": the hyperplanes in ``s`` on which k+1 of the
constraints (rows of ``A_k`` and cube facets) pass through one point.
For m = 1 the walls sit at integers and the chambers are unit intervals;
for m >= 2 walls such as ``s_1 + s_2 = 2`` cut through integer boxes, so
the tables are keyed by chamber rather than by box corner.

A chamber's polynomial is derived symbolically from a generic interior
point: the segment ``s - a_k t`` is split where it crosses level k-1
walls, the level k-1 polynomial of each piece is composed with
``s - a_k t``, integrated in ``t`` and evaluated between the (affine in
``s``) piece limits.  Chambers are built lazily, only when reached.
Values on walls are limits from the side ``s + eps (1, ..., 1)``, which
matches the closed-set semantics of ``A xi <= b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .numerics import Polynomial, as_fraction, interpolate_univariate
from .polytope import HPolytope, is_feasible


class ConsistencyError(RuntimeError):
    """A redundant exactness check failed; indicates a bug, never bad input."""


@dataclass(frozen=True)
class IntegerSystem:
    """Integer matrix ``A`` (m x d); ``P(b) = {xi in [0,1]^d : A xi <= b}``."""

    A: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.A)
        if not rows or not rows[0]:
            raise ValueError("A must be a non-empty m x d matrix")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged matrix")
        for r, orig in zip(rows, self.A):
            for v, o in zip(r, orig):
                if Fraction(o) != v:
                    raise ValueError("A must be integer")
        object.__setattr__(self, "A", rows)

    @property
    def m(self) -> int:
        return len(self.A)

    @property
    def d(self) -> int:
        return len(self.A[0])

    def column(self, k: int) -> tuple[int, ...]:
        return tuple(row[k] for row in self.A)

    def norm_inf(self) -> int:
        return max(abs(v) for row in self.A for v in row)

    def polytope(self, b: Sequence) -> HPolytope:
        return HPolytope.unit_cube(self.d, [(row, as_fraction(bi)) for row, bi in zip(self.A, b)])


@dataclass
class BoxVolumeTable:
    """Level-k polynomials keyed by chamber sign vector."""

    level: int
    walls: tuple[tuple[tuple[int, ...], int], ...] = ()
    entries: dict[tuple[int, ...], Polynomial] = field(default_factory=dict)


@dataclass(frozen=True)
class LineRestriction:
    direction: tuple[int, ...]
    t_max: Fraction
    poly: Polynomial


def _int_det(M: list[list[int]]) -> int:
    """Bareiss fraction-free determinant."""
    n = len(M)
    if n == 0:
        return 1
    M = [list(r) for r in M]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if M[r][k]), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def chamber_walls(A: Sequence[Sequence[int]], k: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Walls ``c . s = z`` of ``F_k`` for the first ``k`` columns of ``A``.

    A wall is where k+1 constraints are simultaneously tight; expanding
    ``det([M | rhs])`` along the right-hand-side column gives its
    coefficients.  Normalised by gcd with a positive leading entry.
    """
    m = len(A)
    cons = []  # (coefficients, row index or None, constant rhs)
    for i, row in enumerate(A):
        cons.append((tuple(row[:k]), i, 0))
    for j in range(k):
        e = [0] * k
        e[j] = 1
        cons.append((tuple(e), None, 1))
        e = [0] * k
        e[j] = -1
        cons.append((tuple(e), None, 0))
    walls = set()
    for S in combinations(range(len(cons)), k + 1):
        if all(cons[j][1] is None for j in S):
            continue
        faces = [cons[j] for j in S if cons[j][1] is None]
        axes = [next(t for t, v in enumerate(f[0]) if v) for f in faces]
        if len(set(axes)) != len(axes):
            continue
        c = [0] * m
        z = 0
        for pos, j in enumerate(S):
            minor = [list(cons[r][0]) for r in S if r != j]
            cof = (-1) ** (pos + k) * _int_det(minor)
            if not cof:
                continue
            if cons[j][1] is not None:
                c[cons[j][1]] += cof
            else:
                z -= cof * cons[j][2]
        if not any(c):
            continue
        g = 0
        for v in c:
            g = math.gcd(g, v)
        g = math.gcd(g, z)
        lead = next(v for v in c if v)
        if lead < 0:
            g = -g
        walls.add((tuple(v // g for v in c), z // g))
    return tuple(sorted(walls))


class VolumeDP:
    """Lazily filled level tables for one integer system."""

    def __init__(self, system: IntegerSystem, verify: bool = False):
        self.system = system
        self.verify = verify
        d, m = system.d, system.m
        self.tables = [BoxVolumeTable(k, chamber_walls(system.A, k)) for k in range(d + 1)]
        self.stats = {"fitted": 0, "shortcut_empty": 0, "shortcut_full": 0}
        cmax = max((abs(v) for t in self.tables for c, _ in t.walls for v in c), default=1)
        eta = Fraction(1, 4 * m * cmax + 4)
        # perturbation direction; its sign against any wall normal follows
        # sign(c . 1), then c_1, c_2, ... lexicographically
        self._p = tuple(1 + eta ** (i + 1) for i in range(m))
        self._row_max = [
            tuple(sum(max(v, 0) for v in row[:k]) for row in system.A) for k in range(d + 1)
        ]
        self._m = m

    # -- public ------------------------------------------------------------
    def volume(self, b: Sequence) -> Fraction:
        b = [as_fraction(v) for v in b]
        if len(b) != self.system.m:
            raise ValueError("b must have one entry per row of A")
        return self.chamber_poly(self.system.d, b).evaluate(b)

    def chamber_key(self, k: int, s: Sequence[Fraction]) -> tuple[int, ...]:
        key = []
        for c, z in self.tables[k].walls:
            v = sum(ci * si for ci, si in zip(c, s)) - z
            if v == 0:
                v = sum(ci * pi for ci, pi in zip(c, self._p))
            key.append(1 if v > 0 else -1)
        return tuple(key)

    def chamber_poly(self, k: int, s: Sequence[Fraction]) -> Polynomial:
        key = self.chamber_key(k, s)
        table = self.tables[k].entries
        poly = table.get(key)
        if poly is None:
            poly = self._build(k, s)
            table[key] = poly
        return poly

    # -- construction ------------------------------------------------------
    def _interior_point(self, k: int, s: Sequence[Fraction]) -> list[Fraction]:
        """A point of the (perturbed) chamber of ``s`` off every wall."""
        delta = Fraction(1)
        for c, z in self.tables[k].walls:
            v = sum(ci * si for ci, si in zip(c, s)) - z
            if v:
                cp = abs(sum(ci * pi for ci, pi in zip(c, self._p)))
                if cp:
                    delta = min(delta, abs(v) / (2 * cp))
        return [si + delta * pi for si, pi in zip(s, self._p)], delta

    def _build(self, k: int, s: Sequence[Fraction]) -> Polynomial:
        m = self._m
        rep, delta = self._interior_point(k, s)
        if k == 0:
            return Polynomial.constant(m, 1 if all(v > 0 for v in rep) else 0)
        if all(mx <= v for mx, v in zip(self._row_max[k], rep)):
            self.stats["shortcut_full"] += 1
            return Polynomial.constant(m, 1)
        rows = [(row[:k], v) for row, v in zip(self.system.A, rep)]
        if not is_feasible(HPolytope.unit_cube(k, rows)):
            self.stats["shortcut_empty"] += 1
            return Polynomial.constant(m, 0)
        a = self.system.column(k - 1)
        key = self.chamber_key(k, s)
        for _ in range(64):
            pieces = self._pieces(k, rep, a)
            if pieces is not None:
                break
            delta /= 3
            rep = [si + delta * pi for si, pi in zip(s, self._p)]
            assert self.chamber_key(k, rep) == key
        else:  # pragma: no cover - finitely many bad deltas
            raise ConsistencyError("could not find a generic chamber point")
        poly = self._integrate_pieces(k, rep, a, pieces)
        self.stats["fitted"] += 1
        if self.verify and poly.total_degree() > k:
            raise ConsistencyError(f"level {k} polynomial of total degree {poly.total_degree()}")
        return poly

    def _pieces(self, k, rep, a):
        """Ordered t-limits as (c, z, c.a) affine forms or constants; None if
        the point is not generic."""
        limits = [(Fraction(0), None), (Fraction(1), None)]
        for c, z in self.tables[k - 1].walls:
            ca = sum(ci * ai for ci, ai in zip(c, a))
            cs = sum(ci * si for ci, si in zip(c, rep)) - z
            if ca == 0:
                if cs == 0:
                    return None
                continue
            t = cs / ca
            if 0 <= t <= 1:
                if t in (0, 1):
                    return None
                limits.append((t, (c, z, ca)))
        limits.sort(key=lambda x: x[0])
        ts = [t for t, _ in limits]
        if len(set(ts)) != len(ts):
            return None
        return limits

    def _integrate_pieces(self, k, rep, a, limits) -> Polynomial:
        m = self._m
        # variables s_1..s_m, t
        images = [
            Polynomial.variable(m + 1, i) - Polynomial.variable(m + 1, m) * ai
            for i, ai in enumerate(a)
        ]
        svars = [Polynomial.variable(m, i) for i in range(m)]

        def limit_poly(entry):
            t, form = entry
            if form is None:
                return Polynomial.constant(m, t)
            c, z, ca = form
            return (sum((sv * ci for sv, ci in zip(svars, c)), Polynomial.zero(m)) - z) * Fraction(1, ca)

        total = Polynomial.zero(m)
        for lo, hi in zip(limits, limits[1:]):
            tm = (lo[0] + hi[0]) / 2
            prev = self.chamber_poly(k - 1, [si - ai * tm for si, ai in zip(rep, a)])
            if prev.is_zero():
                continue
            anti = prev.substitute(images).antiderivative(m)
            L, U = limit_poly(lo), limit_poly(hi)
            total = total + anti.substitute(svars + [U]) - anti.substitute(svars + [L])
        return total


def volume_dp(system: IntegerSystem, b: Sequence, verify: bool = False) -> Fraction:
    """Exact ``vol {xi in [0,1]^d : A xi <= b}``."""
    return VolumeDP(system, verify).volume(b)


def line_restriction(system: IntegerSystem, b: Sequence[int], b_dir: Sequence[int]) -> LineRestriction:
    """``t -> vol P(b + t b_dir)`` on ``[0, 1/||b_dir||_inf]`` as a polynomial.

    Uses d+1 interior samples plus one held-out sample that must agree.
    """
    b = [int(v) for v in b]
    b_dir = [int(v) for v in b_dir]
    norm = max(abs(v) for v in b_dir)
    if norm == 0:
        raise ValueError("direction must be non-zero")
    t_max = Fraction(1, norm)
    d = system.d
    dp = VolumeDP(system)
    ts = [t_max * Fraction(2 * j + 1, 2 * d + 4) for j in range(d + 2)]
    vals = [dp.volume([bi + t * di for bi, di in zip(b, b_dir)]) for t in ts]
    poly = interpolate_univariate(list(zip(ts[:-1], vals[:-1])))
    if poly.evaluate((ts[-1],)) != vals[-1]:
        raise ConsistencyError("held-out sample disagrees with the degree-d fit")
    return LineRestriction(tuple(b_dir), t_max, poly)


def _lifted_moment_volume(system: IntegerSystem, b: Sequence[Fraction], idx: Sequence[int]) -> Fraction:
    """vol {(xi, u_1..u_r) in [0,1]^{d+r} : A xi <= b, u_j <= xi_{idx[j]}}
    which equals int_{P(b)} prod_j xi_{idx[j]}."""
    d = system.d
    r = len(idx)
    rows = [tuple(row) + (0,) * r for row in system.A]
    rhs = list(b)
    for j, i in enumerate(idx):
        row = [0] * (d + r)
        row[i] = -1
        row[d + j] = 1
        rows.append(tuple(row))
        rhs.append(Fraction(0))
    return volume_dp(IntegerSystem(tuple(rows)), rhs)


def quad_moment(system: IntegerSystem, b: Sequence, q: Polynomial) -> Fraction:
    """Exact ``int_{P(b)} q`` for ``q`` of total degree <= 2 in d variables."""
    if q.total_degree() > 2:
        raise ValueError("quad_moment supports total degree <= 2")
    if q.num_vars != system.d:
        raise ValueError("polynomial must have one variable per column of A")
    b = [as_fraction(v) for v in b]
    total = Fraction(0)
    for e, c in sorted(q.terms.items()):
        idx = [i for i, p in enumerate(e) for _ in range(p)]
        if not idx:
            total += c * volume_dp(system, b)
        else:
            total += c * _lifted_moment_volume(system, b, idx)
    return total
