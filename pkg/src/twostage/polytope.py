"""Exact LP and H-polytope oracles.

Everything here runs on :class:`fractions.Fraction`.  The simplex uses
Bland's rule on a fixed column order, so results are reproducible bit for
bit.  The volume and integration routines are independent cross-checks
for :mod:`twostage.volume_dp`; vertex enumeration and triangulation are
limited to dimension three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .numerics import Polynomial, _isqrt_ceil, as_fraction

Row = tuple[tuple[Fraction, ...], Fraction]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class UnsupportedDimensionError(ValueError):
    pass


class UnboundedPolytopeError(ValueError):
    pass


@dataclass(frozen=True)
class HPolytope:
    """``{xi : a . xi <= rhs for every row}`` intersected with an optional box."""

    dim: int
    rows: tuple[Row, ...] = ()
    box: tuple[tuple[Fraction, ...], tuple[Fraction, ...]] | None = None

    def __post_init__(self):
        rows = tuple(
            (tuple(as_fraction(v) for v in a), as_fraction(r)) for a, r in self.rows
        )
        for a, _ in rows:
            if len(a) != self.dim:
                raise ValueError(f"row of length {len(a)} in a {self.dim}-dimensional polytope")
        object.__setattr__(self, "rows", rows)
        if self.box is not None:
            lo = tuple(as_fraction(v) for v in self.box[0])
            hi = tuple(as_fraction(v) for v in self.box[1])
            if len(lo) != self.dim or len(hi) != self.dim:
                raise ValueError("box bounds must have length dim")
            if any(l >= h for l, h in zip(lo, hi)):
                raise ValueError("box needs lower < upper componentwise")
            object.__setattr__(self, "box", (lo, hi))

    @classmethod
    def unit_cube(cls, dim: int, rows: Sequence[Row] = ()) -> "HPolytope":
        return cls(dim, tuple(rows), ((0,) * dim, (1,) * dim))

    def all_rows(self) -> list[Row]:
        """Rows with the box written out as inequalities."""
        out = list(self.rows)
        if self.box is not None:
            lo, hi = self.box
            for i in range(self.dim):
                e = [Fraction(0)] * self.dim
                e[i] = Fraction(1)
                out.append((tuple(e), hi[i]))
                e = [Fraction(0)] * self.dim
                e[i] = Fraction(-1)
                out.append((tuple(e), -lo[i]))
        return out

    def with_rows(self, extra: Sequence[Row]) -> "HPolytope":
        return HPolytope(self.dim, self.rows + tuple(extra), self.box)

    def contains(self, point: Sequence) -> bool:
        pt = [as_fraction(p) for p in point]
        return all(sum(a * x for a, x in zip(row, pt)) <= r for row, r in self.all_rows())

    def box_volume(self) -> Fraction:
        if self.box is None:
            raise ValueError("no box")
        v = Fraction(1)
        for l, h in zip(*self.box):
            v *= h - l
        return v


@dataclass(frozen=True)
class LPResult:
    status: str
    value: Fraction | None = None
    point: tuple[Fraction, ...] | None = None


# ---------------------------------------------------------------------------
# standard-form simplex


@dataclass
class StandardFormSolution:
    status: str
    value: Fraction | None = None
    x: list[Fraction] | None = None
    basis: list[int] = field(default_factory=list)
    rows_kept: list[int] = field(default_factory=list)


def _pivot(tab: list[list[Fraction]], obj: list[Fraction], r: int, c: int) -> None:
    prow = tab[r]
    piv = prow[c]
    if piv != 1:
        inv = 1 / piv
        tab[r] = prow = [v * inv if v else v for v in prow]
    nz = [j for j, v in enumerate(prow) if v]
    for i, row in enumerate(tab):
        if i != r:
            f = row[c]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
    f = obj[c]
    if f:
        for j in nz:
            obj[j] -= f * prow[j]


def _run_simplex(tab, obj, basis, allowed: int) -> str:
    """Maximise; ``obj`` holds reduced costs (enter when positive), last
    entry is minus the current objective value.  Columns >= ``allowed`` never
    enter."""
    while True:
        enter = next((j for j in range(allowed) if obj[j] > 0), None)
        if enter is None:
            return OPTIMAL
        best = None
        for i, row in enumerate(tab):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return UNBOUNDED
        r = best[1]
        _pivot(tab, obj, r, enter)
        basis[r] = enter


def simplex_standard(A: Sequence[Sequence], b: Sequence, c: Sequence) -> StandardFormSolution:
    """Maximise ``c x`` subject to ``A x = b, x >= 0`` exactly.

    Two phases with artificial variables; redundant equality rows are
    dropped after phase one (their indices are absent from ``rows_kept``).
    """
    m = len(A)
    n = len(c)
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    c = [Fraction(v) for v in c]
    tab = []
    for i in range(m):
        sgn = -1 if b[i] < 0 else 1
        row = [sgn * v for v in A[i]] + [Fraction(0)] * m + [sgn * b[i]]
        row[n + i] = Fraction(1)
        tab.append(row)
    basis = [n + i for i in range(m)]
    # phase one: maximise -sum(artificials)
    obj = [Fraction(0)] * (n + m + 1)
    for row in tab:
        for j in range(n):
            obj[j] += row[j]
        obj[-1] += row[-1]
    # obj[-1] is minus the phase-one objective, i.e. the artificial total
    status = _run_simplex(tab, obj, basis, n)
    if obj[-1] != 0:
        return StandardFormSolution(INFEASIBLE)
    # drive artificials out of the basis
    rows_kept = list(range(m))
    i = 0
    while i < len(tab):
        if basis[i] >= n:
            col = next((j for j in range(n) if tab[i][j]), None)
            if col is None:
                del tab[i], basis[i], rows_kept[i]
                continue
            dummy = [Fraction(0)] * (n + m + 1)
            _pivot(tab, dummy, i, col)
            basis[i] = col
        i += 1
    for row in tab:
        del row[n:n + m]
    # phase two reduced costs
    obj = list(c) + [Fraction(0)]
    for i, row in enumerate(tab):
        cb = c[basis[i]]
        if cb:
            for j in range(n + 1):
                if row[j]:
                    obj[j] -= cb * row[j]
    status = _run_simplex(tab, obj, basis, n)
    if status == UNBOUNDED:
        return StandardFormSolution(UNBOUNDED, basis=basis, rows_kept=rows_kept)
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        x[j] = tab[i][-1]
    value = sum((ci * xi for ci, xi in zip(c, x) if ci), Fraction(0))
    return StandardFormSolution(OPTIMAL, value, x, basis, rows_kept)


# ---------------------------------------------------------------------------
# LP over H-polytopes


def solve_inequality_lp(rows: Sequence[Row], dim: int, objective: Sequence, sense: str = "max") -> LPResult:
    """Optimise over ``{x free : a.x <= r}``."""
    obj = [as_fraction(v) for v in objective]
    if len(obj) != dim:
        raise ValueError("objective length must equal dimension")
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    sgn = 1 if sense == "max" else -1
    m = len(rows)
    # columns: x+ (dim), x- (dim), slacks (m)
    A = []
    b = []
    for i, (a, r) in enumerate(rows):
        row = list(a) + [-v for v in a] + [Fraction(0)] * m
        row[2 * dim + i] = Fraction(1)
        A.append(row)
        b.append(r)
    c = [sgn * v for v in obj] + [-sgn * v for v in obj] + [Fraction(0)] * m
    sol = simplex_standard(A, b, c)
    if sol.status != OPTIMAL:
        return LPResult(sol.status)
    x = tuple(sol.x[i] - sol.x[dim + i] for i in range(dim))
    return LPResult(OPTIMAL, sgn * sol.value, x)


def solve_lp(p: HPolytope, objective: Sequence, sense: str = "max") -> LPResult:
    return solve_inequality_lp(p.all_rows(), p.dim, objective, sense)


def is_feasible(p: HPolytope) -> bool:
    return solve_lp(p, [0] * p.dim).status == OPTIMAL


def interior_margin(rows: Sequence[Row], dim: int) -> Fraction | None:
    """max s with a.x + s <= r for all rows and s <= 1; None if infeasible.

    The polytope is full-dimensional iff the margin is positive.
    """
    ext = [(tuple(a) + (Fraction(1),), r) for a, r in rows]
    ext.append(((Fraction(0),) * dim + (Fraction(1),), Fraction(1)))
    res = solve_inequality_lp(ext, dim + 1, [0] * dim + [1], "max")
    if res.status != OPTIMAL:
        return None
    return res.value


def is_full_dimensional(p: HPolytope) -> bool:
    m = interior_margin(p.all_rows(), p.dim)
    return m is not None and m > 0


def is_bounded(p: HPolytope) -> bool:
    if p.box is not None:
        return True
    for i in range(p.dim):
        e = [0] * p.dim
        e[i] = 1
        for sense in ("max", "min"):
            if solve_lp(p, e, sense).status == UNBOUNDED:
                return False
    return True


# ---------------------------------------------------------------------------
# exact volume by recursive facet decomposition


def _canonical_rows(rows: Sequence[Row]) -> tuple[Row, ...] | None:
    """Scale rows so the first non-zero coefficient has magnitude one and drop
    duplicates and trivial rows.  Returns None for a trivially empty system."""
    out = set()
    for a, r in rows:
        lead = next((v for v in a if v), None)
        if lead is None:
            if r < 0:
                return None
            continue
        s = abs(lead)
        out.add((tuple(v / s for v in a), r / s))
    return tuple(sorted(out))


@lru_cache(maxsize=200_000)
def _lasserre(rows: tuple[Row, ...], dim: int) -> Fraction:
    if dim == 1:
        lo, hi = None, None
        for (a,), r in rows:
            if a > 0:
                hi = r / a if hi is None else min(hi, r / a)
            elif a < 0:
                lo = r / a if lo is None else max(lo, r / a)
        if lo is None or hi is None:
            raise UnboundedPolytopeError("unbounded interval")
        return max(Fraction(0), hi - lo)
    margin = interior_margin(rows, dim)
    if margin is None or margin <= 0:
        return Fraction(0)
    total = Fraction(0)
    for i, (a, r) in enumerate(rows):
        if r == 0:
            continue
        j = max(range(dim), key=lambda k: (abs(a[k]), -k))
        aj = a[j]
        facet = []
        for k, (ak, rk) in enumerate(rows):
            if k == i:
                continue
            f = ak[j] / aj
            na = tuple(ak[t] - f * a[t] for t in range(dim) if t != j)
            facet.append((na, rk - f * r))
        canon = _canonical_rows(facet)
        if canon is None:
            continue
        sub = _lasserre(canon, dim - 1)
        if sub:
            total += r / abs(aj) * sub
    return total / dim


def lasserre_volume(p: HPolytope) -> Fraction:
    """Exact volume; zero for empty or lower-dimensional bodies."""
    if not is_bounded(p):
        raise UnboundedPolytopeError("polytope is unbounded")
    canon = _canonical_rows(p.all_rows())
    if canon is None:
        return Fraction(0)
    if p.dim == 1:
        return _lasserre(canon, 1)
    return _lasserre(canon, p.dim)


# ---------------------------------------------------------------------------
# vertices and triangulated integration


def _solve_square(M: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    n = len(M)
    aug = [list(M[i]) + [rhs[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col]), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col] / pv
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [aug[i][-1] / aug[i][i] for i in range(n)]


def enumerate_vertices(p: HPolytope) -> list[tuple[Fraction, ...]]:
    if p.dim > 3:
        raise UnsupportedDimensionError("vertex enumeration supports dim <= 3")
    if not is_bounded(p):
        raise UnboundedPolytopeError("polytope is unbounded")
    rows = _canonical_rows(p.all_rows())
    if rows is None:
        return []
    found = []
    seen = set()
    for combo in combinations(rows, p.dim):
        sol = _solve_square([list(a) for a, _ in combo], [r for _, r in combo])
        if sol is None:
            continue
        v = tuple(sol)
        if v in seen:
            continue
        if all(sum(x * y for x, y in zip(a, v)) <= r for a, r in rows):
            seen.add(v)
            found.append(v)
    return found


def _det(M: list[list[Fraction]]) -> Fraction:
    n = len(M)
    M = [list(r) for r in M]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        for r in range(col + 1, n):
            if M[r][col]:
                f = M[r][col] / M[col][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


def _split_quadratic(q: Polynomial):
    if q.total_degree() > 2:
        raise ValueError("integrand must have total degree <= 2")
    n = q.num_vars
    const = q.coefficient((0,) * n)
    lin = Polynomial(n, {e: c for e, c in q.terms.items() if sum(e) == 1})
    quad = Polynomial(n, {e: c for e, c in q.terms.items() if sum(e) == 2})
    return const, lin, quad


def simplex_integral(vertices: Sequence[Sequence[Fraction]], q: Polynomial) -> Fraction:
    """Exact integral of a polynomial of degree <= 2 over a simplex."""
    d = len(vertices) - 1
    v0 = vertices[0]
    vol = abs(_det([[vi[k] - v0[k] for k in range(d)] for vi in vertices[1:]])) / math.factorial(d)
    if not vol:
        return Fraction(0)
    const, lin, quad = _split_quadratic(q)
    s = [sum(v[k] for v in vertices) for k in range(d)]
    centroid = [x / (d + 1) for x in s]
    second = sum((quad.evaluate(v) for v in vertices), Fraction(0)) + quad.evaluate(s)
    return vol * (const + lin.evaluate(centroid) + second / ((d + 1) * (d + 2)))


def _angular_order(points: list[tuple[Fraction, Fraction]]) -> list[int]:
    cx = sum(p[0] for p in points) / len(points)
    cy = sum(p[1] for p in points) / len(points)

    def half(i):
        x, y = points[i][0] - cx, points[i][1] - cy
        return 0 if (y > 0 or (y == 0 and x > 0)) else 1

    from functools import cmp_to_key

    def cmp(i, j):
        hi, hj = half(i), half(j)
        if hi != hj:
            return hi - hj
        xi, yi = points[i][0] - cx, points[i][1] - cy
        xj, yj = points[j][0] - cx, points[j][1] - cy
        cr = xi * yj - yi * xj
        return -1 if cr > 0 else (1 if cr < 0 else 0)

    return sorted(range(len(points)), key=cmp_to_key(cmp))


def triangulate(p: HPolytope) -> list[list[tuple[Fraction, ...]]]:
    """Fan triangulation from the first vertex (dim <= 3)."""
    if p.dim > 3:
        raise UnsupportedDimensionError("triangulation supports dim <= 3")
    if not is_full_dimensional(p):
        return []
    verts = enumerate_vertices(p)
    if p.dim == 1:
        return [[min(verts), max(verts)]]
    if p.dim == 2:
        order = _angular_order(verts)
        ring = [verts[i] for i in order]
        return [[ring[0], ring[i], ring[i + 1]] for i in range(1, len(ring) - 1)]
    v0 = verts[0]
    rows = _canonical_rows(p.all_rows())
    simplices = []
    seen_facets = set()
    for a, r in rows:
        on = [v for v in verts if sum(x * y for x, y in zip(a, v)) == r]
        if len(on) < 3 or v0 in on:
            continue
        key = frozenset(on)
        if key in seen_facets:
            continue
        seen_facets.add(key)
        drop = max(range(3), key=lambda k: abs(a[k]))
        proj = [tuple(v[k] for k in range(3) if k != drop) for v in on]
        order = _angular_order(proj)
        ring = [on[i] for i in order]
        for i in range(1, len(ring) - 1):
            simplices.append([v0, ring[0], ring[i], ring[i + 1]])
    return simplices


def integrate_quadratic_triangulated(p: HPolytope, q: Polynomial) -> Fraction:
    if p.dim > 3:
        raise UnsupportedDimensionError("triangulated integration supports dim <= 3")
    if q.total_degree() > 2:
        raise ValueError("integrand must have total degree <= 2")
    if q.num_vars != p.dim:
        raise ValueError("integrand and polytope dimensions differ")
    return sum((simplex_integral(s, q) for s in triangulate(p)), Fraction(0))


# ---------------------------------------------------------------------------
# Monte Carlo


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(seed: int, count: int) -> np.ndarray:
    """``count`` consecutive outputs of the splitmix64 generator."""
    with np.errstate(over="ignore"):
        state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        z = state + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def uniform_grid_samples(seed: int, samples: int, dim: int, bits: int = 32) -> np.ndarray:
    """Integer samples in ``[0, 2**bits)`` of shape (samples, dim); the point
    is ``lower + (upper - lower) * (k + 1/2) / 2**bits``."""
    raw = splitmix64(seed, samples * dim).reshape(samples, dim)
    return (raw >> np.uint64(64 - bits)).astype(np.int64)


def stderr_upper(hits: int, n: int) -> Fraction:
    """sqrt(v (1 - v) / n) for v = hits / n, rounded up to a dyadic rational.

    ``hits`` is clamped to ``[1, n - 1]`` first: with no hits (or no misses)
    the plug-in estimate would be 0, claiming certainty the sample cannot give.
    """
    if n > 1:
        hits = min(max(hits, 1), n - 1)
    return _isqrt_ceil(Fraction(hits * (n - hits), n**3), 60)


def mc_volume(p: HPolytope, samples: int, seed: int = 0) -> tuple[Fraction, Fraction]:
    """Hit ratio over the box, scaled by the box volume, with its standard error."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    if p.box is None:
        raise ValueError("mc_volume needs a box")
    lo = np.array([float(v) for v in p.box[0]])
    hi = np.array([float(v) for v in p.box[1]])
    ks = uniform_grid_samples(seed, samples, p.dim)
    pts = lo + (hi - lo) * ((ks + 0.5) / 2.0**32)
    inside = np.ones(samples, dtype=bool)
    for a, r in p.rows:
        inside &= pts @ np.array([float(v) for v in a]) <= float(r)
    hits = int(inside.sum())
    bv = p.box_volume()
    ratio = Fraction(hits, samples)
    return ratio * bv, stderr_upper(hits, samples) * bv
