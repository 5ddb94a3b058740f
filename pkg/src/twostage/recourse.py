"""Exact expected recourse for two-stage stochastic LPs with box-uniform xi.

The second stage is ``Q(x, xi) = min q_xi.y  s.t.  W y = h_xi - T_xi x, y >= 0``
with ``q_xi, T_xi, h_xi`` affine in ``xi`` and ``xi ~ U[l, u]``.  For a fixed
``x`` every basis of ``W`` is optimal on a polytope of ``xi`` values (its
basis cell) and its value there is a quadratic in ``xi``.  Bases with the
same quadratic form an objective class; the expectation is the sum over
classes of the integral over the union of the class's cells, expanded by
inclusion-exclusion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Sequence

from .numerics import Polynomial, as_fraction
from .polytope import (
    OPTIMAL,
    UNBOUNDED,
    HPolytope,
    Row,
    _canonical_rows,
    interior_margin,
    simplex_integral,
    simplex_standard,
    solve_lp,
    triangulate,
    uniform_grid_samples,
)
from .volume_dp import IntegerSystem, quad_moment

logger = logging.getLogger(__name__)

Matrix = tuple[tuple[Fraction, ...], ...]
Vector = tuple[Fraction, ...]


class RecourseError(RuntimeError):
    """Certified domain error about the second stage."""


class RecourseIncompleteError(RecourseError):
    def __init__(self, message, deficit=None, witness=None):
        super().__init__(message)
        self.deficit = deficit
        self.witness = witness


class UnboundedRecourseError(RecourseError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NonConvergenceError(RecourseError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ClassTooLargeError(RecourseError):
    pass


def _vec(v) -> Vector:
    return tuple(as_fraction(x) for x in v)


def _mat(M) -> Matrix:
    return tuple(tuple(as_fraction(x) for x in row) for row in M)


def _inverse(M: Sequence[Sequence[Fraction]]) -> list[list[Fraction]] | None:
    n = len(M)
    aug = [list(M[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col]), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@dataclass(frozen=True)
class StochasticProgram:
    """Two-stage SSLP data; ``q = q0 + Qmat xi``, ``T = T0 + sum_k xi_k Tk[k]``,
    ``h = h0 + Hmat xi``, ``xi ~ U[l, u]``."""

    c: Vector
    A: Matrix
    b: Vector
    W: Matrix
    q0: Vector
    Qmat: Matrix
    T0: Matrix
    Tk: tuple[Matrix, ...]
    h0: Vector
    Hmat: Matrix
    l: Vector
    u: Vector
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("c", "b", "q0", "h0", "l", "u"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        for name in ("A", "W", "Qmat", "T0", "Hmat"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        object.__setattr__(self, "Tk", tuple(_mat(t) for t in self.Tk))
        self._check_shapes()

    @property
    def n1(self) -> int:
        return len(self.c)

    @property
    def m1(self) -> int:
        return len(self.b)

    @property
    def m2(self) -> int:
        return len(self.W)

    @property
    def n2(self) -> int:
        return len(self.W[0]) if self.W else 0

    @property
    def d(self) -> int:
        return len(self.l)

    def _check_shapes(self):
        n1, m1, m2, n2, d = self.n1, self.m1, self.m2, self.n2, self.d

        def shape(name, M, rows, cols):
            if len(M) != rows or any(len(r) != cols for r in M):
                raise ValueError(f"{name} must be {rows}x{cols}")

        shape("A", self.A, m1, n1)
        shape("W", self.W, m2, n2)
        shape("Qmat", self.Qmat, n2, d)
        shape("T0", self.T0, m2, n1)
        shape("Hmat", self.Hmat, m2, d)
        if len(self.Tk) != d:
            raise ValueError("Tk needs one matrix per random coordinate")
        for t in self.Tk:
            shape("Tk[k]", t, m2, n1)
        if len(self.q0) != n2 or len(self.h0) != m2 or len(self.u) != d:
            raise ValueError("vector lengths inconsistent with W and d")
        if any(lo >= hi for lo, hi in zip(self.l, self.u)):
            raise ValueError("need l < u componentwise")

    # -- first stage ---------------------------------------------------------
    def first_stage_polytope(self) -> HPolytope:
        return HPolytope(self.n1, tuple(zip(self.A, self.b)))

    def check_first_stage(self) -> None:
        """Certify ``{x : Ax <= b}`` non-empty and bounded (2 n1 LPs)."""
        P = self.first_stage_polytope()
        for i in range(self.n1):
            e = [0] * self.n1
            e[i] = 1
            for sense in ("max", "min"):
                res = solve_lp(P, e, sense)
                if res.status != OPTIMAL:
                    raise ValueError(f"first-stage region is {res.status}")

    def is_first_stage_feasible(self, x: Sequence) -> bool:
        return self.first_stage_polytope().contains(x)

    # -- affine data -------------------------------------------------------
    def q_poly(self, j: int) -> Polynomial:
        return Polynomial.affine(self.Qmat[j], self.q0[j])

    def rhs_poly(self, x: Sequence[Fraction], i: int) -> Polynomial:
        """``(h_xi - T_xi x)_i`` as an affine polynomial in xi."""
        const = self.h0[i] - sum(t * xj for t, xj in zip(self.T0[i], x))
        lin = [
            self.Hmat[i][k] - sum(t * xj for t, xj in zip(self.Tk[k][i], x))
            for k in range(self.d)
        ]
        return Polynomial.affine(lin, const)

    def T_poly(self, i: int, j: int) -> Polynomial:
        return Polynomial.affine([self.Tk[k][i][j] for k in range(self.d)], self.T0[i][j])

    def box(self) -> HPolytope:
        return HPolytope(self.d, (), (self.l, self.u))

    def box_volume(self) -> Fraction:
        v = Fraction(1)
        for lo, hi in zip(self.l, self.u):
            v *= hi - lo
        return v

    def at(self, xi: Sequence[Fraction]):
        """Concrete (q, T, h) at a realisation."""
        xi = [as_fraction(v) for v in xi]
        q = [self.q0[j] + sum(a * z for a, z in zip(self.Qmat[j], xi)) for j in range(self.n2)]
        h = [self.h0[i] + sum(a * z for a, z in zip(self.Hmat[i], xi)) for i in range(self.m2)]
        T = [
            [self.T0[i][j] + sum(xi[k] * self.Tk[k][i][j] for k in range(self.d)) for j in range(self.n1)]
            for i in range(self.m2)
        ]
        return q, T, h


# ---------------------------------------------------------------------------
# bases and cells


@dataclass(frozen=True)
class Basis:
    columns: tuple[int, ...]


@dataclass(frozen=True)
class BasisCell:
    basis: Basis
    cell: HPolytope
    objective: Polynomial
    duals: tuple[Polynomial, ...]


@dataclass
class ObjectiveClass:
    objective: Polynomial
    members: list[BasisCell]


def enumerate_bases(W: Sequence[Sequence]) -> list[Basis]:
    """All column subsets of size m2 with non-zero determinant, lexicographic."""
    W = _mat(W)
    m2 = len(W)
    n2 = len(W[0]) if W else 0
    if m2 > n2:
        raise ValueError("W has more rows than columns")
    out = []
    for cols in combinations(range(n2), m2):
        if _inverse([[W[i][j] for j in cols] for i in range(m2)]) is not None:
            out.append(Basis(cols))
    return out


def _affine_row(p: Polynomial, d: int) -> Row:
    """Row for ``p(xi) >= 0`` written as ``a . xi <= r``."""
    lin = []
    for k in range(d):
        e = [0] * d
        e[k] = 1
        lin.append(-p.coefficient(tuple(e)))
    return tuple(lin), p.coefficient((0,) * d)


def basis_cell(sp: StochasticProgram, x: Sequence, basis: Basis) -> BasisCell:
    x = [as_fraction(v) for v in x]
    d, m2 = sp.d, sp.m2
    cols = basis.columns
    inv = _inverse([[sp.W[i][j] for j in cols] for i in range(m2)])
    if inv is None:
        raise ValueError(f"columns {cols} do not form a basis")
    r = [sp.rhs_poly(x, i) for i in range(m2)]
    zero = Polynomial.zero(d)
    primal = [sum((r[k] * inv[i][k] for k in range(m2)), zero) for i in range(m2)]
    qB = [sp.q_poly(j) for j in cols]
    # lambda = W_B^{-T} q_B
    duals = [sum((qB[k] * inv[k][i] for k in range(m2)), zero) for i in range(m2)]
    rows = [_affine_row(p, d) for p in primal]
    for j in range(sp.n2):
        if j in cols:
            continue
        reduced = sp.q_poly(j) - sum((duals[i] * sp.W[i][j] for i in range(m2)), zero)
        rows.append(_affine_row(reduced, d))
    objective = sum((qB[i] * primal[i] for i in range(m2)), zero)
    return BasisCell(basis, HPolytope(d, tuple(rows), (sp.l, sp.u)), objective, tuple(duals))


def objective_classes(cells: Sequence[BasisCell]) -> list[ObjectiveClass]:
    """Group cells by exact equality of the expanded objective polynomial,
    keeping first-appearance order."""
    classes: dict[Polynomial, ObjectiveClass] = {}
    for c in cells:
        cls = classes.get(c.objective)
        if cls is None:
            classes[c.objective] = cls = ObjectiveClass(c.objective, [])
        cls.members.append(c)
    return list(classes.values())


# ---------------------------------------------------------------------------
# integration backends


class Integrator:
    """Exact integrals of polynomials (degree <= 2) over polytopes in xi-space.

    ``backend`` is "triangulate" (vertex enumeration + simplex moments,
    d <= 3), "dp" (volume dynamic program on the rescaled integer system)
    or "auto" (triangulate when d <= 3).
    """

    def __init__(self, sp: StochasticProgram, backend: str = "auto"):
        if backend == "auto":
            backend = "triangulate" if sp.d <= 3 else "dp"
        if backend not in ("triangulate", "dp"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "triangulate" and sp.d > 3:
            raise ValueError("triangulation backend needs d <= 3")
        self.sp = sp
        self.backend = backend
        self._tri_cache: dict = {}
        self.max_scaled_norm = 0
        self.calls = 0

    def full_dimensional(self, rows: Sequence[Row]) -> bool:
        canon = _canonical_rows(list(rows) + self.sp.box().all_rows())
        if canon is None:
            return False
        m = interior_margin(canon, self.sp.d)
        return m is not None and m > 0

    def integrate(self, rows: Sequence[Row], polys: Sequence[Polynomial]) -> list[Fraction]:
        self.calls += 1
        if self.backend == "triangulate":
            key = _canonical_rows(rows)
            if key is None:
                return [Fraction(0)] * len(polys)
            simplices = self._tri_cache.get(key)
            if simplices is None:
                simplices = triangulate(HPolytope(self.sp.d, key, (self.sp.l, self.sp.u)))
                self._tri_cache[key] = simplices
            return [sum((simplex_integral(s, p) for s in simplices), Fraction(0)) for p in polys]
        return [self._dp_integral(rows, p) for p in polys]

    def _dp_integral(self, rows: Sequence[Row], q: Polynomial) -> Fraction:
        sp = self.sp
        d = sp.d
        widths = [hi - lo for lo, hi in zip(sp.l, sp.u)]
        int_rows = []
        rhs = []
        for a, r in rows:
            na = [ak * wk for ak, wk in zip(a, widths)]
            nr = r - sum(ak * lk for ak, lk in zip(a, sp.l))
            den = 1
            for v in na:
                den = den * v.denominator // math.gcd(den, v.denominator)
            if not any(na):
                if nr < 0:
                    return Fraction(0)
                continue
            int_rows.append(tuple(int(v * den) for v in na))
            rhs.append(nr * den)
        # xi = l + diag(widths) zeta
        images = [Polynomial.affine([w if j == k else 0 for j in range(d)], sp.l[k]) for k, w in enumerate(widths)]
        qz = q.substitute(images)
        jac = Fraction(1)
        for w in widths:
            jac *= w
        if not int_rows:
            # whole cube: integrate monomials directly
            return jac * _cube_integral(qz)
        system = IntegerSystem(tuple(int_rows))
        self.max_scaled_norm = max(self.max_scaled_norm, system.norm_inf())
        return jac * quad_moment(system, rhs, qz)


def _cube_integral(q: Polynomial) -> Fraction:
    total = Fraction(0)
    for e, c in q.terms.items():
        v = c
        for p in e:
            v /= p + 1
        total += v
    return total


# ---------------------------------------------------------------------------
# expectation


@dataclass
class RecourseReport:
    value: Fraction
    coverage: Fraction
    box_volume: Fraction
    classes: int
    bases: int
    intersections: int
    diagnostics: dict = field(default_factory=dict)


def _inclusion_exclusion(
    integ: Integrator, members: Sequence[BasisCell], polys: Sequence[Polynomial], cap: int
) -> tuple[list[Fraction], int]:
    """sum over non-empty subsets S of (-1)^{|S|+1} int_{cap of S} p, for each p.
    Subsets whose intersection is not full-dimensional are pruned with all
    their supersets."""
    if len(members) > cap:
        raise ClassTooLargeError(
            f"objective class with {len(members)} bases exceeds the cap of {cap}"
        )
    totals = [Fraction(0)] * len(polys)
    count = 0
    level = []
    for i, m in enumerate(members):
        rows = m.cell.rows
        if integ.full_dimensional(rows):
            level.append(((i,), rows))
    size = 1
    while level:
        sign = 1 if size % 2 else -1
        for _, rows in level:
            vals = integ.integrate(rows, polys)
            count += 1
            for k, v in enumerate(vals):
                totals[k] += sign * v
        nxt = []
        for idx, rows in level:
            for j in range(idx[-1] + 1, len(members)):
                new_rows = rows + members[j].cell.rows
                if integ.full_dimensional(new_rows):
                    nxt.append((idx + (j,), new_rows))
        level = nxt
        size += 1
    return totals, count


def analyze_recourse(
    sp: StochasticProgram,
    x: Sequence,
    backend: str = "auto",
    cap: int = 20,
    bases: Sequence[Basis] | None = None,
) -> RecourseReport:
    """Expected recourse with its coverage certificate and diagnostics."""
    x = [as_fraction(v) for v in x]
    if not sp.is_first_stage_feasible(x):
        raise ValueError("x violates the first-stage constraints")
    bases = list(bases) if bases is not None else enumerate_bases(sp.W)
    cells = [basis_cell(sp, x, B) for B in bases]
    classes = objective_classes(cells)
    integ = Integrator(sp, backend)
    one = Polynomial.constant(sp.d, 1)
    total = Fraction(0)
    covered = Fraction(0)
    inter = 0
    for cls in classes:
        (vol, integral), n = _inclusion_exclusion(integ, cls.members, [one, cls.objective], cap)
        covered += vol
        total += integral
        inter += n
    box_vol = sp.box_volume()
    deficit = box_vol - covered
    report = RecourseReport(
        value=total / box_vol,
        coverage=covered,
        box_volume=box_vol,
        classes=len(classes),
        bases=len(bases),
        intersections=inter,
        diagnostics={
            "backend": integ.backend,
            "coverage_deficit": deficit,
            "max_scaled_norm": integ.max_scaled_norm,
        },
    )
    if deficit < 0:
        raise RuntimeError(f"classes overlap on positive measure (excess {-deficit}); bug")
    if deficit > 0:
        _raise_incomplete(sp, x, deficit)
    return report


def _raise_incomplete(sp: StochasticProgram, x, deficit):
    witness, status = _find_witness(sp, x)
    if status == UNBOUNDED:
        raise UnboundedRecourseError(
            f"second stage unbounded on positive measure (coverage deficit {deficit})", witness
        )
    raise RecourseIncompleteError(
        f"second stage infeasible on positive measure (coverage deficit {deficit})",
        deficit,
        witness,
    )


def _find_witness(sp: StochasticProgram, x, max_points: int = 4096):
    levels = 1
    while True:
        n = 2**levels
        pts = n**sp.d
        if pts > max_points:
            break
        for idx in product(range(n), repeat=sp.d):
            xi = [lo + (hi - lo) * Fraction(2 * i + 1, 2 * n) for i, lo, hi in zip(idx, sp.l, sp.u)]
            status, _ = second_stage(sp, x, xi)
            if status != OPTIMAL:
                return tuple(xi), status
        levels += 1
    return None, None


def expected_recourse(sp: StochasticProgram, x: Sequence, backend: str = "auto", cap: int = 20) -> Fraction:
    """Exact ``E_xi[Q(x, xi)]``."""
    return analyze_recourse(sp, x, backend, cap).value


def second_stage(sp: StochasticProgram, x: Sequence, xi: Sequence):
    """(status, value) of the second-stage LP at a realisation."""
    x = [as_fraction(v) for v in x]
    q, T, h = sp.at(xi)
    rhs = [h[i] - sum(T[i][j] * x[j] for j in range(sp.n1)) for i in range(sp.m2)]
    sol = simplex_standard(sp.W, rhs, [-v for v in q])
    if sol.status != OPTIMAL:
        return sol.status, None
    return OPTIMAL, -sol.value


def second_stage_value(sp: StochasticProgram, x: Sequence, xi: Sequence) -> Fraction:
    status, value = second_stage(sp, x, xi)
    if status == OPTIMAL:
        return value
    if status == UNBOUNDED:
        raise UnboundedRecourseError("second stage unbounded", tuple(xi))
    raise RecourseIncompleteError("second stage infeasible", witness=tuple(xi))


def cell_value(sp: StochasticProgram, x: Sequence, xi: Sequence, cells: Sequence[BasisCell] | None = None) -> Fraction:
    """``Q(x, xi)`` from the cell decomposition alone: the largest dual
    objective ``lambda_B(xi) . r(xi)`` over bases that are dual feasible at
    ``xi``.  A cell containing ``xi`` must attain it."""
    xi = [as_fraction(v) for v in xi]
    if cells is None:
        cells = [basis_cell(sp, x, B) for B in enumerate_bases(sp.W)]
    m2 = sp.m2
    best = None
    attained = False
    for c in cells:
        dual_rows = c.cell.rows[m2:]
        if any(sum(a * v for a, v in zip(row, xi)) > r for row, r in dual_rows):
            continue
        val = c.objective.evaluate(xi)
        primal_ok = all(sum(a * v for a, v in zip(row, xi)) <= r for row, r in c.cell.rows[:m2])
        if best is None or val > best:
            best = val
        attained = attained or primal_ok
    if best is None:
        raise UnboundedRecourseError("no dual-feasible basis: second stage unbounded or infeasible", tuple(xi))
    if not attained:
        raise RecourseIncompleteError("no basis cell contains xi", witness=tuple(xi))
    return best


# ---------------------------------------------------------------------------
# d = 1


def _interval_of(cell: HPolytope) -> tuple[Fraction, Fraction] | None:
    lo, hi = cell.box[0][0], cell.box[1][0]
    for (a,), r in cell.rows:
        if a > 0:
            hi = min(hi, r / a)
        elif a < 0:
            lo = max(lo, r / a)
        elif r < 0:
            return None
    return (lo, hi) if lo < hi else None


def _integrate_1d(p: Polynomial, a: Fraction, b: Fraction) -> Fraction:
    anti = p.antiderivative(0)
    return anti.evaluate((b,)) - anti.evaluate((a,))


def expected_recourse_1d(sp: StochasticProgram, x: Sequence, method: str = "auto") -> Fraction:
    """Exact expectation for d = 1.

    ``cells``: sort the endpoints of all basis-cell intervals and integrate the
    objective of a covering cell on each elementary interval.
    ``parametric``: walk the interval with exact LP solves, reading off the
    validity interval of each optimal basis (no basis enumeration; suited to
    large second stages).
    """
    if sp.d != 1:
        raise ValueError("expected_recourse_1d needs d = 1")
    x = [as_fraction(v) for v in x]
    if not sp.is_first_stage_feasible(x):
        raise ValueError("x violates the first-stage constraints")
    if method == "auto":
        method = "cells" if math.comb(sp.n2, sp.m2) <= 2000 else "parametric"
    if method == "cells":
        return _expected_1d_cells(sp, x)
    if method == "parametric":
        return _expected_1d_parametric(sp, x)
    raise ValueError(f"unknown method {method!r}")


def _expected_1d_cells(sp, x) -> Fraction:
    pieces = []
    for B in enumerate_bases(sp.W):
        cell = basis_cell(sp, x, B)
        iv = _interval_of(cell.cell)
        if iv is not None:
            pieces.append((iv, cell.objective))
    lo, hi = sp.l[0], sp.u[0]
    cuts = sorted({lo, hi} | {e for iv, _ in pieces for e in iv})
    total = Fraction(0)
    for a, b in zip(cuts, cuts[1:]):
        mid = (a + b) / 2
        obj = next((p for (s, t), p in pieces if s <= mid <= t), None)
        if obj is None:
            status, _ = second_stage(sp, x, [mid])
            if status == UNBOUNDED:
                raise UnboundedRecourseError("second stage unbounded on an interval", (mid,))
            raise RecourseIncompleteError(
                "second stage infeasible on an interval", deficit=b - a, witness=(mid,)
            )
        total += _integrate_1d(obj, a, b)
    return total / (hi - lo)


def _basis_from_lp(sp, x, xi):
    q, T, h = sp.at(xi)
    rhs = [h[i] - sum(T[i][j] * x[j] for j in range(sp.n1)) for i in range(sp.m2)]
    sol = simplex_standard(sp.W, rhs, [-v for v in q])
    return sol


def _expected_1d_parametric(sp, x) -> Fraction:
    lo, hi = sp.l[0], sp.u[0]
    total = Fraction(0)
    stack = [(lo, hi, 0)]
    while stack:
        a, b, depth = stack.pop()
        if a >= b:
            continue
        if depth > 200:
            raise RuntimeError("parametric walk failed to make progress")
        t = (a + b) / 2
        sol = _basis_from_lp(sp, x, [t])
        if sol.status != OPTIMAL:
            if sol.status == UNBOUNDED:
                raise UnboundedRecourseError("second stage unbounded", (t,))
            raise RecourseIncompleteError("second stage infeasible", deficit=None, witness=(t,))
        sub = _restrict(sp, sol.rows_kept)
        cell = basis_cell(sub, x, Basis(tuple(sol.basis)))
        iv = _interval_of(cell.cell)
        if iv is None or not (iv[0] <= t <= iv[1]):
            # degenerate: basis valid at t only; split around it
            stack.append((a, t, depth + 1))
            stack.append((t, b, depth + 1))
            continue
        s, e = max(iv[0], a), min(iv[1], b)
        total += _integrate_1d(cell.objective, s, e)
        stack.append((a, s, depth + 1))
        stack.append((e, b, depth + 1))
    return total / (hi - lo)


def _restrict(sp: StochasticProgram, rows: Sequence[int]) -> StochasticProgram:
    """Drop redundant second-stage equality rows."""
    if len(rows) == sp.m2:
        return sp
    pick = lambda M: [M[i] for i in rows]  # noqa: E731
    return StochasticProgram(
        sp.c, sp.A, sp.b, pick(sp.W), sp.q0, sp.Qmat, pick(sp.T0),
        [pick(t) for t in sp.Tk], pick(sp.h0), pick(sp.Hmat), sp.l, sp.u,
    )


# ---------------------------------------------------------------------------
# subgradient


def expected_subgradient(sp: StochasticProgram, x: Sequence, backend: str = "auto", cap: int = 20) -> list[Fraction]:
    """``E[-T_xi^T lambda(xi)]`` for an optimal dual selection ``lambda``.

    Within an objective class the first (in basis order) optimal basis is
    selected, so overlapping members with different duals are handled by
    integrating each member over its cell minus the earlier members' cells.
    """
    x = [as_fraction(v) for v in x]
    if not sp.is_first_stage_feasible(x):
        raise ValueError("x violates the first-stage constraints")
    cells = [basis_cell(sp, x, B) for B in enumerate_bases(sp.W)]
    classes = objective_classes(cells)
    integ = Integrator(sp, backend)
    d, m2, n1 = sp.d, sp.m2, sp.n1
    one = Polynomial.constant(d, 1)
    zero = Polynomial.zero(d)
    grad = [Fraction(0)] * n1
    covered = Fraction(0)
    for cls in classes:
        members = cls.members
        if len(members) > cap:
            raise ClassTooLargeError(f"objective class with {len(members)} bases exceeds the cap of {cap}")
        for j, cell in enumerate(members):
            g = [
                -sum((sp.T_poly(i, col) * cell.duals[i] for i in range(m2)), zero)
                for col in range(n1)
            ]
            polys = [one] + g
            if not integ.full_dimensional(cell.cell.rows):
                continue
            # int over P_j minus union of earlier members' cells
            level = [((), cell.cell.rows)]
            size = 0
            while level:
                sign = 1 if size % 2 == 0 else -1
                nxt = []
                for idx, rows in level:
                    vals = integ.integrate(rows, polys)
                    covered += sign * vals[0]
                    for col in range(n1):
                        grad[col] += sign * vals[1 + col]
                    start = idx[-1] + 1 if idx else 0
                    for i in range(start, j):
                        new_rows = rows + members[i].cell.rows
                        if integ.full_dimensional(new_rows):
                            nxt.append((idx + (i,), new_rows))
                level = nxt
                size += 1
    deficit = sp.box_volume() - covered
    if deficit > 0:
        _raise_incomplete(sp, x, deficit)
    return [v / sp.box_volume() for v in grad]


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class _IntCell:
    rows: list[tuple[tuple[int, ...], int]]
    coeffs: list[tuple[tuple[int, ...], int]]
    den: int


def _scaled_cells(sp: StochasticProgram, x, bits: int) -> list[_IntCell]:
    """Basis cells rewritten over integer sample coordinates U_k = 2K_k + 1
    with xi_k = l_k + (u_k - l_k) U_k / 2^(bits+1)."""
    d = sp.d
    scale = Fraction(1, 2 ** (bits + 1))
    images = [
        Polynomial.affine([(hi - lo) * scale if j == k else 0 for j in range(d)], lo)
        for k, (lo, hi) in enumerate(zip(sp.l, sp.u))
    ]
    out = []
    for B in enumerate_bases(sp.W):
        cell = basis_cell(sp, x, B)
        rows = []
        for a, r in cell.cell.rows:
            p = Polynomial.affine(a, -r).substitute(images)  # a.xi - r <= 0
            coeffs = [p.coefficient(tuple(int(i == k) for i in range(d))) for k in range(d)]
            const = p.coefficient((0,) * d)
            den = math.lcm(*(v.denominator for v in coeffs + [const]))
            rows.append((tuple(int(v * den) for v in coeffs), int(-const * den)))
        obj = cell.objective.substitute(images)
        den = math.lcm(*(v.denominator for v in obj.terms.values())) if obj.terms else 1
        out.append(_IntCell(rows, [(e, int(c * den)) for e, c in obj.terms.items()], den))
    return out


def mc_expected_recourse(sp: StochasticProgram, x: Sequence, samples: int, seed: int = 0) -> tuple[Fraction, Fraction]:
    """Mean of exact second-stage values at seeded uniform draws.

    Draws are dyadic (32 bits per coordinate).  A draw's value is the
    objective of the first basis that is primal and dual feasible there,
    evaluated exactly in integer arithmetic.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    x = [as_fraction(v) for v in x]
    bits = 32
    cells = _scaled_cells(sp, x, bits)
    ks = uniform_grid_samples(seed, samples, sp.d, bits)
    sums = [0] * len(cells)
    sq = 0.0
    total_f = 0.0
    for row in ks.tolist():
        U = [2 * k + 1 for k in row]
        for ci, cell in enumerate(cells):
            if all(sum(a * v for a, v in zip(coef, U)) <= rhs for coef, rhs in cell.rows):
                num = 0
                for e, c in cell.coeffs:
                    term = c
                    for v, p in zip(U, e):
                        if p:
                            term *= v**p
                    num += term
                sums[ci] += num
                val = num / cell.den
                total_f += val
                sq += val * val
                break
        else:
            xi = tuple(
                lo + (hi - lo) * Fraction(v, 2 ** (bits + 1)) for v, lo, hi in zip(U, sp.l, sp.u)
            )
            second_stage_value(sp, x, xi)  # raises with the witness
            raise RuntimeError("no optimal basis found although the LP is solvable")  # pragma: no cover
    mean = sum((Fraction(s, c.den) for s, c in zip(sums, cells)), Fraction(0)) / samples
    var = max(0.0, sq / samples - (total_f / samples) ** 2)
    if samples > 1:
        var *= samples / (samples - 1)
    stderr = Fraction(math.sqrt(var / samples) * (1 + 1e-9)).limit_denominator(2**60)
    stderr = max(stderr, Fraction(0))
    return mean, stderr


# ---------------------------------------------------------------------------
# first stage


@dataclass
class FirstStageResult:
    x: list[Fraction]
    value: Fraction
    lower_bound: Fraction
    iterations: int


def solve_first_stage(
    sp: StochasticProgram,
    epsilon,
    max_iter: int = 10_000,
    backend: str = "auto",
    evaluate: Callable | None = None,
) -> FirstStageResult:
    """min c.x + E[Q(x, xi)] over Ax <= b to within ``epsilon``.

    n1 = 1 uses bisection on the sign of the exact subgradient with the
    two-tangent lower bound; otherwise Kelley's cutting-plane method with
    exact LP master problems.  ``evaluate(x) -> (value, subgradient)`` may
    replace the exact oracle.
    """
    eps = as_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    sp.check_first_stage()

    def oracle(x):
        if evaluate is not None:
            v, g = evaluate(x)
        else:
            v = expected_recourse(sp, x, backend)
            g = expected_subgradient(sp, x, backend)
        v = v + sum(ci * xi for ci, xi in zip(sp.c, x))
        g = [gi + ci for gi, ci in zip(g, sp.c)]
        return v, g

    if sp.n1 == 1:
        return _bisect_1d(sp, oracle, eps, max_iter)
    return _kelley(sp, oracle, eps, max_iter)


def _bisect_1d(sp, oracle, eps, max_iter) -> FirstStageResult:
    P = sp.first_stage_polytope()
    a = solve_lp(P, [1], "min").value
    b = solve_lp(P, [1], "max").value
    fa, (ga,) = oracle([a])
    if ga >= 0:
        return FirstStageResult([a], fa, fa, 1)
    fb, (gb,) = oracle([b])
    if gb <= 0:
        return FirstStageResult([b], fb, fb, 2)
    best = min((fa, a), (fb, b))
    for it in range(max_iter):
        # tangents at a and b meet at the lower bound of f on [a, b]
        xc = (fb - fa + ga * a - gb * b) / (ga - gb)
        lb = fa + ga * (xc - a)
        gap = best[0] - lb
        if gap <= eps:
            return FirstStageResult([best[1]], best[0], lb, it + 2)
        m = (a + b) / 2
        fm, (gm,) = oracle([m])
        best = min(best, (fm, m))
        if gm == 0:
            return FirstStageResult([m], fm, fm, it + 3)
        if gm > 0:
            b, fb, gb = m, fm, gm
        else:
            a, fa, ga = m, fm, gm
    raise NonConvergenceError("iteration cap reached", gap)


def _kelley(sp, oracle, eps, max_iter) -> FirstStageResult:
    n1 = sp.n1
    P = sp.first_stage_polytope()
    x = list(solve_lp(P, [0] * n1, "max").point)
    cuts = []
    best = None
    lb = None
    for it in range(max_iter):
        f, g = oracle(x)
        if best is None or f < best[0]:
            best = (f, list(x))
        cuts.append((f, g, list(x)))
        # master: min theta s.t. theta >= f_k + g_k (x - x_k), Ax <= b
        rows = [(tuple(a) + (Fraction(0),), bi) for a, bi in zip(sp.A, sp.b)]
        for fk, gk, xk in cuts:
            const = fk - sum(gi * xi for gi, xi in zip(gk, xk))
            rows.append((tuple(gk) + (Fraction(-1),), -const))
        res = solve_lp(HPolytope(n1 + 1, tuple(rows)), [0] * n1 + [1], "min")
        if res.status != OPTIMAL:
            raise NonConvergenceError(f"master problem {res.status}")
        lb = res.value
        gap = best[0] - lb
        if gap <= eps:
            return FirstStageResult(best[1], best[0], lb, it + 1)
        x = list(res.point[:n1])
        # keep denominators small: snap to a dyadic grid fine enough that the
        # cut moves by less than eps / 2 (cuts stay valid at any point)
        gnorm = max(sum(abs(v) for v in gk) for _, gk, _ in cuts)
        step = eps / (2 * n1 * (1 + gnorm))
        bits = max(1, -math.floor(math.log2(step)))
        snapped = [Fraction(round(v * 2**bits), 2**bits) for v in x]
        if P.contains(snapped) and all(snapped != xk for _, _, xk in cuts):
            x = snapped
    raise NonConvergenceError("iteration cap reached", best[0] - lb)
