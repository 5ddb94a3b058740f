"""Polygon gadgets for independent-set counting and the reductions built on them.

For a graph on ``n`` vertices the regular ``2^n``-gon ``Q`` (vertices
``v_l`` at angles ``(2l+1) pi / 2^n`` with norm ``sec(pi/2^n)``, facet
midpoints ``w_l`` at angles ``(2l+2) pi / 2^n``) is described by an extended
formulation of ``n`` folding steps.  Each vertex carries a bit vector
``b^l`` (reflect or not at each fold) and hence a vertex subset
``S_l = {i : b^l_i = 0}``.  An edge formulation forbids reflection at the
edge's endpoints and cuts the corner triangle at every ``v_l`` with
``e <= S_l``; the intersection over all edges has area
``area(Q) - (2^n - #IS) * delta``.

All irrational quantities are interval enclosures built from dyadic
half-angle trigonometry.  Angles are also tracked exactly as integer
multiples of ``pi / 2^n`` so that every geometric decision has an
independent combinatorial cross-check.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .numerics import IntervalScalar, Polynomial, as_fraction, dyadic_trig, interpolate_univariate

IS = IntervalScalar
MAX_RETRIES = 16


class PrecisionError(ArithmeticError):
    """An interval sign could not be decided at the current precision."""


class GadgetConsistencyError(RuntimeError):
    """Two independent computations disagree; indicates a bug."""


class ProtocolError(RuntimeError):
    """An oracle answer is inconsistent with the convex first-stage problem."""


def default_bits(n: int) -> int:
    return 10 * n + 64


def _with_retries(fn, bits: int):
    for _ in range(MAX_RETRIES + 1):
        try:
            return fn(bits)
        except PrecisionError:
            bits *= 2
    raise PrecisionError(f"undecided after {MAX_RETRIES} precision doublings")


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``1..n``."""

    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("graphs need n >= 2")
        norm = set()
        for e in self.edges:
            i, j = sorted(int(v) for v in e)
            if i == j:
                raise ValueError(f"loop at vertex {i}")
            if not (1 <= i and j <= self.n):
                raise ValueError(f"edge {(i, j)} outside 1..{self.n}")
            norm.add((i, j))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        edges = [tuple(e) for e in edges]
        if len({tuple(sorted(e)) for e in edges}) != len(edges):
            raise ValueError("duplicate edge")
        return cls(n, frozenset(edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def with_edge(self, e) -> "Graph":
        return Graph(self.n, self.edges | {tuple(sorted(e))})


def count_independent_sets_brute(g: Graph) -> int:
    edges = [((1 << (i - 1)) | (1 << (j - 1))) for i, j in g.edges]
    return sum(1 for mask in range(1 << g.n) if all(mask & e != e for e in edges))


# ---------------------------------------------------------------------------
# trigonometry on multiples of pi / 2^n


class _Trig:
    """Enclosures of cos/sin of ``j pi / 2^n`` from the binary expansion of j."""

    def __init__(self, n: int, bits: int):
        self.n = n
        self.bits = bits
        self.base = [dyadic_trig(k, bits) for k in range(n + 1)]  # pi / 2^k
        self._cache: dict[int, tuple[IS, IS]] = {}

    def __call__(self, j: int) -> tuple[IS, IS]:
        j %= 2 ** (self.n + 1)
        hit = self._cache.get(j)
        if hit is not None:
            return hit
        c, s = IS.exact(1, self.bits), IS.exact(0, self.bits)
        for t in range(self.n + 1):
            if j >> t & 1:
                ck, sk = self.base[self.n - t]
                c, s = c * ck - s * sk, s * ck + c * sk
        self._cache[j] = (c, s)
        return c, s

    def fold(self, i: int) -> tuple[IS, IS]:
        """(cos, sin) of the i-th folding angle ``pi / 2^(i-1)``."""
        return self.base[i - 1]


def _rotate(p, cs):
    (y, z), (c, s) = p, cs
    return (c * y + s * z, -s * y + c * z)


def _exact_bits(ell: int, n: int) -> tuple[int, ...]:
    """Fold bits from integer angle bookkeeping (units of pi / 2^n)."""
    full = 2 ** (n + 1)
    j = 2 * ell + 1
    out = []
    for i in range(1, n + 1):
        j = (j - 2 ** (n - i + 1)) % full
        neg = j > 2**n
        out.append(int(neg))
        if neg:
            j = (-j) % full
    if j != 1:
        raise GadgetConsistencyError(f"vertex {ell} does not fold onto v_0")
    return tuple(out)


def _sign(x: IS) -> int:
    s = x.sign()
    if s is None or s == 0:
        raise PrecisionError("undecided sign")
    return s


# ---------------------------------------------------------------------------
# gadget


@dataclass(frozen=True)
class FormulationRow:
    coeffs: tuple[IS, ...]
    relation: str  # "eq" or "le"
    rhs: IS


@dataclass(frozen=True)
class ExtendedFormulation:
    """Rows over ``(y_1..y_{n+1}, z_1..z_{n+1})``."""

    num_vars: int
    rows: tuple[FormulationRow, ...]

    def residuals(self, point: Sequence[IS]) -> list[IS]:
        out = []
        for r in self.rows:
            acc = -r.rhs
            for a, v in zip(r.coeffs, point):
                if a.lo != 0 or a.hi != 0:
                    acc = acc + a * v
            out.append(acc)
        return out

    def admits(self, point: Sequence[IS]) -> bool:
        """True unless some row is certainly violated at the enclosed point."""
        for r, res in zip(self.rows, self.residuals(point)):
            if r.relation == "eq" and not res.contains(0):
                return False
            if r.relation == "le" and res.lo > 0:
                return False
        return True


@dataclass
class Gadget:
    graph: Graph
    precision_bits: int
    vertices: list[tuple[IS, IS]]
    midpoints: list[tuple[IS, IS]]
    formulations: dict
    delta: IS
    polygon_area: IS
    bit_vectors: list[tuple[int, ...]]
    subsets: list[frozenset]
    trig: _Trig = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def k(self) -> int:
        return 2**self.graph.n

    def formulation(self, e=None) -> ExtendedFormulation:
        return self.formulations[frozenset() if e is None else tuple(sorted(e))]


def _formulation(trig: _Trig, n: int, e: tuple[int, ...]) -> ExtendedFormulation:
    bits = trig.bits
    zero, one = IS.exact(0, bits), IS.exact(1, bits)
    nv = 2 * (n + 1)
    Y = lambda i: i - 1  # noqa: E731
    Z = lambda i: n + i  # noqa: E731

    def row(entries, rel, rhs):
        coeffs = [zero] * nv
        for idx, v in entries.items():
            coeffs[idx] = v
        return FormulationRow(tuple(coeffs), rel, rhs)

    rows = []
    for i in range(1, n + 1):
        c, s = trig.fold(i)
        rows.append(row({Y(i + 1): one, Y(i): -c, Z(i): -s}, "eq", zero))
        if i in e:
            rows.append(row({Z(i + 1): one, Y(i): s, Z(i): -c}, "eq", zero))
        else:
            rows.append(row({Z(i + 1): -one, Y(i): -s, Z(i): c}, "le", zero))
            rows.append(row({Z(i + 1): -one, Y(i): s, Z(i): -c}, "le", zero))
    if e:
        c, s = trig.base[n]
        rows.append(row({Y(n + 1): c, Z(n + 1): s}, "le", c))
    else:
        c, s = trig.base[n - 1]
        rows.append(row({Y(n + 1): one}, "le", one))
        rows.append(row({Y(n + 1): c, Z(n + 1): s}, "le", one))
    return ExtendedFormulation(nv, tuple(rows))


def _fold_vertex(trig: _Trig, n: int, v) -> tuple[tuple[int, ...], tuple[IS, IS]]:
    cur = v
    out = []
    for i in range(1, n + 1):
        cur = _rotate(cur, trig.fold(i))
        neg = _sign(cur[1]) < 0
        out.append(int(neg))
        if neg:
            cur = (cur[0], -cur[1])
    return tuple(out), cur


def _build(g: Graph, bits: int) -> Gadget:
    n = g.n
    k = 2**n
    trig = _Trig(n, bits)
    c1, s1 = trig.base[n]
    sec = c1.reciprocal()
    vertices = []
    midpoints = []
    for ell in range(k):
        c, s = trig(2 * ell + 1)
        vertices.append((sec * c, sec * s))
        midpoints.append(trig(2 * ell + 2))
    bit_vectors = []
    v0 = vertices[0]
    for ell in range(k):
        b, end = _fold_vertex(trig, n, vertices[ell])
        if b != _exact_bits(ell, n):
            raise GadgetConsistencyError(f"fold bits of vertex {ell} disagree")
        if not (end[0].overlaps(v0[0]) and end[1].overlaps(v0[1])):
            raise GadgetConsistencyError(f"vertex {ell} does not fold onto v_0")
        bit_vectors.append(b)
    subsets = [frozenset(i + 1 for i, bi in enumerate(b) if bi == 0) for b in bit_vectors]
    forms = {frozenset(): _formulation(trig, n, ())}
    for e in g.sorted_edges():
        forms[e] = _formulation(trig, n, e)
    tan = s1 / c1
    c2, _ = trig.base[n - 1]
    delta = tan * (1 - c2) / 2
    area = tan * k
    return Gadget(g, bits, vertices, midpoints, forms, delta, area, bit_vectors, subsets, trig)


def build_gadget(g: Graph, precision_bits: int | None = None) -> Gadget:
    return _with_retries(lambda b: _build(g, b), precision_bits or default_bits(g.n))


def bit_vector(ell: int, n: int, precision_bits: int | None = None) -> tuple[int, ...]:
    """Fold bits ``b^l`` of vertex ``v_l``: bit i is 1 iff the vertex has a
    negative second entry after the i-th rotation (and is then reflected)."""
    if n < 2:
        raise ValueError("n must be at least 2 (the polygon is a 2^n-gon)")
    if not 0 <= ell < 2**n:
        raise ValueError("vertex index out of range")

    def run(bits):
        trig = _Trig(n, bits)
        c1, _ = trig.base[n]
        sec = c1.reciprocal()
        c, s = trig(2 * ell + 1)
        b, _ = _fold_vertex(trig, n, (sec * c, sec * s))
        return b

    b = _with_retries(run, precision_bits or default_bits(n))
    if b != _exact_bits(ell, n):
        raise GadgetConsistencyError(f"fold bits of vertex {ell} disagree")
    return b


# ---------------------------------------------------------------------------
# trajectories and cuts


def trajectory(gadget: Gadget, start, start_angle: int, e=()) -> list[tuple[IS, IS]]:
    """Lift of ``start`` through the folds: rotate, then reflect iff the
    fold is not forced (``i not in e``) and the second entry is negative.

    ``start_angle`` (units of pi / 2^n) decides exact zeros, which occur
    for midpoints; any other decision must be certified by the intervals.
    """
    n = gadget.n
    full = 2 ** (n + 1)
    j = start_angle % full
    cur = start
    pts = [cur]
    for i in range(1, n + 1):
        cur = _rotate(cur, gadget.trig.fold(i))
        j = (j - 2 ** (n - i + 1)) % full
        exact_zero = j % 2**n == 0
        if i not in e:
            if exact_zero:
                if not cur[1].contains(0):
                    raise GadgetConsistencyError("trajectory left the exact angle")
                neg = False
            else:
                neg = _sign(cur[1]) < 0
                if neg != (j > 2**n):
                    raise GadgetConsistencyError("trajectory sign disagrees with exact angle")
            if neg:
                cur = (cur[0], -cur[1])
                j = (-j) % full
        pts.append(cur)
    return pts


def lifted_point(pts: Sequence[tuple[IS, IS]]) -> list[IS]:
    return [p[0] for p in pts] + [p[1] for p in pts]


def cut_indicator(gadget: Gadget, e, ell: int) -> bool:
    """True iff vertex ``v_l`` is cut off by the formulation of edge ``e``.

    Decided combinatorially (``e <= S_l``) and geometrically (the forced
    trajectory from ``v_l`` violates the terminal row with certified sign);
    the two must agree.
    """
    e = tuple(sorted(e))
    if e not in gadget.graph.edges:
        raise ValueError(f"{e} is not an edge of the graph")
    combinatorial = set(e) <= gadget.subsets[ell]
    pts = trajectory(gadget, gadget.vertices[ell], 2 * ell + 1, e)
    y, z = pts[-1]
    c, s = gadget.trig.base[gadget.n]
    geometric = _sign(c * y + s * z - c) > 0
    if geometric != combinatorial:
        raise GadgetConsistencyError(f"cut test disagrees for edge {e}, vertex {ell}")
    return combinatorial


def cut_vertices(gadget: Gadget) -> list[int]:
    return [
        ell for ell in range(gadget.k)
        if any(cut_indicator(gadget, e, ell) for e in gadget.graph.sorted_edges())
    ]


@dataclass
class AreaResult:
    area: IS
    cut: list[int]
    gadget: Gadget


def _area(g: Graph, bits: int) -> AreaResult:
    gadget = _build(g, bits)
    cut = cut_vertices(gadget)
    area = gadget.polygon_area - gadget.delta * len(cut)
    if area.width >= Fraction(1, 2 ** (3 * g.n - 2)):
        raise PrecisionError("area enclosure too wide")
    return AreaResult(area, cut, gadget)


def area_with_details(g: Graph, precision_bits: int | None = None) -> AreaResult:
    return _with_retries(lambda b: _area(g, b), precision_bits or default_bits(g.n))


def area_via_gadget(g: Graph, precision_bits: int | None = None) -> IS:
    """Certified enclosure of the area of the projected polygon."""
    return area_with_details(g, precision_bits).area


def count_is(g: Graph, mode: str = "area", max_n: int = 10, precision_bits: int | None = None) -> int:
    """Number of independent sets (including the empty set)."""
    if mode == "brute":
        if g.n > 30:
            raise ValueError("brute force limited to n <= 30")
        return count_independent_sets_brute(g)
    if mode != "area":
        raise ValueError(f"unknown mode {mode!r}")
    if g.n > max_n:
        raise ValueError(f"area mode limited to n <= {max_n}")
    res = area_with_details(g, precision_bits)
    gad = res.gadget
    est = 2**g.n - (gad.polygon_area - res.area) / gad.delta
    lo, hi = math.ceil(est.lo), math.floor(est.hi)
    if lo != hi:
        raise PrecisionError(f"count interval [{float(est.lo)}, {float(est.hi)}] is not a unique integer")
    return lo


# ---------------------------------------------------------------------------
# envelope expectations from the H-description


@dataclass(frozen=True)
class _Line:
    angle: int  # normal direction in units of pi / 2^n
    ay: IS
    az: IS

    def at(self, x: IS) -> IS:
        return (1 - self.ay * x) / self.az


def polygon_rows(gadget: Gadget, cut: Sequence[int]) -> list[_Line]:
    """Facet rows ``w_l . p <= 1`` and chord rows ``v_l . p <= 1`` (cut l)."""
    rows = [_Line(2 * ell + 2, *gadget.midpoints[ell]) for ell in range(gadget.k)]
    rows += [_Line(2 * ell + 1, *gadget.vertices[ell]) for ell in cut]
    return rows


def _breakpoint(a: _Line, b: _Line) -> IS:
    return (a.az - b.az) / (b.ay * a.az - a.ay * b.az)


def _upper_integral(lines: list[_Line], k: int, bits: int) -> IS:
    """int_{-1}^{1} min over lines with a_z > 0 of the line's z-value."""
    up = sorted((ln for ln in lines if 0 < ln.angle % (2 * k) < k), key=lambda ln: -(ln.angle % (2 * k)))
    stack: list[_Line] = []
    bps: list[IS] = []
    tie_width = Fraction(1, 2 ** (bits // 2))
    for ln in up:
        while len(stack) >= 2:
            new = _breakpoint(stack[-1], ln)
            diff = new - bps[-1]
            s = diff.sign()
            if s is not None and s < 0:
                stack.pop()
                bps.pop()
                continue
            if s is None and diff.width > tie_width:
                raise PrecisionError("breakpoint order undecided")
            break
        if stack:
            bps.append(_breakpoint(stack[-1], ln))
        stack.append(ln)
    lo, hi = Fraction(-1), Fraction(1)
    xs = [IS.exact(lo, bits)]
    vals = [IS.min(*(ln.at(xs[0]) for ln in stack))]
    for j, bp in enumerate(bps):
        if bp.hi <= lo or bp.lo >= hi:
            continue
        x = IS(max(bp.lo, lo), min(bp.hi, hi), bits)
        xs.append(x)
        # bps[j] joins stack[j] and stack[j + 1]; one extra neighbour each
        # side covers near-ties left undecided during construction
        vals.append(IS.min(*(ln.at(x) for ln in stack[max(0, j - 1):j + 3])))
    xs.append(IS.exact(hi, bits))
    vals.append(IS.min(*(ln.at(xs[-1]) for ln in stack)))
    total = IS.exact(0, bits)
    for i in range(len(xs) - 1):
        total = total + (xs[i + 1] - xs[i]) * (vals[i] + vals[i + 1]) / 2
    return total


def _mirror(ln: _Line, k: int) -> _Line:
    return _Line((2 * k - ln.angle) % (2 * k), ln.ay, -ln.az)


@dataclass
class Envelope:
    emax: IS
    emin: IS
    area: IS


def _envelope(g: Graph, bits: int) -> Envelope:
    res = _area(g, bits)
    gad = res.gadget
    rows = polygon_rows(gad, res.cut)
    emax = _upper_integral(rows, gad.k, bits) / 2
    emin = -_upper_integral([_mirror(r, gad.k) for r in rows], gad.k, bits) / 2
    if not ((emax - emin) * 2).overlaps(res.area):
        raise GadgetConsistencyError("area differs from 2 (Emax - Emin)")
    return Envelope(emax, emin, res.area)


def envelope_expectations(g: Graph, precision_bits: int | None = None) -> Envelope:
    """Enclosures of ``E[max z]`` and ``E[min z]`` over the polygon section at
    ``y = xi``, ``xi ~ U[-1, 1]``, checked against the gadget area."""
    return _with_retries(lambda b: _envelope(g, b), precision_bits or default_bits(g.n))


def envelope_expectation(g: Graph, precision_bits: int | None = None) -> IS:
    return envelope_expectations(g, precision_bits).emax


def polygon_oracle(g: Graph, dps: int = 60):
    """Independent high-precision floating evaluation (mpmath) of
    ``(Emax, Emin, area)`` from the polygon's vertex list, which is built
    combinatorially: ``v_l`` is replaced by ``w_{l-1}, w_l`` when some edge
    lies inside ``S_l``."""
    import mpmath

    n, k = g.n, 2**g.n
    with mpmath.workdps(dps):
        sec = 1 / mpmath.cos(mpmath.pi / k)
        pts = []

        def add(key, p):
            if not pts or pts[-1][0] != key:
                pts.append((key, p))

        for ell in range(k):
            b = _exact_bits(ell, n)
            s = {i + 1 for i, bi in enumerate(b) if bi == 0}
            if any(set(e) <= s for e in g.edges):
                for m in (ell - 1, ell):
                    a = (2 * (m % k) + 2) * mpmath.pi / k
                    add(("w", m % k), (mpmath.cos(a), mpmath.sin(a)))
            else:
                a = (2 * ell + 1) * mpmath.pi / k
                add(("v", ell), (sec * mpmath.cos(a), sec * mpmath.sin(a)))
        if pts[0][0] == pts[-1][0]:
            pts.pop()
        poly = [p for _, p in pts]

        def shoelace(P):
            return sum(P[i][0] * P[(i + 1) % len(P)][1] - P[(i + 1) % len(P)][0] * P[i][1] for i in range(len(P))) / 2

        def clip_upper(P, sign):
            out = []
            for i in range(len(P)):
                a, b = P[i], P[(i + 1) % len(P)]
                ina, inb = sign * a[1] >= 0, sign * b[1] >= 0
                if ina:
                    out.append(a)
                if ina != inb:
                    t = a[1] / (a[1] - b[1])
                    out.append((a[0] + t * (b[0] - a[0]), mpmath.mpf(0)))
            return out

        area = shoelace(poly)
        emax = shoelace(clip_upper(poly, 1)) / 2
        emin = -shoelace(clip_upper(poly, -1)) / 2
        return emax, emin, area


# ---------------------------------------------------------------------------
# d = 1 stochastic program


def _rationalize(x: IS, bits: int) -> tuple[Fraction, Fraction]:
    r = Fraction(round(x.mid * 2**bits), 2**bits)
    return r, abs(r - x.mid) + x.width / 2


def sslp_from_graph(g: Graph, precision_bits: int = 40, gadget: Gadget | None = None):
    """Stochastic program with ``d = 1``, ``n1 = 1`` whose recourse is
    ``Q(x, xi) = -max{z_1 : (x xi, z_1) in x P_G}``.

    All formulations of the polygon share ``(y_1, z_1)``; ``y_1 = x xi`` and
    the constant right-hand sides scale with ``x``, so both move into
    ``T_xi``.  Free variables are split, inequality rows get slacks.  Gadget
    coefficients are rounded to ``precision_bits`` fractional bits; the
    rounding radius and a small outward margin on the terminal rows are
    recorded in ``metadata``.  ``E[Q(x, xi)] = x E[Q(1, xi)]``.
    """
    from .recourse import StochasticProgram

    gad = gadget or build_gadget(g)
    n = g.n
    margin = Fraction(1, 2 ** max(8, precision_bits - 2 * n - 4))
    radius = Fraction(0)
    keys = [frozenset()] + g.sorted_edges()
    nf = len(keys)
    # columns: z1+, z1-, then per formulation 4n split columns, then slacks
    own = lambda f, idx, sign: 2 + f * 4 * n + 2 * idx + sign  # noqa: E731
    W, T0, T1 = [], [], []
    slack_rows = []
    for f, key in enumerate(keys):
        form = gad.formulations[key]
        terminal_start = len(form.rows) - (1 if key else 2)
        for ri, row in enumerate(form.rows):
            entries: dict[int, Fraction] = {}
            y1 = Fraction(0)
            for v, a in enumerate(row.coeffs):
                if a.lo == 0 and a.hi == 0:
                    continue
                r, rad = _rationalize(a, precision_bits)
                radius = max(radius, rad)
                if v == 0:
                    y1 = r
                elif v == n + 1:
                    entries[0] = entries.get(0, 0) + r
                    entries[1] = entries.get(1, 0) - r
                else:
                    idx = v - 1 if v <= n else v - 2  # y_2..y_{n+1}, z_2..z_{n+1}
                    entries[own(f, idx, 0)] = r
                    entries[own(f, idx, 1)] = -r
            rhs, rad = _rationalize(row.rhs, precision_bits)
            radius = max(radius, rad)
            if ri >= terminal_start:
                rhs += margin
            W.append(entries)
            T0.append(-rhs)
            T1.append(y1)
            slack_rows.append(row.relation == "le")
    base = 2 + nf * 4 * n
    n2 = base + sum(slack_rows)
    Wm = []
    s = base
    for entries, le in zip(W, slack_rows):
        row = [Fraction(0)] * n2
        for j, v in entries.items():
            row[j] = v
        if le:
            row[s] = Fraction(1)
            s += 1
        Wm.append(row)
    m2 = len(Wm)
    q0 = [Fraction(0)] * n2
    q0[0], q0[1] = Fraction(-1), Fraction(1)
    return StochasticProgram(
        c=[0], A=[[1], [-1]], b=[1, 0],
        W=Wm, q0=q0, Qmat=[[0]] * n2,
        T0=[[v] for v in T0], Tk=[[[v] for v in T1]],
        h0=[0] * m2, Hmat=[[0]] * m2,
        l=[-1], u=[1],
        metadata={
            "graph_n": n,
            "edges": [list(e) for e in g.sorted_edges()],
            "precision_bits": precision_bits,
            "rounding_radius": radius,
            "terminal_margin": margin,
        },
    )


# ---------------------------------------------------------------------------
# bisection on the first-stage cost


Oracle = Callable[["object"], tuple[Fraction, Fraction]]


def _linear_oracle(slope_at_one: Fraction, eps: Fraction) -> Oracle:
    from .recourse import solve_first_stage

    def oracle(sp):
        res = solve_first_stage(sp, eps, evaluate=lambda x: (x[0] * slope_at_one, [slope_at_one]))
        return res.x[0], res.value

    return oracle


def sslp_oracle(g: Graph, precision_bits: int = 40) -> Oracle:
    """First-stage solver for ``sslp_from_graph`` instances.

    ``E[Q(1, xi)]`` is computed once, exactly, by the parametric d = 1 walk;
    exact positive homogeneity in ``x`` gives the rest.  Practical for
    n <= 3 (the LPs have a few hundred Fraction entries per row).
    """
    from .recourse import expected_recourse_1d

    sp = sslp_from_graph(g, precision_bits)
    f1 = expected_recourse_1d(sp, [1], method="parametric")
    return _linear_oracle(f1, Fraction(1, 2 ** (3 * g.n + 8)))


def polygon_first_stage_oracle(g: Graph, dps: int = 80) -> Oracle:
    """Same protocol with ``E[Q(1, xi)] = -Emax`` from the mpmath polygon
    oracle (for graphs where the exact LP walk is too slow)."""
    import mpmath

    emax, _, _ = polygon_oracle(g, dps)
    with mpmath.workdps(dps):
        m, e = mpmath.frexp(emax)
        f1 = -Fraction(int(mpmath.ldexp(m, dps * 4)), 2 ** (dps * 4 - int(e)))
    return _linear_oracle(f1, Fraction(1, 2 ** (3 * g.n + 8)))


@dataclass
class BisectionResult:
    interval: IS
    calls: int


def bisection_expectation(g: Graph, oracle: Oracle, base=None) -> BisectionResult:
    """Enclose ``E[max z_1]`` (which lies in [1/2, 1]) by bisection on the
    first-stage cost ``c``: the optimum of ``min c x + E[Q(x, xi)]`` over
    ``[0, 1]`` sits at ``x = 0`` exactly when ``c >= E[max z_1]``.
    Uses ``3n - 4`` oracle calls for a width of ``2^-(3n-3)``."""
    if base is None:
        base = sslp_from_graph(g, gadget=None)
    lo, hi = Fraction(1, 2), Fraction(1)
    calls = 0
    for _ in range(3 * g.n - 4):
        c = (lo + hi) / 2
        x, value = oracle(dataclasses.replace(base, c=[c]))
        calls += 1
        x, value = as_fraction(x), as_fraction(value)
        if value > 0 or not (0 <= x <= 1) or (x == 0 and value != 0):
            raise ProtocolError(f"oracle answer (x={x}, value={value}) at c={c} is inconsistent")
        if x == 0:
            hi = c
        else:
            lo = c
    return BisectionResult(IS(lo, hi, 3 * g.n + 8), calls)


# ---------------------------------------------------------------------------
# volume from expected recourse


@dataclass
class RecourseVolume:
    volume: Fraction
    p: Polynomial
    samples: list[tuple[Fraction, Fraction]]
    tau: Fraction


def first_wall_crossing(A: Sequence[Sequence[int]], b: Sequence, direction: Sequence) -> Fraction:
    """Smallest ``t > 0`` where ``b + t direction`` meets a wall of the
    volume's chamber arrangement (1 if there is none below 1)."""
    from .volume_dp import chamber_walls

    d = len(A[0])
    tau = Fraction(1)
    for c, z in chamber_walls(A, d):
        ce = sum(ci * di for ci, di in zip(c, direction))
        if ce:
            t = (z - sum(ci * as_fraction(bi) for ci, bi in zip(c, b))) / ce
            if 0 < t < tau:
                tau = t
    return tau


def volume_via_recourse(A: Sequence[Sequence[int]], b: Sequence, x=1, backend: str = "auto") -> RecourseVolume:
    """``vol{xi in [0,1]^d : A xi <= b}`` from expected recourse values.

    ``p(t) = E[Q_t(x, xi)]`` with ``Q_t = x max(0, max_j a_j.xi - b_j - t)``
    satisfies ``p'(t) = (vol P_t - 1) x`` where
    ``P_t = {xi in [0,1]^d : A xi <= b + t}``.  On ``[0, tau]``
    before the first chamber wall, ``vol P_t`` is one polynomial of degree
    <= d, so ``d + 2`` samples determine ``p``; one more is held out.
    """
    from .generators import threshold_family
    from .recourse import expected_recourse

    x = as_fraction(x)
    if x <= 0:
        raise ValueError("x must be positive")
    A = [[int(v) for v in row] for row in A]
    b = [as_fraction(v) for v in b]
    m, d = len(A), len(A[0])
    tau = first_wall_crossing(A, b, [1] * m)
    ts = [tau * Fraction(j + 1, d + 4) for j in range(d + 3)]
    samples = []
    for t in ts:
        sp = threshold_family(A, b, t, x_max=max(1, x))
        samples.append((t, expected_recourse(sp, [x], backend)))
    p = interpolate_univariate(samples[:-1])
    held_t, held_v = samples[-1]
    if p.total_degree() > d + 1 or p.evaluate((held_t,)) != held_v:
        raise GadgetConsistencyError("expected recourse is not a polynomial of degree <= d+1 in t")
    slope = p.derivative(0).evaluate((Fraction(0),))
    return RecourseVolume(slope / x + 1, p, samples, tau)
