"""Exact rationals, outward-rounded dyadic intervals and sparse polynomials.

Rationals are :class:`fractions.Fraction` throughout.  Interval endpoints are
dyadic rationals (binary floats of unbounded exponent) rounded outward to a
requested number of significant bits, so every interval operation encloses
the exact real result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

Rational = Fraction
Exponent = tuple[int, ...]


class IllPosedError(ValueError):
    """Interpolation or fitting data that do not determine a unique polynomial."""


def as_fraction(x) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings; floats are rejected."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip()
        if "/" in s:
            p, q = s.split("/", 1)
            p, q = int(p), int(q)
            if q == 0:
                raise ZeroDivisionError(f"zero denominator in {x!r}")
            return Fraction(p, q)
        return Fraction(int(s))
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# dyadic rounding


def _ulp_exponent(x: Fraction, bits: int) -> int:
    """Exponent e such that rounding to multiples of 2**e keeps ``bits``
    significant bits relative to max(1, |x|)."""
    a = abs(x)
    if a < 1:
        return -bits
    # floor(log2(a)) + 1 without floats
    e = a.numerator.bit_length() - a.denominator.bit_length()
    if Fraction(2) ** e <= a:
        e += 1
    return e - bits


def round_down(x: Fraction, bits: int) -> Fraction:
    e = _ulp_exponent(x, bits)
    if e >= 0:
        return Fraction(math.floor(x / (1 << e)) << e)
    scale = 1 << -e
    return Fraction(math.floor(x * scale), scale)


def round_up(x: Fraction, bits: int) -> Fraction:
    return -round_down(-x, bits)


def _isqrt_floor(x: Fraction, bits: int) -> Fraction:
    """Largest multiple of 2**-(bits+k) not exceeding sqrt(x), x >= 0."""
    if x <= 0:
        return Fraction(0)
    shift = bits + 4
    # floor(sqrt(x) * 2**shift) = isqrt(floor(x * 4**shift))
    n = math.floor(x * (1 << (2 * shift)))
    return Fraction(math.isqrt(n), 1 << shift)


def _isqrt_ceil(x: Fraction, bits: int) -> Fraction:
    if x <= 0:
        return Fraction(0)
    shift = bits + 4
    n = math.ceil(x * (1 << (2 * shift)))
    r = math.isqrt(n)
    if r * r < n:
        r += 1
    return Fraction(r, 1 << shift)


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class IntervalScalar:
    """Closed interval ``[lo, hi]`` with dyadic endpoints.

    Arithmetic rounds outward to ``bits`` significant bits, so the exact
    result of the corresponding real operation is always enclosed.
    """

    lo: Fraction
    hi: Fraction
    bits: int = 64

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def exact(cls, x, bits: int = 64) -> "IntervalScalar":
        x = as_fraction(x)
        return cls(round_down(x, bits), round_up(x, bits), bits)

    @classmethod
    def hull(cls, lo, hi, bits: int) -> "IntervalScalar":
        return cls(round_down(Fraction(lo), bits), round_up(Fraction(hi), bits), bits)

    # -- queries --------------------------------------------------------
    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = as_fraction(x) if not isinstance(x, IntervalScalar) else x
        if isinstance(x, IntervalScalar):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def contains_real(self, x: float, slack: float = 0.0) -> bool:
        return float(self.lo) - slack <= x <= float(self.hi) + slack

    def overlaps(self, other: "IntervalScalar") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def certainly_positive(self) -> bool:
        return self.lo > 0

    def certainly_negative(self) -> bool:
        return self.hi < 0

    def sign(self) -> int | None:
        """+1, -1, 0 (degenerate zero) or None when undecided."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        if self.lo == self.hi == 0:
            return 0
        return None

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other) -> "IntervalScalar":
        if isinstance(other, IntervalScalar):
            return other
        return IntervalScalar.exact(other, self.bits)

    def _bits(self, other: "IntervalScalar") -> int:
        return max(self.bits, other.bits)

    def __neg__(self):
        return IntervalScalar(-self.hi, -self.lo, self.bits)

    def __add__(self, other):
        o = self._coerce(other)
        b = self._bits(o)
        return IntervalScalar.hull(self.lo + o.lo, self.hi + o.hi, b)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return IntervalScalar.hull(min(ps), max(ps), self._bits(o))

    __rmul__ = __mul__

    def reciprocal(self) -> "IntervalScalar":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("interval contains zero")
        return IntervalScalar.hull(1 / self.hi, 1 / self.lo, self.bits)

    def __truediv__(self, other):
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def sqrt(self) -> "IntervalScalar":
        if self.hi < 0:
            raise ValueError("square root of a negative interval")
        lo = _isqrt_floor(max(self.lo, Fraction(0)), self.bits)
        hi = _isqrt_ceil(self.hi, self.bits)
        return IntervalScalar.hull(lo, hi, self.bits)

    def square(self) -> "IntervalScalar":
        if self.lo >= 0:
            return IntervalScalar.hull(self.lo**2, self.hi**2, self.bits)
        if self.hi <= 0:
            return IntervalScalar.hull(self.hi**2, self.lo**2, self.bits)
        return IntervalScalar.hull(0, max(self.lo**2, self.hi**2), self.bits)

    @staticmethod
    def min(*xs: "IntervalScalar") -> "IntervalScalar":
        return IntervalScalar(min(x.lo for x in xs), min(x.hi for x in xs), max(x.bits for x in xs))

    @staticmethod
    def max(*xs: "IntervalScalar") -> "IntervalScalar":
        return IntervalScalar(max(x.lo for x in xs), max(x.hi for x in xs), max(x.bits for x in xs))

    def to_json(self) -> dict:
        return {"lo": _decimal_down(self.lo), "hi": _decimal_up(self.hi), "bits": self.bits}

    def __repr__(self):
        return f"IntervalScalar([{float(self.lo):.17g}, {float(self.hi):.17g}], bits={self.bits})"


def _decimal_digits(x: Fraction) -> int:
    return max(20, x.denominator.bit_length() * 30 // 100 + 2)


def _decimal_down(x: Fraction) -> str:
    digits = _decimal_digits(x)
    scaled = math.floor(x * 10**digits)
    return _fmt_decimal(scaled, digits)


def _decimal_up(x: Fraction) -> str:
    digits = _decimal_digits(x)
    scaled = math.ceil(x * 10**digits)
    return _fmt_decimal(scaled, digits)


def _fmt_decimal(scaled: int, digits: int) -> str:
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}".rstrip("0").rstrip(".") or "0"


def dyadic_trig(k: int, precision_bits: int) -> tuple[IntervalScalar, IntervalScalar]:
    """Enclosures of ``(cos(pi/2**k), sin(pi/2**k))`` with widths <= 2**-precision_bits.

    Uses the half-angle recurrence from cos(pi) = -1.  The sine is taken
    as sin(t)/(2 cos(t/2)) once the angle is acute, which avoids the
    cancellation in sqrt((1 - cos)/2).
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    target = Fraction(1, 1 << precision_bits)
    work = precision_bits + 2 * k + 16
    while True:
        c = IntervalScalar.exact(-1, work)
        s = IntervalScalar.exact(0, work)
        for j in range(1, k + 1):
            c_half = ((c + 1) / 2).sqrt()
            if j == 1:
                s_half = ((1 - c) / 2).sqrt()
            else:
                s_half = s / (2 * c_half)
            c, s = c_half, s_half
        # clip to the known range [-1, 1] / [0, 1]
        c = IntervalScalar(max(c.lo, Fraction(-1)), min(c.hi, Fraction(1)), precision_bits)
        s = IntervalScalar(max(s.lo, Fraction(0)), min(s.hi, Fraction(1)), precision_bits)
        if c.width <= target and s.width <= target:
            return c, s
        work *= 2


# ---------------------------------------------------------------------------
# polynomials


class Polynomial:
    """Sparse multivariate polynomial with Fraction coefficients.

    ``terms`` maps exponent tuples to non-zero coefficients.  Instances are
    treated as immutable.
    """

    __slots__ = ("num_vars", "terms", "_hash")

    def __init__(self, num_vars: int, terms: Mapping[Exponent, Fraction] | None = None):
        self.num_vars = num_vars
        clean: dict[Exponent, Fraction] = {}
        for e, c in (terms or {}).items():
            if len(e) != num_vars:
                raise ValueError(f"exponent {e} does not match {num_vars} variables")
            c = Fraction(c)
            if c:
                clean[tuple(e)] = c
        self.terms = clean
        self._hash = None

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, num_vars: int) -> "Polynomial":
        return cls(num_vars)

    @classmethod
    def constant(cls, num_vars: int, c) -> "Polynomial":
        return cls(num_vars, {(0,) * num_vars: Fraction(c)})

    @classmethod
    def variable(cls, num_vars: int, i: int) -> "Polynomial":
        e = [0] * num_vars
        e[i] = 1
        return cls(num_vars, {tuple(e): Fraction(1)})

    @classmethod
    def affine(cls, coeffs: Sequence, const=0) -> "Polynomial":
        """``const + sum_i coeffs[i] * x_i``."""
        n = len(coeffs)
        terms: dict[Exponent, Fraction] = {(0,) * n: Fraction(const)}
        for i, a in enumerate(coeffs):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = Fraction(a)
        return cls(n, terms)

    @classmethod
    def univariate(cls, coeffs: Sequence) -> "Polynomial":
        """From ascending coefficients ``c0 + c1 t + c2 t**2 + ...``."""
        return cls(1, {(i,): Fraction(c) for i, c in enumerate(coeffs)})

    # -- queries --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=0)

    def coefficient(self, exponent: Exponent) -> Fraction:
        return self.terms.get(tuple(exponent), Fraction(0))

    def coefficients(self) -> list[Fraction]:
        """Ascending coefficient list of a univariate polynomial."""
        if self.num_vars != 1:
            raise ValueError("coefficients() needs a univariate polynomial")
        deg = self.total_degree()
        return [self.coefficient((i,)) for i in range(deg + 1)]

    def canonical(self) -> tuple:
        return (self.num_vars, tuple(sorted(self.terms.items())))

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.num_vars == other.num_vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(self.num_vars, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.canonical())
        return self._hash

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(
                f"x{i}" if p == 1 else f"x{i}^{p}" for i, p in enumerate(e) if p
            )
            parts.append(f"{c}" if not mono else (mono if c == 1 else f"{c}*{mono}"))
        return "Polynomial(" + " + ".join(parts) + ")"

    # -- arithmetic -----------------------------------------------------
    def _lift(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.num_vars != self.num_vars:
                raise ValueError("polynomials over different variable counts")
            return other
        return Polynomial.constant(self.num_vars, other)

    def __add__(self, other):
        o = self._lift(other)
        terms = dict(self.terms)
        for e, c in o.terms.items():
            terms[e] = terms.get(e, 0) + c
        return Polynomial(self.num_vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.num_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = Fraction(other)
            return Polynomial(self.num_vars, {e: v * c for e, v in self.terms.items()})
        o = self._lift(other)
        terms: dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return Polynomial(self.num_vars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial.constant(self.num_vars, 1)
        for _ in range(k):
            out = out * self
        return out

    # -- evaluation and calculus -----------------------------------------
    def __call__(self, *point):
        if len(point) == 1 and isinstance(point[0], (list, tuple)):
            point = tuple(point[0])
        return self.evaluate(point)

    def evaluate(self, point: Sequence) -> Fraction:
        if len(point) != self.num_vars:
            raise ValueError(f"expected {self.num_vars} coordinates, got {len(point)}")
        pt = [Fraction(p) for p in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for x, p in zip(pt, e):
                if p:
                    v *= x**p
            total += v
        return total

    def substitute(self, images: Sequence["Polynomial"]) -> "Polynomial":
        """Compose: replace variable i by ``images[i]`` (all over one ring)."""
        if len(images) != self.num_vars:
            raise ValueError("one image per variable required")
        if not images:
            return self
        nv = images[0].num_vars
        powers: list[dict[int, Polynomial]] = [{0: Polynomial.constant(nv, 1)} for _ in images]

        def pw(i, p):
            cache = powers[i]
            if p not in cache:
                cache[p] = pw(i, p - 1) * images[i]
            return cache[p]

        out = Polynomial.zero(nv)
        acc: dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            term = Polynomial.constant(nv, c)
            for i, p in enumerate(e):
                if p:
                    term = term * pw(i, p)
            for te, tc in term.terms.items():
                acc[te] = acc.get(te, 0) + tc
        out = Polynomial(nv, acc)
        return out

    def derivative(self, i: int = 0) -> "Polynomial":
        terms: dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                terms[tuple(ne)] = terms.get(tuple(ne), 0) + c * e[i]
        return Polynomial(self.num_vars, terms)

    def antiderivative(self, i: int = 0) -> "Polynomial":
        terms: dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            ne = list(e)
            ne[i] += 1
            terms[tuple(ne)] = c / ne[i]
        return Polynomial(self.num_vars, terms)

    def to_json(self) -> list[dict]:
        return [
            {"exponents": list(e), "coeff": fraction_str(c)}
            for e, c in sorted(self.terms.items())
        ]

    @classmethod
    def from_json(cls, num_vars: int, data: Iterable[Mapping]) -> "Polynomial":
        return cls(num_vars, {tuple(t["exponents"]): as_fraction(t["coeff"]) for t in data})


def interpolate_univariate(points: Sequence[tuple]) -> Polynomial:
    """Unique polynomial of degree < len(points) through ``points`` (Newton form)."""
    xs = [as_fraction(p[0]) for p in points]
    ys = [as_fraction(p[1]) for p in points]
    if len(set(xs)) != len(xs):
        raise IllPosedError("interpolation abscissae must be pairwise distinct")
    if not xs:
        return Polynomial.zero(1)
    n = len(xs)
    coef = list(ys)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    # expand Newton form, Horner style
    t = Polynomial.variable(1, 0)
    poly = Polynomial.constant(1, coef[-1])
    for i in range(n - 2, -1, -1):
        poly = poly * (t - xs[i]) + coef[i]
    return poly


def integrate_segment(p: Polynomial, a, b) -> Fraction:
    a, b = as_fraction(a), as_fraction(b)
    if a > b:
        raise ValueError("integrate_segment needs a <= b")
    anti = p.antiderivative(0)
    return anti.evaluate((b,)) - anti.evaluate((a,))


def _axis_coordinates(points: Sequence[Sequence[Fraction]], dim: int) -> list[list[Fraction]]:
    return [sorted({p[i] for p in points}) for i in range(dim)]


def fit_multivariate(samples: Sequence[tuple], per_variable_degree: int) -> Polynomial:
    """Tensor-product interpolation of exact samples.

    ``samples`` is a sequence of ``(point, value)``; the points must form a
    full tensor grid with ``per_variable_degree + 1`` distinct coordinates on
    every axis.  The fit is done one axis at a time with univariate Newton
    interpolation, which is exact and needs no linear solve.
    """
    if not samples:
        raise IllPosedError("no samples")
    pts = [tuple(as_fraction(c) for c in p) for p, _ in samples]
    vals = {p: as_fraction(v) for p, (_, v) in zip(pts, samples)}
    if len(vals) != len(pts):
        raise IllPosedError("duplicate sample points")
    dim = len(pts[0])
    k = per_variable_degree
    axes = _axis_coordinates(pts, dim)
    for ax in axes:
        if len(ax) != k + 1:
            raise IllPosedError(
                f"axis has {len(ax)} distinct coordinates, need {k + 1}"
            )
    if len(pts) != (k + 1) ** dim:
        raise IllPosedError("samples do not form a complete tensor grid")
    if dim == 0:
        return Polynomial.constant(0, vals[()])

    # table: grid point -> value; reduce the last axis into coefficient slots
    # repeatedly so that after all axes we hold monomial coefficients.
    table: dict[tuple, Fraction] = dict(vals)
    for axis in range(dim - 1, -1, -1):
        new: dict[tuple, Fraction] = {}
        lines: dict[tuple, dict] = {}
        for p, v in table.items():
            lines.setdefault((p[:axis], p[axis + 1:]), {})[p[axis]] = v
        for (pre, suf), line in lines.items():
            uni = interpolate_univariate([(x, line[x]) for x in axes[axis]])
            for deg in range(k + 1):
                c = uni.coefficient((deg,))
                if c:
                    new[pre + (deg,) + suf] = c
        # fill missing grid entries (zero coefficients dropped) lazily
        table = _densify(new, axes, axis, k)
    return Polynomial(dim, {e: c for e, c in table.items() if c})


def _densify(table: dict, axes, axis: int, k: int) -> dict:
    """Re-insert zeros so every (grid prefix, exponent suffix) key exists."""
    dim = len(axes)
    ranges = [axes[i] for i in range(axis)] + [range(k + 1)] * (dim - axis)
    out = {}
    for key in product(*ranges):
        out[tuple(key)] = table.get(tuple(key), Fraction(0))
    return out
