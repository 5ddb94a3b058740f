import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage.numerics import (
    IllPosedError,
    IntervalScalar,
    Polynomial,
    as_fraction,
    dyadic_trig,
    fit_multivariate,
    fraction_str,
    integrate_segment,
    interpolate_univariate,
    round_down,
    round_up,
)

fractions = st.fractions(min_value=-1000, max_value=1000, max_denominator=10**6)


def test_as_fraction_parses_strings_and_ints():
    assert as_fraction("3/6") == Fraction(1, 2)
    assert as_fraction(-4) == -4
    assert fraction_str(Fraction(-6, 4)) == "-3/2"
    with pytest.raises((ValueError, ZeroDivisionError)):
        as_fraction("1/0")
    with pytest.raises(TypeError):
        as_fraction(0.5)


@given(fractions, st.integers(1, 80))
def test_rounding_brackets(x, bits):
    assert round_down(x, bits) <= x <= round_up(x, bits)
    assert round_up(x, bits) - round_down(x, bits) <= 2 * max(1, abs(x)) / 2**bits


@given(fractions, fractions, st.integers(8, 80))
def test_interval_arithmetic_encloses(a, b, bits):
    A, B = IntervalScalar.exact(a, bits), IntervalScalar.exact(b, bits)
    assert (A + B).contains(a + b)
    assert (A - B).contains(a - b)
    assert (A * B).contains(a * b)
    if b != 0 and not B.contains(0):
        assert (A / B).contains(a / b)


@given(st.fractions(min_value=0, max_value=100, max_denominator=1000), st.integers(16, 80))
def test_interval_sqrt_encloses(a, bits):
    r = IntervalScalar.exact(a, bits).sqrt()
    assert r.lo**2 <= a <= r.hi**2


def test_interval_sign_and_division_by_zero():
    assert IntervalScalar.exact(1).sign() == 1
    assert IntervalScalar(Fraction(-1), Fraction(1)).sign() is None
    with pytest.raises(ZeroDivisionError):
        IntervalScalar(Fraction(-1), Fraction(1)).reciprocal()
    with pytest.raises(ValueError):
        IntervalScalar(Fraction(1), Fraction(0))


def _mp(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


@pytest.mark.parametrize("k", range(0, 9))
@pytest.mark.parametrize("bits", [32, 100])
def test_dyadic_trig_encloses_true_value(k, bits):
    c, s = dyadic_trig(k, bits)
    mpmath.mp.dps = 60
    angle = mpmath.pi / 2**k
    slack = mpmath.mpf(10) ** -50  # mpmath's own error at 60 digits
    assert _mp(c.lo) - slack <= mpmath.cos(angle) <= _mp(c.hi) + slack
    assert _mp(s.lo) - slack <= mpmath.sin(angle) <= _mp(s.hi) + slack
    assert c.width <= Fraction(1, 2 ** (bits - 4))


def test_dyadic_trig_known_values():
    c, s = dyadic_trig(2, 64)
    assert c.contains_real(math.sqrt(0.5), 1e-15)
    c, s = dyadic_trig(0, 64)
    assert c.contains(-1) and s.contains(0)


def test_polynomial_algebra():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = (x + y) * (x - y)
    assert p == x * x - y * y
    assert p.total_degree() == 2
    assert p.evaluate((3, 1)) == 8
    assert p.derivative(0) == x * 2
    assert p.antiderivative(1).derivative(1) == p
    assert p.substitute([y, x]) == -p


@given(st.lists(fractions, min_size=1, max_size=6, unique=True), st.data())
def test_interpolation_reproduces_samples(xs, data):
    ys = data.draw(st.lists(fractions, min_size=len(xs), max_size=len(xs)))
    p = interpolate_univariate(list(zip(xs, ys)))
    assert p.total_degree() < max(len(xs), 1) or p.is_zero()
    assert all(p.evaluate((x,)) == y for x, y in zip(xs, ys))


def test_interpolation_rejects_repeated_abscissae():
    with pytest.raises(IllPosedError):
        interpolate_univariate([(1, 2), (1, 3)])


@settings(max_examples=30)
@given(st.lists(st.integers(-5, 5), min_size=9, max_size=9))
def test_tensor_fit_recovers_biquadratic(coeffs):
    x, y = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    p = Polynomial.zero(2)
    for i in range(3):
        for j in range(3):
            p = p + (x**i if i else Polynomial.constant(2, 1)) * (y**j if j else Polynomial.constant(2, 1)) * coeffs[3 * i + j]
    nodes = [Fraction(0), Fraction(1, 2), Fraction(2)]
    samples = [((a, b), p.evaluate((a, b))) for a in nodes for b in nodes]
    assert fit_multivariate(samples, 2) == p


def test_integrate_segment():
    t = Polynomial.variable(1, 0)
    assert integrate_segment(t * t, 0, 1) == Fraction(1, 3)
    assert integrate_segment((1 - t) * (1 - t) * Fraction(1, 2), 0, 1) == Fraction(1, 6)
