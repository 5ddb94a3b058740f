from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage.numerics import Polynomial
from twostage.polytope import (
    HPolytope,
    UnboundedPolytopeError,
    UnsupportedDimensionError,
    enumerate_vertices,
    integrate_quadratic_triangulated,
    interior_margin,
    is_feasible,
    lasserre_volume,
    mc_volume,
    simplex_integral,
    simplex_standard,
    solve_lp,
    splitmix64,
    uniform_grid_samples,
)

F = Fraction


def triangle():
    return HPolytope.unit_cube(2, [((1, 1), 1)])


def test_volume_of_unit_simplices():
    assert lasserre_volume(triangle()) == F(1, 2)
    tet = HPolytope.unit_cube(3, [((1, 1, 1), 1)])
    assert lasserre_volume(tet) == F(1, 6)
    assert integrate_quadratic_triangulated(tet, Polynomial.constant(3, 1)) == F(1, 6)


def test_empty_and_lower_dimensional_bodies_have_zero_volume():
    assert lasserre_volume(HPolytope.unit_cube(2, [((1, 1), -1)])) == 0
    flat = HPolytope.unit_cube(2, [((1, 0), 0)])
    assert lasserre_volume(flat) == 0
    assert integrate_quadratic_triangulated(flat, Polynomial.constant(2, 1)) == 0


def test_unbounded_raises():
    with pytest.raises(UnboundedPolytopeError):
        lasserre_volume(HPolytope(2, (((1, 0), 1),)))


def test_triangulation_limited_to_three_dimensions():
    with pytest.raises(UnsupportedDimensionError):
        integrate_quadratic_triangulated(HPolytope.unit_cube(4), Polynomial.constant(4, 1))


def test_moments_of_triangle():
    x, y = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    t = triangle()
    assert integrate_quadratic_triangulated(t, x) == F(1, 6)
    assert integrate_quadratic_triangulated(t, x * x) == F(1, 12)
    assert integrate_quadratic_triangulated(t, x * y) == F(1, 24)


def test_simplex_integral_matches_closed_form():
    # integral of x^2 over [0, 2] is 8/3
    assert simplex_integral([(F(0),), (F(2),)], Polynomial.variable(1, 0) ** 2) == F(8, 3)


def test_lp_statuses():
    sol = solve_lp(triangle(), (1, 2), "max")
    assert sol.status == "optimal" and sol.value == 2
    assert not is_feasible(HPolytope.unit_cube(1, [((1,), -1)]))
    unb = simplex_standard([[1, -1]], [0], [0, 1])
    assert unb.status == "unbounded"
    inf = simplex_standard([[1, 1]], [-1], [1, 1])
    assert inf.status == "infeasible"


def test_interior_margin():
    assert interior_margin(triangle().all_rows(), 2) > 0
    assert interior_margin(HPolytope.unit_cube(2, [((1, 0), 0)]).all_rows(), 2) in (None, 0)


def test_vertices_of_square():
    assert sorted(enumerate_vertices(HPolytope.unit_cube(2))) == [(0, 0), (0, 1), (1, 0), (1, 1)]


rows2 = st.lists(
    st.tuples(
        st.tuples(st.integers(-3, 3), st.integers(-3, 3)).filter(any),
        st.fractions(-3, 3, max_denominator=4),
    ),
    max_size=3,
)


@settings(max_examples=60, deadline=None)
@given(rows2)
def test_lasserre_equals_triangulation_in_plane(rows):
    p = HPolytope.unit_cube(2, rows)
    assert lasserre_volume(p) == integrate_quadratic_triangulated(p, Polynomial.constant(2, 1))


@settings(max_examples=40, deadline=None)
@given(rows2, st.tuples(st.tuples(st.integers(-3, 3), st.integers(-3, 3)).filter(any), st.fractions(-3, 3, max_denominator=4)))
def test_adding_a_constraint_never_grows_volume(rows, extra):
    p = HPolytope.unit_cube(2, rows)
    assert lasserre_volume(p.with_rows([extra])) <= lasserre_volume(p)


@settings(max_examples=30, deadline=None)
@given(rows2, st.fractions(1, 3, max_denominator=3), st.fractions(1, 3, max_denominator=3))
def test_volume_scales_with_box(rows, sx, sy):
    p = HPolytope.unit_cube(2, rows)
    scaled = HPolytope(
        2,
        tuple(((a[0] / sx, a[1] / sy), r) for a, r in p.rows),
        ((0, 0), (sx, sy)),
    )
    assert lasserre_volume(scaled) == lasserre_volume(p) * sx * sy


def test_splitmix64_reference_values():
    # first outputs of splitmix64 seeded with 0
    assert [int(v) for v in splitmix64(0, 3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]


def test_grid_samples_are_deterministic_and_in_range():
    a = uniform_grid_samples(7, 100, 3)
    assert (a == uniform_grid_samples(7, 100, 3)).all()
    assert a.min() >= 0 and a.max() < 2**32


def test_mc_volume_within_four_stderr():
    est, err = mc_volume(triangle(), 100_000, seed=3)
    assert abs(est - F(1, 2)) <= 4 * err


def test_stderr_never_zero_for_empty_or_full_samples():
    from twostage.polytope import stderr_upper

    assert stderr_upper(0, 100) > 0
    assert stderr_upper(100, 100) > 0
    assert stderr_upper(0, 100) == stderr_upper(1, 100)
