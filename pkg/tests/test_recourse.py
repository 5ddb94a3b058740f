from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage import generators as gen
from twostage.polytope import interior_margin
from twostage.recourse import (
    RecourseIncompleteError,
    StochasticProgram,
    UnboundedRecourseError,
    analyze_recourse,
    basis_cell,
    cell_value,
    enumerate_bases,
    expected_recourse,
    expected_recourse_1d,
    expected_subgradient,
    mc_expected_recourse,
    objective_classes,
    second_stage_value,
    solve_first_stage,
)

F = Fraction
XS = [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]


@pytest.mark.parametrize("x", XS)
def test_newsvendor_closed_form(x):
    sp = gen.newsvendor()
    want = (1 - x) ** 2 / 2
    assert expected_recourse(sp, [x]) == want
    assert expected_recourse(sp, [x], backend="dp") == want
    assert expected_recourse_1d(sp, [x], method="cells") == want
    assert expected_recourse_1d(sp, [x], method="parametric") == want
    assert expected_subgradient(sp, [x]) == [-(1 - x)]


def test_newsvendor_second_stage_values():
    sp = gen.newsvendor()
    assert second_stage_value(sp, [F(1, 2)], [F(3, 4)]) == F(1, 4)
    assert second_stage_value(sp, [F(1, 2)], [F(1, 4)]) == 0


def test_newsvendor_first_stage():
    res = solve_first_stage(gen.newsvendor(F(1, 4)), F(1, 10**6))
    assert abs(res.x[0] - F(3, 4)) <= F(1, 10**6)
    assert abs(res.value - F(7, 32)) <= F(1, 10**6)
    assert res.lower_bound <= F(7, 32) <= res.value


def test_threshold_family_values():
    assert expected_recourse(gen.threshold_family([[1]], [0], F(1, 2)), [1]) == F(1, 8)
    assert expected_recourse(gen.threshold_family([[1]], [0], F(1, 2)), [F(1, 2)]) == F(1, 16)


def test_incomplete_recourse_is_certified():
    with pytest.raises(RecourseIncompleteError) as info:
        analyze_recourse(gen.incomplete_example(), [F(1, 2)])
    assert info.value.deficit == F(1, 2)
    wit = info.value.witness
    assert wit is not None and wit[0] < F(1, 2)


def test_unbounded_recourse_is_reported():
    with pytest.raises(UnboundedRecourseError):
        expected_recourse(gen.unbounded_example(), [F(1, 2)])


def test_complete_recourse_certifies_zero_deficit():
    rep = analyze_recourse(gen.random_sslp(1), [F(1, 2), F(1, 3)])
    assert rep.diagnostics["coverage_deficit"] == 0
    assert rep.coverage == rep.box_volume


def test_shape_errors():
    with pytest.raises(ValueError):
        StochasticProgram(
            c=[0], A=[[1]], b=[1], W=[[1, -1, 0]], q0=[1, 0], Qmat=[[0], [0]],
            T0=[[1]], Tk=[[[0]]], h0=[0], Hmat=[[1]], l=[0], u=[1],
        )


def test_infeasible_first_stage_point_rejected():
    with pytest.raises(ValueError):
        expected_recourse(gen.newsvendor(), [F(2)])


def test_basis_order_does_not_change_value():
    sp = gen.random_sslp(2)
    x = [F(1, 3), F(3, 4)]
    bases = enumerate_bases(sp.W)
    a = analyze_recourse(sp, x, bases=bases).value
    b = analyze_recourse(sp, x, bases=list(reversed(bases))).value
    assert a == b


@pytest.mark.parametrize("seed", range(4))
def test_integration_backends_agree(seed):
    sp = gen.random_sslp(seed)
    x = [F(1, 2), F(1, 5)]
    assert expected_recourse(sp, x, backend="triangulate") == expected_recourse(sp, x, backend="dp")


@pytest.mark.parametrize("seed", range(4))
def test_distinct_classes_do_not_overlap(seed):
    sp = gen.random_sslp(seed)
    x = [F(1, 2), F(1, 2)]
    cells = [basis_cell(sp, x, B) for B in enumerate_bases(sp.W)]
    classes = objective_classes(cells)
    for i, ci in enumerate(classes):
        for cj in classes[i + 1:]:
            for a in ci.members:
                for b in cj.members:
                    rows = a.cell.all_rows() + list(b.cell.rows)
                    m = interior_margin(rows, sp.d)
                    assert m is None or m <= 0


points = st.tuples(st.fractions(0, 1, max_denominator=64), st.fractions(0, 1, max_denominator=64))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 5), points, points)
def test_cell_value_matches_lp(seed, x, xi):
    sp = gen.random_sslp(seed)
    assert cell_value(sp, list(x), list(xi)) == second_stage_value(sp, list(x), list(xi))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 5), points, points)
def test_expected_recourse_convex_in_x(seed, x, y):
    sp = gen.random_sslp(seed)
    mid = [(a + b) / 2 for a, b in zip(x, y)]
    assert 2 * expected_recourse(sp, mid) <= expected_recourse(sp, list(x)) + expected_recourse(sp, list(y))


@pytest.mark.parametrize("seed", range(3))
def test_subgradient_inequality(seed):
    sp = gen.random_sslp(seed)
    x = [F(1, 3), F(2, 3)]
    g = expected_subgradient(sp, x)
    fx = expected_recourse(sp, x)
    for y in ([F(0), F(0)], [F(1), F(1, 2)], [F(1, 2), F(1)]):
        assert expected_recourse(sp, y) >= fx + sum(gi * (yi - xi) for gi, yi, xi in zip(g, y, x))


@pytest.mark.parametrize("seed", range(3))
def test_monte_carlo_within_four_stderr(seed):
    sp = gen.random_sslp(seed)
    x = [F(1, 4), F(1, 2)]
    est, err = mc_expected_recourse(sp, x, 20_000, seed)
    assert abs(est - expected_recourse(sp, x)) <= 4 * err


def test_kelley_on_two_dimensional_first_stage():
    sp = gen.random_sslp(0)
    eps = F(1, 10**4)
    res = solve_first_stage(sp, eps)
    assert res.value - res.lower_bound <= eps
    assert sp.is_first_stage_feasible(res.x)
