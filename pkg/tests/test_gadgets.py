from fractions import Fraction
from itertools import combinations

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage.gadgets import (
    Graph,
    ProtocolError,
    area_via_gadget,
    area_with_details,
    bisection_expectation,
    bit_vector,
    build_gadget,
    count_independent_sets_brute,
    count_is,
    cut_indicator,
    envelope_expectations,
    lifted_point,
    polygon_oracle,
    sslp_from_graph,
    sslp_oracle,
    trajectory,
    volume_via_recourse,
)
from twostage.recourse import expected_recourse_1d
from twostage.volume_dp import IntegerSystem, volume_dp

F = Fraction
TWO_EDGE_STAR = Graph.from_edges(3, [(1, 2), (1, 3)])


def _mp(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


def test_fold_bits_of_square():
    assert bit_vector(0, 2) == (1, 0)
    assert bit_vector(3, 2) == (0, 0)


def test_fold_bits_of_octagon_in_angular_order():
    labels = ["".join(map(str, bit_vector(ell, 3))) for ell in range(8)]
    assert labels == ["100", "101", "111", "110", "010", "011", "001", "000"]


@pytest.mark.parametrize("n", range(2, 7))
def test_fold_bits_are_a_bijection(n):
    assert len({bit_vector(ell, n) for ell in range(2**n)}) == 2**n


def test_bit_vector_range_checks():
    with pytest.raises(ValueError):
        bit_vector(8, 3)
    with pytest.raises(ValueError):
        bit_vector(0, 1)


def test_two_edge_star_area():
    res = area_with_details(TWO_EDGE_STAR)
    assert count_is(TWO_EDGE_STAR) == 5
    assert len(res.cut) == 3
    mpmath.mp.dps = 50
    delta = (_mp(res.gadget.delta.lo) + _mp(res.gadget.delta.hi)) / 2
    want = 8 * mpmath.tan(mpmath.pi / 8) - 3 * delta
    assert _mp(res.area.lo) <= want <= _mp(res.area.hi)
    assert res.area.width < F(1, 10**6)
    assert abs(float(res.area.mid) - 3.131728) < 1e-6


@pytest.mark.parametrize("n", [2, 3, 4])
def test_unforced_trajectories_satisfy_base_formulation(n):
    g = Graph.from_edges(n, [])
    gad = build_gadget(g)
    P = gad.formulation()
    for ell in range(gad.k):
        pts = trajectory(gad, gad.vertices[ell], 2 * ell + 1)
        assert P.admits(lifted_point(pts))


def test_uncut_vertices_satisfy_edge_formulations():
    g = Graph.from_edges(4, [(1, 2), (2, 4), (3, 4)])
    gad = build_gadget(g)
    for e in g.sorted_edges():
        P = gad.formulation(e)
        for ell in range(gad.k):
            if not cut_indicator(gad, e, ell):
                pts = trajectory(gad, gad.vertices[ell], 2 * ell + 1, e)
                assert P.admits(lifted_point(pts))


@pytest.mark.parametrize("n", range(2, 7))
def test_complete_and_empty_graphs(n):
    assert count_is(Graph.from_edges(n, [])) == 2**n
    assert count_is(Graph.from_edges(n, list(combinations(range(1, n + 1), 2)))) == n + 1


graphs = st.integers(2, 5).flatmap(
    lambda n: st.builds(
        lambda keep: Graph.from_edges(n, [e for e, k in zip(combinations(range(1, n + 1), 2), keep) if k]),
        st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2),
    )
)


@settings(max_examples=25, deadline=None)
@given(graphs)
def test_area_count_equals_brute_force(g):
    assert count_is(g) == count_independent_sets_brute(g)


@settings(max_examples=15, deadline=None)
@given(graphs, st.data())
def test_adding_an_edge_shrinks_the_polygon(g, data):
    missing = [e for e in combinations(range(1, g.n + 1), 2) if e not in g.edges]
    if not missing:
        return
    e = data.draw(st.sampled_from(missing))
    a, b = area_with_details(g), area_with_details(g.with_edge(e))
    assert set(a.cut) <= set(b.cut)
    assert b.area.hi <= a.area.hi


@pytest.mark.parametrize("edges", [[], [(1, 2)], [(1, 2), (1, 3)], [(1, 2), (2, 3), (3, 4), (1, 4)]])
def test_envelope_matches_polygon_oracle(edges):
    n = max([3] + [max(e) for e in edges]) if edges else 2
    g = Graph.from_edges(n, edges)
    env = envelope_expectations(g)
    emax, emin, area = polygon_oracle(g)
    tol = 1e-30
    assert _mp(env.emax.lo) - tol <= emax <= _mp(env.emax.hi) + tol
    assert _mp(env.emin.lo) - tol <= emin <= _mp(env.emin.hi) + tol
    assert ((env.emax - env.emin) * 2).overlaps(area_via_gadget(g))


def test_square_envelope():
    env = envelope_expectations(Graph.from_edges(2, []))
    assert env.emax.contains(1) and env.emin.contains(-1)


def test_sslp_from_graph_is_positively_homogeneous():
    g = Graph.from_edges(2, [(1, 2)])
    sp = sslp_from_graph(g)
    f1 = expected_recourse_1d(sp, [1])
    assert expected_recourse_1d(sp, [F(1, 2)]) == f1 / 2
    emax, _, _ = polygon_oracle(g)
    assert abs(float(f1) + float(emax)) < 1e-8


def test_bisection_with_exact_oracle():
    g = TWO_EDGE_STAR
    res = bisection_expectation(g, sslp_oracle(g))
    assert res.calls <= 3 * g.n - 3
    assert res.interval.width <= F(1, 2 ** (3 * g.n - 3))
    assert res.interval.overlaps(envelope_expectations(g).emax)


def test_bisection_rejects_inconsistent_oracle():
    with pytest.raises(ProtocolError):
        bisection_expectation(TWO_EDGE_STAR, lambda sp: (F(0), F(1, 3)))


@pytest.mark.parametrize(
    "A, b",
    [([[1]], [1]), ([[1]], [0]), ([[1, 1]], [1]), ([[1, 1]], [F(3, 2)]), ([[1, -1], [1, 1]], [F(1, 2), 1])],
)
def test_volume_via_recourse(A, b):
    res = volume_via_recourse(A, b)
    assert res.volume == volume_dp(IntegerSystem(tuple(map(tuple, A))), b)
    assert res.p.total_degree() <= len(A[0]) + 1


def test_recourse_slope_identity():
    """p'(0) = (vol - 1) x for the threshold family at x = 1/2."""
    x = F(1, 2)
    res = volume_via_recourse([[1, 2]], [F(3, 2)], x)
    slope = res.p.derivative(0).evaluate((0,))
    assert slope == (res.volume - 1) * x


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph.from_edges(2, [(1, 3)])
