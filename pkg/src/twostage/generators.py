"""Seeded instance generators and small named instance families."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .numerics import as_fraction
from .recourse import StochasticProgram
from .volume_dp import IntegerSystem


def newsvendor(c=0) -> StochasticProgram:
    """Shortfall recourse ``Q(x, xi) = max(xi - x, 0)``, ``xi ~ U[0, 1]``,
    ``0 <= x <= 1``.  ``E[Q] = (1 - x)^2 / 2``."""
    return StochasticProgram(
        c=[c], A=[[1], [-1]], b=[1, 0],
        W=[[1, -1]], q0=[1, 0], Qmat=[[0], [0]],
        T0=[[1]], Tk=[[[0]]], h0=[0], Hmat=[[1]],
        l=[0], u=[1],
    )


def threshold_family(A: Sequence[Sequence[int]], b: Sequence, t, x_max=1) -> StochasticProgram:
    """``Q(x, xi) = x * max(0, max_j a_j . xi - b_j - t)`` on ``xi ~ U[0,1]^d``.

    Second stage ``min z  s.t.  z - s_j = x (a_j . xi - b_j - t)``, ``z, s >= 0``
    (complete and bounded recourse), first stage ``0 <= x <= x_max``.  At ``x = 1``
    the expectation ``p(t)`` has derivative ``vol{A xi <= b + t} - 1`` on the
    cube.
    """
    A = [[as_fraction(v) for v in row] for row in A]
    b = [as_fraction(v) for v in b]
    t = as_fraction(t)
    m, d = len(A), len(A[0])
    W = [[1] + [-int(i == j) for j in range(m)] for i in range(m)]
    return StochasticProgram(
        c=[0], A=[[1], [-1]], b=[x_max, 0],
        W=W,
        q0=[1] + [0] * m,
        Qmat=[[0] * d for _ in range(m + 1)],
        T0=[[b[i] + t] for i in range(m)],
        Tk=[[[-A[i][k]] for i in range(m)] for k in range(d)],
        h0=[0] * m, Hmat=[[0] * d for _ in range(m)],
        l=[0] * d, u=[1] * d,
    )


def incomplete_example() -> StochasticProgram:
    """``y = xi - x, y >= 0`` is infeasible for ``xi < x``."""
    return StochasticProgram(
        c=[0], A=[[1], [-1]], b=[1, 0],
        W=[[1]], q0=[1], Qmat=[[0]],
        T0=[[1]], Tk=[[[0]]], h0=[0], Hmat=[[1]],
        l=[0], u=[1],
    )


def unbounded_example() -> StochasticProgram:
    """Cost ``y1 - 2 y2`` along ``y1 - y2 = xi - x`` decreases without bound."""
    return StochasticProgram(
        c=[0], A=[[1], [-1]], b=[1, 0],
        W=[[1, -1]], q0=[1, -2], Qmat=[[0], [0]],
        T0=[[1]], Tk=[[[0]]], h0=[0], Hmat=[[1]],
        l=[0], u=[1],
    )


def random_sslp(
    seed: int,
    n1: int = 2,
    m2: int = 2,
    n2: int = 5,
    d: int = 2,
    coef: int = 3,
) -> StochasticProgram:
    """Random SSLP with complete and bounded recourse.

    ``W`` contains ``+I`` and ``-I`` blocks (any right-hand side is feasible)
    and every cost ``q_xi`` is non-negative over the box (the dual is
    feasible at ``lambda = 0``), so ``Q`` is finite everywhere.  Extra
    columns beyond ``2 m2`` are random integers.
    """
    if n2 < 2 * m2:
        raise ValueError("need n2 >= 2 m2 for the +-I blocks")
    rng = random.Random(seed)
    ri = lambda: rng.randint(-coef, coef)  # noqa: E731
    W = [[int(i == j) for j in range(m2)] + [-int(i == j) for j in range(m2)] for i in range(m2)]
    for _ in range(n2 - 2 * m2):
        col = [ri() for _ in range(m2)]
        for i in range(m2):
            W[i].append(col[i])
    l = [Fraction(0)] * d
    u = [Fraction(1)] * d
    Qmat = [[ri() for _ in range(d)] for _ in range(n2)]
    # q0 makes q non-negative on [0,1]^d
    q0 = [sum(-min(0, a) for a in row) + rng.randint(0, coef) for row in Qmat]
    T0 = [[ri() for _ in range(n1)] for _ in range(m2)]
    Tk = [[[rng.randint(-1, 1) for _ in range(n1)] for _ in range(m2)] for _ in range(d)]
    h0 = [ri() for _ in range(m2)]
    Hmat = [[ri() for _ in range(d)] for _ in range(m2)]
    c = [ri() for _ in range(n1)]
    # first stage: 0 <= x <= 1
    A = [[int(i == j) for j in range(n1)] for i in range(n1)] + [
        [-int(i == j) for j in range(n1)] for i in range(n1)
    ]
    b = [1] * n1 + [0] * n1
    return StochasticProgram(c, A, b, W, q0, Qmat, T0, Tk, h0, Hmat, l, u)


def random_integer_system(seed: int, m: int, d: int, norm: int) -> IntegerSystem:
    rng = random.Random(seed)
    while True:
        A = [[rng.randint(-norm, norm) for _ in range(d)] for _ in range(m)]
        if all(any(row) for row in A):
            return IntegerSystem(tuple(tuple(r) for r in A))


def random_graph(seed: int, n: int, p: float = 0.5) -> list[tuple[int, int]]:
    """Erdos-Renyi edge list on vertices 1..n."""
    rng = random.Random(seed)
    return [(i, j) for i, j in combinations(range(1, n + 1), 2) if rng.random() < p]
