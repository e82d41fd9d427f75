"""Exact feasibility of ``A x = b, x >= 0`` over the rationals.

Phase-one simplex on a dense Fraction tableau with Bland's rule, so it
terminates and never depends on floating-point pivots. An infeasible system
comes back with a Farkas certificate ``y``: ``y . A_j >= 0`` for every
column and ``y . b < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    x: tuple[Fraction, ...] | None = None
    certificate: tuple[Fraction, ...] | None = None


def _frac_matrix(A):
    return [[Fraction(v) for v in row] for row in A]


def solve_feasibility(A: Sequence[Sequence], b: Sequence) -> FeasibilityResult:
    A = _frac_matrix(A)
    b = [Fraction(v) for v in b]
    m = len(A)
    n = len(A[0]) if m else 0
    if any(len(row) != n for row in A) or len(b) != m:
        raise ValueError("inconsistent system dimensions")

    # Flip rows so b >= 0; remember the flips to map the certificate back.
    flip = [1] * m
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
            flip[i] = -1

    # Tableau columns: n originals, m artificials, then rhs.
    width = n + m
    T = [A[i] + [Fraction(int(i == j)) for j in range(m)] + [b[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    # Reduced-cost row for min sum(artificials): c_j - c_B B^-1 A_j.
    cost = [Fraction(0)] * (width + 1)
    for j in range(width + 1):
        if j < n or j == width:
            cost[j] = -sum((T[i][j] for i in range(m)), Fraction(0))

    while True:
        entering = next((j for j in range(width) if cost[j] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            if T[i][entering] > 0:
                ratio = T[i][width] / T[i][entering]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            # Unbounded cannot happen: the phase-one objective is bounded below by 0.
            raise RuntimeError("phase-one simplex reported unbounded")
        _pivot(T, cost, best[1], entering)
        basis[best[1]] = entering

    objective = -cost[width]
    if objective == 0:
        x = [Fraction(0)] * n
        for i, j in enumerate(basis):
            if j < n:
                x[j] = T[i][width]
        return FeasibilityResult(True, x=tuple(x))

    # Duals of the phase-one problem: y = c_B B^-1, read from the artificial
    # columns' reduced costs (c_j = 1 there, so y_i = 1 - rc). Then y.A_j <= 0,
    # y.b > 0; the Farkas certificate is -y, corrected for flipped rows.
    y = [Fraction(1) - cost[n + i] for i in range(m)]
    cert = tuple(-y[i] * flip[i] for i in range(m))
    return FeasibilityResult(False, certificate=cert)


def _pivot(T, cost, r, c):
    piv = T[r][c]
    row = [v / piv for v in T[r]]
    T[r] = row
    for i in range(len(T)):
        if i != r and T[i][c] != 0:
            f = T[i][c]
            T[i] = [a - f * p for a, p in zip(T[i], row)]
    if cost[c] != 0:
        f = cost[c]
        cost[:] = [a - f * p for a, p in zip(cost, row)]
