"""Scalar Bell and CHSH inequalities among numbers in [-1, 1].

All functions broadcast over numpy arrays, so the same call evaluates one
tuple or a million. Scalar inputs give scalar fields in the report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

TIGHT_TOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    """Evaluated sides of an inequality ``lhs <= rhs``.

    ``holds`` is ``lhs <= rhs + tol`` and ``tight`` is ``|lhs - rhs| <= tol``,
    so ``tight`` implies ``holds``. Fields are floats/bools for scalar
    inputs and arrays for array inputs.
    """

    lhs: Any
    rhs: Any
    holds: Any
    tight: Any

    @property
    def margin(self) -> Any:
        """``lhs - rhs``; positive means violated."""
        return self.lhs - self.rhs

    def as_dict(self) -> dict:
        return {
            "lhs": _plain(self.lhs),
            "rhs": _plain(self.rhs),
            "holds": _plain(self.holds),
            "tight": _plain(self.tight),
        }


@dataclass(frozen=True)
class DecoupledReport(BoundReport):
    """Report for the four-sample CHSH expression.

    ``exceeds_chsh`` flags ``lhs > 2``, which is impossible when the four
    products share their factors.
    """

    exceeds_chsh: Any = False

    def as_dict(self) -> dict:
        out = super().as_dict()
        out["exceeds_chsh"] = _plain(self.exceeds_chsh)
        return out


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def _check_unit_interval(*args):
    arrays = [np.asarray(a, dtype=float) for a in args]
    for arr in arrays:
        if np.any(np.isnan(arr)) or np.any(np.abs(arr) > 1.0):
            raise ValueError("inputs must lie in [-1, 1]")
    return arrays


def _check_sign(sign):
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def _report(lhs, rhs, tol=TIGHT_TOL, cls=BoundReport, **extra):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
    holds = lhs <= rhs + tol
    tight = np.abs(lhs - rhs) <= tol
    if lhs.ndim == 0:
        extra = {k: bool(v) for k, v in extra.items()}
        return cls(float(lhs), float(rhs), bool(holds), bool(tight), **extra)
    return cls(lhs, rhs.copy(), holds, tight, **extra)


def two_term_bound(a, c, sign: int = 1, tol: float = TIGHT_TOL) -> BoundReport:
    """``|a + sign*c| <= 1 + sign*a*c`` for ``a, c`` in [-1, 1]."""
    _check_sign(sign)
    a, c = _check_unit_interval(a, c)
    return _report(np.abs(a + sign * c), 1.0 + sign * a * c, tol)


def three_term_bound(a, b, c, sign: int = 1, tol: float = TIGHT_TOL) -> BoundReport:
    """``|ab + sign*cb| <= 1 + sign*ac``."""
    _check_sign(sign)
    a, b, c = _check_unit_interval(a, b, c)
    return _report(np.abs(a * b + sign * c * b), 1.0 + sign * a * c, tol)


def bell_three_sum(a, b, b_prime, c, tol: float = TIGHT_TOL) -> BoundReport:
    """``|ab - bc| + |ab' + b'c| <= 2``."""
    a, b, bp, c = _check_unit_interval(a, b, b_prime, c)
    return _report(np.abs(a * b - b * c) + np.abs(a * bp + bp * c), 2.0, tol)


def bell_signed_sum(a, a_prime, b, b_prime, tol: float = TIGHT_TOL) -> BoundReport:
    """``ab + ab' + a'b' - a'b <= 2`` (no absolute value on the left)."""
    a, ap, b, bp = _check_unit_interval(a, a_prime, b, b_prime)
    return _report(a * b + a * bp + ap * bp - ap * b, 2.0, tol)


def chsh_value(a, a_prime, b, b_prime, tol: float = TIGHT_TOL) -> BoundReport:
    """``|ab + ab' + a'b - a'b'| <= 2``."""
    a, ap, b, bp = _check_unit_interval(a, a_prime, b, b_prime)
    return _report(np.abs(a * b + a * bp + ap * b - ap * bp), 2.0, tol)


def chsh_four_sample(
    a1, b1, a2, b2_prime, a3_prime, b3, a4_prime, b4_prime, tol: float = TIGHT_TOL
) -> DecoupledReport:
    """``|a1 b1 + a2 b2' + a3' b3 - a4' b4'|`` against its true supremum 4.

    Each product draws its own factors, as when four experiments have four
    independent hidden parameters. The value can exceed 2.
    """
    a1, b1, a2, b2p, a3p, b3, a4p, b4p = _check_unit_interval(
        a1, b1, a2, b2_prime, a3_prime, b3, a4_prime, b4_prime
    )
    lhs = np.abs(a1 * b1 + a2 * b2p + a3p * b3 - a4p * b4p)
    return _report(lhs, 4.0, tol, cls=DecoupledReport, exceeds_chsh=lhs > 2.0 + tol)


def two_term_equality_predicted(a, c) -> Any:
    """Equality set of ``|a +- c| <= 1 +- ac``: ``a`` or ``c`` is +-1."""
    a, c = _check_unit_interval(a, c)
    return (np.abs(a) == 1.0) | (np.abs(c) == 1.0)


def three_term_equality_predicted(a, b, c, sign: int = 1) -> Any:
    """Equality set of ``|ab + sign*cb| <= 1 + sign*ac``.

    Either ``|b| = 1`` with ``a`` or ``c`` at +-1, or both sides vanish
    (``a = -sign*c`` with ``|a| = 1``), in which case ``b`` is free.
    """
    _check_sign(sign)
    a, b, c = _check_unit_interval(a, b, c)
    edge = (np.abs(a) == 1.0) | (np.abs(c) == 1.0)
    return ((np.abs(b) == 1.0) & edge) | (1.0 + sign * a * c == 0.0)


def three_sum_equality_predicted(a, b, b_prime, c) -> Any:
    """Equality set of ``|ab - bc| + |ab' + b'c| <= 2``.

    Needs ``max(|a|, |c|) = 1``; then ``|b| = 1`` unless ``a = c`` and
    ``|b'| = 1`` unless ``a = -c``. On the {-1, 1} lattice this is always met.
    """
    a, b, bp, c = _check_unit_interval(a, b, b_prime, c)
    edge = np.maximum(np.abs(a), np.abs(c)) == 1.0
    first = (np.abs(b) == 1.0) | (a == c)
    second = (np.abs(bp) == 1.0) | (a == -c)
    return edge & first & second


def random_tuples(rng: np.random.Generator, n: int, k: int, boundary: float = 0.0) -> np.ndarray:
    """``(k, n)`` array of numbers in [-1, 1].

    Each entry is uniform on [-1, 1], except that with probability
    ``boundary`` it is replaced by a uniformly chosen endpoint +-1. Extremal
    values of multilinear expressions sit at the endpoints, which uniform
    sampling essentially never reaches.
    """
    if not 0.0 <= boundary <= 1.0:
        raise ValueError("boundary must lie in [0, 1]")
    x = rng.uniform(-1.0, 1.0, size=(k, n))
    if boundary:
        edge = rng.random((k, n)) < boundary
        x = np.where(edge, rng.choice((-1.0, 1.0), size=(k, n)), x)
    return x
