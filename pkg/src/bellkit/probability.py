"""Finite probability spaces, bounded random variables and the Bell/CHSH
inequalities they force.

A space holds explicit outcome labels and weights. Weights are floats by
default; passing :class:`fractions.Fraction` weights switches the space to
exact arithmetic, and every expectation on it is then exact as well.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from bellkit.kernel import TIGHT_TOL, BoundReport, _report

WEIGHT_TOL = 1e-12


class DimensionError(ValueError):
    """A random variable does not match the space it is used on."""


def _as_values(values, exact: bool) -> np.ndarray:
    if exact:
        return np.array([v if isinstance(v, Fraction) else Fraction(v) for v in values], dtype=object)
    return np.asarray(values, dtype=float)


@dataclass(frozen=True, eq=False)
class FiniteProbabilitySpace:
    outcomes: tuple
    weights: np.ndarray

    def __init__(self, outcomes: Iterable[Hashable], weights: Iterable):
        outcomes = tuple(outcomes)
        weights = list(weights)
        if len(outcomes) != len(weights):
            raise DimensionError("outcomes and weights differ in length")
        if not outcomes:
            raise ValueError("a probability space needs at least one outcome")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("outcome labels must be unique")
        exact = all(isinstance(w, (Fraction, int)) and not isinstance(w, bool) for w in weights)
        exact = exact and any(isinstance(w, Fraction) for w in weights)
        w = _as_values(weights, exact)
        if any(x < 0 for x in w):
            raise ValueError("weights must be nonnegative")
        total = sum(w)
        if exact:
            if total != 1:
                raise ValueError(f"weights sum to {total}, not 1")
        elif abs(float(total) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {float(total)!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, outcomes: Iterable[Hashable], exact: bool = False) -> "FiniteProbabilitySpace":
        outcomes = tuple(outcomes)
        n = len(outcomes)
        w = [Fraction(1, n)] * n if exact else [1.0 / n] * n
        return cls(outcomes, w)

    @classmethod
    def product(cls, *spaces: "FiniteProbabilitySpace") -> "FiniteProbabilitySpace":
        """Product measure; outcome labels are tuples of factor labels."""
        labels, weights = [], []
        for combo in itertools.product(*[list(zip(s.outcomes, s.weights)) for s in spaces]):
            labels.append(tuple(lab for lab, _ in combo))
            w = 1
            for _, x in combo:
                w = w * x
            weights.append(w)
        return cls(labels, weights)

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object

    @property
    def size(self) -> int:
        return len(self.outcomes)

    def __len__(self) -> int:
        return len(self.outcomes)

    def index(self, outcome: Hashable) -> int:
        return self.outcomes.index(outcome)

    def variable(self, fn: Callable[[Hashable], float]) -> "RandomVariable":
        """Random variable ``outcome -> fn(outcome)``."""
        return RandomVariable([fn(o) for o in self.outcomes])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Indices of ``n`` outcomes drawn i.i.d. from the weights."""
        p = np.asarray(self.weights, dtype=float)
        return rng.choice(self.size, size=n, p=p / p.sum())


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Values indexed by the outcomes of a space, each in [-1, 1]."""

    values: np.ndarray

    def __init__(self, values: Iterable):
        values = list(values)
        # Integer values stay exact so expectations on exact spaces are Fractions.
        exact = any(isinstance(v, Fraction) for v in values) or all(
            isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in values)
        v = _as_values(values, exact)
        if any(abs(x) > 1 for x in v):
            raise ValueError("random variable values must lie in [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value, n: int) -> "RandomVariable":
        return cls([value] * n)

    @property
    def dichotomic(self) -> bool:
        return all(x == 1 or x == -1 for x in self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __mul__(self, other: "RandomVariable") -> "RandomVariable":
        if len(self) != len(other):
            raise DimensionError("random variables differ in length")
        return RandomVariable(self.values * other.values)

    def __neg__(self) -> "RandomVariable":
        return RandomVariable(-self.values)

    def __abs__(self) -> "RandomVariable":
        return RandomVariable(abs(self.values))


def _check_on(space: FiniteProbabilitySpace, *variables: RandomVariable) -> None:
    for X in variables:
        if len(X) != space.size:
            raise DimensionError(f"variable of length {len(X)} on a space of {space.size} outcomes")


def _dot(space: FiniteProbabilitySpace, values: np.ndarray):
    if space.exact or values.dtype == object:
        return sum(w * v for w, v in zip(space.weights, values))
    return float(np.dot(space.weights, values))


def expectation(space: FiniteProbabilitySpace, X: RandomVariable):
    """``sum_w P(w) X(w)``; a Fraction on exact spaces with exact values."""
    _check_on(space, X)
    return _dot(space, X.values)


def _bound(lhs, rhs, tol):
    if isinstance(lhs, Fraction) or isinstance(rhs, Fraction):
        exact_lhs, exact_rhs = Fraction(lhs), Fraction(rhs)
        return BoundReport(float(exact_lhs), float(exact_rhs), exact_lhs <= exact_rhs, exact_lhs == exact_rhs)
    return _report(lhs, rhs, tol)


@dataclass(frozen=True)
class BellCheck:
    """The three Bell forms ``E|AB-BC| <= 1-E(AC)``, ``E|AB+BC| <= 1+E(AC)``
    and ``E|AB-BC| + E|AD+DC| <= 2``.

    ``tight_outcomes`` counts outcomes where the pointwise first form is
    an equality.
    """

    minus: BoundReport
    plus: BoundReport
    sum: BoundReport
    tight_outcomes: int

    @property
    def reports(self) -> tuple[BoundReport, BoundReport, BoundReport]:
        return (self.minus, self.plus, self.sum)

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.reports)


def bell_inequality_check(
    space: FiniteProbabilitySpace,
    A: RandomVariable,
    B: RandomVariable,
    C: RandomVariable,
    D: RandomVariable | None = None,
    tol: float = TIGHT_TOL,
) -> BellCheck:
    """Evaluate the Bell inequalities for ``A, B, C`` (and ``D``, default ``B``)
    on one space."""
    D = B if D is None else D
    _check_on(space, A, B, C, D)
    a, b, c, d = A.values, B.values, C.values, D.values
    ac = _dot(space, a * c)
    minus = _bound(_dot(space, abs(a * b - b * c)), 1 - ac, tol)
    plus = _bound(_dot(space, abs(a * b + b * c)), 1 + ac, tol)
    total = _bound(_dot(space, abs(a * b - b * c)) + _dot(space, abs(a * d + d * c)), 2, tol)
    pointwise = np.abs(np.asarray(a * b - b * c, dtype=float)) - (1 - np.asarray(a * c, dtype=float))
    return BellCheck(minus, plus, total, int(np.count_nonzero(np.abs(pointwise) <= tol)))


def single_space_bell_check(
    space: FiniteProbabilitySpace,
    S1a: RandomVariable,
    S1c: RandomVariable,
    S2b: RandomVariable,
    S2d: RandomVariable,
    tol: float = TIGHT_TOL,
) -> tuple[BoundReport, BoundReport, BoundReport]:
    """Two-particle Bell inequalities on correlations of one space.

    Returns the reports for
    ``|E(S1a S2b) - E(S1c S2b)| <= 1 - E(S1a S1c)``,
    ``|E(S1a S2b) + E(S1c S2b)| <= 1 + E(S1a S1c)`` and
    ``|E(S1a S2b) - E(S1c S2b)| + |E(S1a S2d) + E(S1c S2d)| <= 2``.
    """
    _check_on(space, S1a, S1c, S2b, S2d)
    ab = expectation(space, S1a * S2b)
    cb = expectation(space, S1c * S2b)
    ad = expectation(space, S1a * S2d)
    cd = expectation(space, S1c * S2d)
    ac = expectation(space, S1a * S1c)
    return (
        _bound(abs(ab - cb), 1 - ac, tol),
        _bound(abs(ab + cb), 1 + ac, tol),
        _bound(abs(ab - cb) + abs(ad + cd), 2, tol),
    )


def chsh_space_check(
    space: FiniteProbabilitySpace,
    S1a: RandomVariable,
    S1a_prime: RandomVariable,
    S2b: RandomVariable,
    S2b_prime: RandomVariable,
    tol: float = TIGHT_TOL,
) -> BoundReport:
    """``|<ab> + <ab'> + <a'b> - <a'b'>| <= 2`` with all four on one space."""
    _check_on(space, S1a, S1a_prime, S2b, S2b_prime)
    a, ap, b, bp = S1a.values, S1a_prime.values, S2b.values, S2b_prime.values
    value = _dot(space, a * b) + _dot(space, a * bp) + _dot(space, ap * b) - _dot(space, ap * bp)
    return _bound(abs(value), 2, tol)


def anticorrelation_support(
    space: FiniteProbabilitySpace, f: RandomVariable, g: RandomVariable, tol: float = TIGHT_TOL
) -> bool:
    """True iff ``<fg> = -1``.

    Cross-checked against the event form: the weight of ``{fg = -1}`` is 1.
    The two must agree for any ``f, g`` with values in [-1, 1].
    """
    _check_on(space, f, g)
    fg = f.values * g.values
    mean = _dot(space, fg)
    by_mean = abs(mean + 1) <= tol if not isinstance(mean, Fraction) else mean == -1
    on_event = np.array([x <= -1 + tol for x in fg], dtype=bool)
    event_weight = _dot(space, on_event.astype(object) if space.exact else on_event.astype(float))
    by_event = abs(event_weight - 1) <= tol if not isinstance(event_weight, Fraction) else event_weight == 1
    if by_mean != by_event:
        raise AssertionError(f"<fg>={mean} but P(fg=-1)={event_weight}")
    return bool(by_mean)


def antisymmetric_on_support(space: FiniteProbabilitySpace, f: RandomVariable, g: RandomVariable) -> bool:
    """``f = -g`` on every outcome of positive weight."""
    _check_on(space, f, g)
    return all(fv == -gv for w, fv, gv in zip(space.weights, f.values, g.values) if w > 0)


@dataclass(frozen=True)
class PairStats:
    """Joint probabilities ``P(X=e, Y=e')`` for dichotomic ``X, Y``."""

    p_pp: object
    p_pm: object
    p_mp: object
    p_mm: object

    def __post_init__(self):
        entries = (self.p_pp, self.p_pm, self.p_mp, self.p_mm)
        if any(p < 0 for p in entries):
            raise ValueError("pair probabilities must be nonnegative")
        total = sum(entries)
        if isinstance(total, Fraction) and any(isinstance(p, Fraction) for p in entries):
            if total != 1:
                raise ValueError(f"pair probabilities sum to {total}")
        elif abs(float(total) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"pair probabilities sum to {float(total)!r}")

    @property
    def correlation(self):
        """``E(XY) = p++ + p-- - p+- - p-+``."""
        return self.p_pp + self.p_mm - self.p_pm - self.p_mp

    def as_tuple(self) -> tuple:
        return (self.p_pp, self.p_pm, self.p_mp, self.p_mm)


def pair_stats(space: FiniteProbabilitySpace, X: RandomVariable, Y: RandomVariable) -> PairStats:
    _check_on(space, X, Y)
    if not (X.dichotomic and Y.dichotomic):
        raise ValueError("pair_stats needs +-1 valued variables")
    cells = {}
    for ex, ey in itertools.product((1, -1), repeat=2):
        mask = np.array([x == ex and y == ey for x, y in zip(X.values, Y.values)])
        cells[(ex, ey)] = _dot(space, mask.astype(object) if space.exact else mask.astype(float))
    return PairStats(cells[(1, 1)], cells[(1, -1)], cells[(-1, 1)], cells[(-1, -1)])


Response = Callable[[Hashable, Hashable, Hashable, Hashable], int]


@dataclass(frozen=True)
class NonlocalModel:
    """Hidden parameter plus both instrument settings on one product space.

    ``response1(lam, m1, m2, x)`` is particle 1's outcome in direction ``x``;
    it may read the remote setting ``m2`` (and ``response2`` may read ``m1``),
    which is exactly what Bell's locality assumption forbids.
    """

    directions: tuple
    lambda_space: FiniteProbabilitySpace
    m1_settings: tuple
    m2_settings: tuple
    response1: Response
    response2: Response
    space: FiniteProbabilitySpace = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.m1_settings) > 8 or len(self.m2_settings) > 8:
            raise ValueError("setting spaces are limited to 8 elements (exhaustive probes)")
        space = FiniteProbabilitySpace.product(
            self.lambda_space,
            FiniteProbabilitySpace.uniform(self.m1_settings, exact=self.lambda_space.exact),
            FiniteProbabilitySpace.uniform(self.m2_settings, exact=self.lambda_space.exact),
        )
        object.__setattr__(self, "space", space)

    def S1(self, x) -> RandomVariable:
        return self.space.variable(lambda w: self.response1(w[0], w[1], w[2], x))

    def S2(self, x) -> RandomVariable:
        return self.space.variable(lambda w: self.response2(w[0], w[1], w[2], x))

    def remote_sensitive(self) -> tuple[bool, bool]:
        """Exhaustive probe: does particle 1 react to ``m2``, particle 2 to ``m1``?"""
        first = second = False
        for lam in self.lambda_space.outcomes:
            for x in self.directions:
                for m1 in self.m1_settings:
                    seen = {self.response1(lam, m1, m2, x) for m2 in self.m2_settings}
                    first = first or len(seen) > 1
                for m2 in self.m2_settings:
                    seen = {self.response2(lam, m1, m2, x) for m1 in self.m1_settings}
                    second = second or len(seen) > 1
        return first, second

    def singlet_correlations(self) -> dict:
        return {x: expectation(self.space, self.S1(x) * self.S2(x)) for x in self.directions}

    def bell_reports(self, tol: float = TIGHT_TOL) -> tuple[BoundReport, BoundReport]:
        """The locality-free Bell inequality and its singlet form.

        ``|<S1a S2b> - <S2b S1c>| <= 1 - <S1a S1c>`` and
        ``|<S1a S2b> - <S2b S1c>| <= 1 + <S1a S2c>``.
        """
        a, b, c = self.directions[:3]
        s = self.space
        ab = expectation(s, self.S1(a) * self.S2(b))
        cb = expectation(s, self.S1(c) * self.S2(b))
        ac1 = expectation(s, self.S1(a) * self.S1(c))
        ac2 = expectation(s, self.S1(a) * self.S2(c))
        return _bound(abs(ab - cb), 1 - ac1, tol), _bound(abs(ab - cb), 1 + ac2, tol)


def build_nonlocal_model(directions: Sequence, exact: bool = True) -> NonlocalModel:
    """Default nonlocal model over three (or more) distinct directions.

    ``S1_x(lam, m1, m2) = eps(lam) * sigma(m1) * sigma(m2)`` and
    ``S2_x = -S1_x`` with ``eps`` uniform on +-1 and ``sigma(m) = (-1)**m``.
    Each particle's outcome flips with the remote instrument's setting, yet
    all variables live on one space.
    """
    directions = tuple(directions)
    if len(directions) < 3:
        raise ValueError("build_nonlocal_model needs at least three directions")
    if len(set(directions)) != len(directions):
        raise ValueError("directions must be distinct")
    settings = tuple(range(min(len(directions), 8)))
    lam = FiniteProbabilitySpace.uniform((1, -1), exact=exact)

    def sigma(m):
        return 1 if m % 2 == 0 else -1

    def response1(eps, m1, m2, x):
        return eps * sigma(m1) * sigma(m2)

    def response2(eps, m1, m2, x):
        return -response1(eps, m1, m2, x)

    return NonlocalModel(directions, lam, settings, settings, response1, response2)


# --- plain-text serialization -------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def _parse(tok: str):
    if "/" in tok:
        return Fraction(tok)
    if tok.lstrip("+-").isdigit():
        return int(tok)
    return float(tok)


def dumps_space(space: FiniteProbabilitySpace, variables: dict[str, RandomVariable] | None = None) -> str:
    """One outcome per line: ``label weight v1 v2 ...``.

    The header line names the variables. Labels must not contain whitespace;
    Fractions are written as ``p/q`` and read back exactly.
    """
    variables = variables or {}
    names = list(variables)
    _check_on(space, *variables.values())
    lines = ["# outcome weight " + " ".join(names)]
    for i, (label, w) in enumerate(zip(space.outcomes, space.weights)):
        label = str(label)
        if any(ch.isspace() for ch in label):
            raise ValueError(f"outcome label {label!r} contains whitespace")
        cells = [label, _fmt(w)] + [_fmt(variables[n].values[i]) for n in names]
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def loads_space(text: str) -> tuple[FiniteProbabilitySpace, dict[str, RandomVariable]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing header line")
    header = lines[0].lstrip("#").split()
    if header[:2] != ["outcome", "weight"]:
        raise ValueError(f"bad header {lines[0]!r}")
    names = header[2:]
    labels, weights, columns = [], [], [[] for _ in names]
    for ln in lines[1:]:
        cells = ln.split()
        if len(cells) != 2 + len(names):
            raise ValueError(f"expected {2 + len(names)} fields, got {ln!r}")
        labels.append(cells[0])
        weights.append(_parse(cells[1]))
        for col, tok in zip(columns, cells[2:]):
            col.append(_parse(tok))
    if any(isinstance(w, Fraction) for w in weights):
        weights = [Fraction(w) for w in weights]
    space = FiniteProbabilitySpace(labels, weights)
    return space, {n: RandomVariable(col) for n, col in zip(names, columns)}
