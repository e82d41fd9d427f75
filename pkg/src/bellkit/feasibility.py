"""Can three pair distributions come from one joint distribution?

The extension space is the Bell triple ``(S1a, S2b, S1c)`` in {-1, +1}^3.
A symmetric family fixes the three numbers

* ``p_ab = P(S1a=+, S2b=+)``
* ``p_bc = P(S1c=+, S2b=+)``
* ``p_ac = P(S1a=+, S1c=+)``

with every single-variable marginal equal to 1/2, so each pair has
``P++ = P--`` and ``P+- = P-+ = 1/2 - P++`` and correlation ``4 P++ - 1``.
Under the singlet reduction ``S2x = -S1x`` the triple is particle 1's
three spins with the middle one reflected; :meth:`JointExtension.sextuple`
recovers the six-variable configuration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

from bellkit.probability import FiniteProbabilitySpace, PairStats, RandomVariable, pair_stats
from bellkit.simplex import solve_feasibility

HALF = Fraction(1, 2)
OUTCOMES = tuple(itertools.product((1, -1), repeat=3))
PAIRS = {"ab": (0, 1), "bc": (2, 1), "ac": (0, 2)}

# Bell-type facets 1 + s_ab k_ab + s_bc k_bc + s_ac k_ac >= 0 of the
# correlation polytope of three +-1 variables (s_ab s_bc s_ac = +1).
FACETS = {
    "1+k_ab+k_bc+k_ac": (1, 1, 1),
    "1+k_ab-k_bc-k_ac": (1, -1, -1),
    "1-k_ab+k_bc-k_ac": (-1, 1, -1),
    "1-k_ab-k_bc+k_ac": (-1, -1, 1),
}


def _num(x):
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Real):
        return float(x)
    raise TypeError(f"not a number: {x!r}")


@dataclass(frozen=True)
class SymmetricPairFamily:
    p_ab: Real
    p_bc: Real
    p_ac: Real

    def __post_init__(self):
        for name in ("p_ab", "p_bc", "p_ac"):
            v = _num(getattr(self, name))
            if not 0 <= v <= HALF:
                raise ValueError(f"{name}={v} outside [0, 1/2]")
            object.__setattr__(self, name, v)

    @classmethod
    def parse(cls, text: str) -> "SymmetricPairFamily":
        """``"0,1/2,1/2"`` -> exact family."""
        parts = [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated numbers, got {text!r}")
        return cls(*(Fraction(p) for p in parts))

    @property
    def values(self) -> tuple:
        return (self.p_ab, self.p_bc, self.p_ac)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.values)

    def to_exact(self) -> "SymmetricPairFamily":
        return SymmetricPairFamily(*(Fraction(v) for v in self.values))

    def correlations(self) -> tuple:
        return tuple(4 * p - 1 for p in self.values)

    def pair(self, name: str) -> PairStats:
        p = getattr(self, f"p_{name}")
        return PairStats(p, HALF - p, HALF - p, p)

    def as_strings(self) -> list[str]:
        return [str(v) for v in self.values]


@dataclass(frozen=True)
class PairBoundReport:
    """Probability form ``|p_ab - p_bc| + p_ac <= 1/2`` and the correlation
    form ``|k_ab - k_bc| <= 1 - k_ac``, which must agree."""

    lhs: Real
    rhs: Real
    corr_lhs: Real
    corr_rhs: Real
    holds: bool
    corr_holds: bool

    @property
    def margin(self):
        return self.lhs - self.rhs

    @property
    def equivalent(self) -> bool:
        return self.holds == self.corr_holds

    def as_dict(self) -> dict:
        return {
            "lhs": _out(self.lhs),
            "rhs": _out(self.rhs),
            "holds": self.holds,
            "correlation_form": {"lhs": _out(self.corr_lhs), "rhs": _out(self.corr_rhs), "holds": self.corr_holds},
        }


def _out(x):
    return str(x) if isinstance(x, Fraction) else float(x)


def pair_bound_check(family: SymmetricPairFamily, tol: float = 1e-12) -> PairBoundReport:
    p_ab, p_bc, p_ac = family.values
    k_ab, k_bc, k_ac = family.correlations()
    lhs, rhs = abs(p_ab - p_bc) + p_ac, HALF
    corr_lhs, corr_rhs = abs(k_ab - k_bc), 1 - k_ac
    if family.exact:
        holds, corr_holds = lhs <= rhs, corr_lhs <= corr_rhs
    else:
        holds, corr_holds = lhs <= rhs + tol, corr_lhs <= corr_rhs + 4 * tol
    report = PairBoundReport(lhs, rhs, corr_lhs, corr_rhs, bool(holds), bool(corr_holds))
    if not report.equivalent:
        raise AssertionError(f"probability and correlation forms disagree for {family}")
    return report


def constraint_system(family: SymmetricPairFamily):
    """Rows: normalization, three marginals, three ``P++`` cells; one
    column per outcome of the triple."""
    fam = family.to_exact()
    rows, rhs = [[1] * 8], [Fraction(1)]
    for k in range(3):
        rows.append([int(o[k] == 1) for o in OUTCOMES])
        rhs.append(HALF)
    for name, p in zip(("ab", "bc", "ac"), fam.values):
        i, j = PAIRS[name]
        rows.append([int(o[i] == 1 and o[j] == 1) for o in OUTCOMES])
        rhs.append(p)
    return rows, rhs


@dataclass(frozen=True)
class JointExtension:
    """Weights on the eight outcomes ``(S1a, S2b, S1c)``."""

    weights: tuple

    def space(self) -> FiniteProbabilitySpace:
        return FiniteProbabilitySpace(OUTCOMES, self.weights)

    def variables(self) -> dict[str, RandomVariable]:
        return {
            "S1a": RandomVariable([o[0] for o in OUTCOMES]),
            "S2b": RandomVariable([o[1] for o in OUTCOMES]),
            "S1c": RandomVariable([o[2] for o in OUTCOMES]),
        }

    def marginals(self) -> dict[str, PairStats]:
        space, v = self.space(), self.variables()
        return {
            "ab": pair_stats(space, v["S1a"], v["S2b"]),
            "bc": pair_stats(space, v["S1c"], v["S2b"]),
            "ac": pair_stats(space, v["S1a"], v["S1c"]),
        }

    def reproduces(self, family: SymmetricPairFamily) -> bool:
        fam = family.to_exact()
        m = self.marginals()
        return all(m[name].as_tuple() == fam.pair(name).as_tuple() for name in ("ab", "bc", "ac"))

    @staticmethod
    def sextuple(outcome: tuple) -> tuple:
        """``(S1a, S2b, S1c)`` -> ``(S1a, S1b, S1c, S2a, S2b, S2c)``."""
        x, y, z = outcome
        return (x, -y, z, -x, y, -z)

    def as_dict(self) -> dict:
        return {"".join("+" if s > 0 else "-" for s in o): str(w) for o, w in zip(OUTCOMES, self.weights) if w}


@dataclass(frozen=True)
class Certificate:
    """Farkas certificate: ``y . A_j >= 0`` on every outcome column and
    ``y . b < 0`` on the target."""

    row_coefficients: tuple
    vertex_values: tuple
    target_value: Fraction
    violated_facets: tuple

    @property
    def valid(self) -> bool:
        return all(v >= 0 for v in self.vertex_values) and self.target_value < 0

    def as_dict(self) -> dict:
        return {
            "row_coefficients": [str(v) for v in self.row_coefficients],
            "vertex_values": [str(v) for v in self.vertex_values],
            "target_value": str(self.target_value),
            "violated_facets": list(self.violated_facets),
        }


@dataclass(frozen=True)
class ExtensionResult:
    family: SymmetricPairFamily
    feasible: bool
    witness: JointExtension | None = None
    certificate: Certificate | None = None


def violated_facets(family: SymmetricPairFamily) -> tuple[str, ...]:
    k = family.to_exact().correlations()
    return tuple(name for name, s in FACETS.items() if 1 + s[0] * k[0] + s[1] * k[1] + s[2] * k[2] < 0)


def extend_to_joint(family: SymmetricPairFamily) -> ExtensionResult:
    """Decide in exact arithmetic whether a joint law on the triple
    reproduces all three pairs; return a witness or a certificate."""
    A, b = constraint_system(family)
    result = solve_feasibility(A, b)
    if result.feasible:
        return ExtensionResult(family, True, witness=JointExtension(result.x))
    y = result.certificate
    vertex_values = tuple(sum(y[i] * A[i][j] for i in range(len(A))) for j in range(8))
    target = sum(yi * bi for yi, bi in zip(y, b))
    cert = Certificate(y, vertex_values, target, violated_facets(family))
    return ExtensionResult(family, False, certificate=cert)


def counterexample_family(margin: Real) -> SymmetricPairFamily:
    """A family whose probability-form lhs exceeds 1/2 by exactly ``margin``.

    ``(0, 1/2, margin)``: the first two pairs force ``S1a = -S2b = -S1c``,
    so any positive ``P(S1a=+, S1c=+)`` is impossible.
    """
    m = Fraction(margin) if not isinstance(margin, str) else Fraction(margin)
    if m < 0 or m > HALF:
        raise ValueError(f"margin must lie in [0, 1/2], got {margin}")
    return SymmetricPairFamily(Fraction(0), HALF, m)


def singlet_geometry_family(a, b, c) -> SymmetricPairFamily:
    """Family built from singlet correlations ``-x.y`` at settings ``a, b, c``.

    The singlet inequality ``|a.b + b.c| <= 1 + a.c`` is the plus-form Bell
    inequality; reversing the third direction turns it into the minus form
    tested by :func:`pair_bound_check`, giving
    ``p_ab = (1 - a.b)/4``, ``p_bc = (1 + b.c)/4``, ``p_ac = (1 - a.c)/4``.
    """
    from bellkit.geometry import as_setting

    a, b, c = as_setting(a), as_setting(b), as_setting(c)
    ab, bc, ac = a.dot(b), b.dot(c), a.dot(c)
    clip = lambda p: min(max(p, 0.0), 0.5)  # noqa: E731  rounding at |x.y| = 1
    return SymmetricPairFamily(clip((1 - ab) / 4), clip((1 + bc) / 4), clip((1 - ac) / 4))


@dataclass(frozen=True)
class SweepSummary:
    denominator: int
    families: int
    feasible: int
    bound_holds: int
    unsound: tuple  # feasible but violating the pair bound; must stay empty
    gap: tuple  # pair bound holds, yet no extension exists
    witnesses_exact: bool
    certificates_valid: bool
    facets_agree: bool
    records: tuple = field(default=(), repr=False)  # (values, bound_holds, feasible) per family


def feasibility_sweep(denominator: int = 32) -> SweepSummary:
    """Classify every family on the grid ``k/denominator`` over [0, 1/2]^3."""
    if denominator < 2 or denominator % 2:
        raise ValueError("denominator must be an even integer >= 2")
    grid = [Fraction(k, denominator) for k in range(denominator // 2 + 1)]
    feasible = holds = 0
    unsound, gap, records = [], [], []
    witnesses_exact = certificates_valid = facets_agree = True
    for values in itertools.product(grid, repeat=3):
        fam = SymmetricPairFamily(*values)
        pb = pair_bound_check(fam)
        ext = extend_to_joint(fam)
        holds += pb.holds
        feasible += ext.feasible
        if ext.feasible:
            witnesses_exact &= ext.witness.reproduces(fam)
            if not pb.holds:
                unsound.append(values)
        else:
            certificates_valid &= ext.certificate.valid
            if pb.holds:
                gap.append(values)
        facets_agree &= ext.feasible == (not violated_facets(fam))
        records.append((values, pb.holds, ext.feasible))
    return SweepSummary(
        denominator,
        len(grid) ** 3,
        feasible,
        holds,
        tuple(unsound),
        tuple(gap),
        witnesses_exact,
        certificates_valid,
        facets_agree,
        tuple(records),
    )
