"""Chameleon-effect Monte Carlo.

Each particle's state evolves by a map chosen by the particle's *own*
setting (rotation ``R_alpha`` for particle 1, ``R_{alpha+pi}`` for particle 2)
and is then read out by a +-1 response. Outcomes never depend on the remote
setting. What may depend on the measured pair is the *sample*: each series
of experiments draws its hidden parameters from its own density.

With one shared stream of hidden parameters the runs live on a single
probability space and the Bell inequality cannot fail. With separate,
pair-dependent samples it can, while locality still holds.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Protocol

import numpy as np
from scipy import integrate, optimize

from bellkit import rng
from bellkit.geometry import Setting
from bellkit.kernel import BoundReport, _report

TWO_PI = 2.0 * math.pi
FIT_TOL = 1e-3


def angle_of(x) -> float:
    if isinstance(x, Setting):
        if x.angle is None:
            raise ValueError("chameleon settings must be planar")
        return x.angle
    return float(x) % TWO_PI


# --- dynamics and responses ---------------------------------------------------

def rotate(points: np.ndarray, angle: float) -> np.ndarray:
    """Counterclockwise rotation of ``(N, 2)`` points."""
    c, s = math.cos(angle), math.sin(angle)
    x, y = points[..., 0], points[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def rotation_dynamics(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda p: rotate(p, alpha)


def antipodal_rotation_dynamics(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    # R_{alpha+pi} = -R_alpha; negation keeps the two particles exactly antipodal.
    return lambda p: -rotate(p, alpha)


def sign_of_first_coordinate(points: np.ndarray) -> np.ndarray:
    """+1 on the half-open half-plane ``x > 0 or (x == 0 and y > 0)``.

    The half-open rule makes ``r(-p) = -r(p)`` for every ``p != 0``.
    """
    x, y = points[..., 0], points[..., 1]
    return np.where((x > 0) | ((x == 0) & (y > 0)), 1, -1).astype(np.int8)


# --- sampling policies ----------------------------------------------------------

class PairPolicy(Protocol):
    policy_id: str

    def density(self, phi: np.ndarray) -> np.ndarray: ...

    def sample(self, u: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class UniformPolicy:
    policy_id: str = "uniform"

    def density(self, phi):
        return np.full(np.shape(phi), 1.0 / TWO_PI)

    def sample(self, u):
        return TWO_PI * np.asarray(u, dtype=float)


@dataclass(frozen=True)
class ArcPolicy:
    """Piecewise-constant density on the circle.

    ``breaks`` are increasing angles in [0, 2 pi) and ``weights[i]`` is the
    unnormalized density on ``[breaks[i], breaks[i+1])`` (wrapping round).
    Sampling inverts the CDF exactly.
    """

    breaks: tuple
    weights: tuple
    policy_id: str = "arc"
    _table: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if b.ndim != 1 or len(b) != len(w) or len(b) == 0:
            raise ValueError("breaks and weights must be equal-length 1D sequences")
        if np.any(np.diff(b) <= 0) or b[0] < 0 or b[-1] >= TWO_PI:
            raise ValueError("breaks must increase within [0, 2 pi)")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be nonnegative and not all zero")
        lengths = np.diff(np.append(b, b[0] + TWO_PI))
        mass = lengths * w
        total = mass.sum()
        cdf = np.concatenate([[0.0], np.cumsum(mass) / total])
        object.__setattr__(self, "_table", (b, lengths, w / total, cdf))

    def density(self, phi):
        b, _, dens, _ = self._table
        phi = np.mod(np.asarray(phi, dtype=float) - b[0], TWO_PI) + b[0]
        idx = np.searchsorted(b, phi, side="right") - 1
        return dens[np.clip(idx, 0, len(b) - 1)]

    def sample(self, u):
        b, lengths, dens, cdf = self._table
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(b) - 1)
        within = (u - cdf[idx]) / (cdf[idx + 1] - cdf[idx])
        within = np.where(np.isfinite(within), within, 0.0)
        return np.mod(b[idx] + within * lengths[idx], TWO_PI)


# --- model ----------------------------------------------------------------------

@dataclass(frozen=True)
class ChameleonModel:
    """Hidden source, setting-indexed dynamics, +-1 responses, pair policy.

    ``policy`` is ``"uniform"`` (one distribution for every pair: a single
    Kolmogorov model) or ``"fitted"`` (each pair ``(x, y)`` samples from a
    density tuned so the pair's correlation is ``-cos(x - y)``).
    """

    hidden: str = "circle"
    policy: str = "uniform"
    dynamics1: Callable = rotation_dynamics
    dynamics2: Callable = antipodal_rotation_dynamics
    response1: Callable = sign_of_first_coordinate
    response2: Callable = sign_of_first_coordinate

    def __post_init__(self):
        if self.hidden not in ("circle", "disk"):
            raise ValueError(f"hidden must be 'circle' or 'disk', got {self.hidden!r}")
        if self.policy not in ("uniform", "fitted"):
            raise ValueError(f"policy must be 'uniform' or 'fitted', got {self.policy!r}")

    @property
    def is_default(self) -> bool:
        return (
            self.dynamics1 is rotation_dynamics
            and self.dynamics2 is antipodal_rotation_dynamics
            and self.response1 is sign_of_first_coordinate
            and self.response2 is sign_of_first_coordinate
        )

    def config(self) -> dict:
        if not self.is_default:
            raise ValueError("only the default dynamics/responses are serializable")
        return {"hidden": self.hidden, "policy": self.policy}

    def outcome1(self, points, x) -> np.ndarray:
        return self.response1(self.dynamics1(angle_of(x))(points))

    def outcome2(self, points, y) -> np.ndarray:
        return self.response2(self.dynamics2(angle_of(y))(points))

    def outcomes(self, points, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Joint measurement at settings ``(x, y)``; particle ``j`` only ever
        sees its own setting."""
        return self.outcome1(points, x), self.outcome2(points, y)

    def product_on_circle(self, phi, x, y) -> np.ndarray:
        pts = circle_points(np.atleast_1d(np.asarray(phi, dtype=float)))
        o1, o2 = self.outcomes(pts, x, y)
        return (o1.astype(np.int64) * o2).astype(float)

    def policy_for(self, x, y) -> PairPolicy:
        if self.policy == "uniform":
            return UniformPolicy()
        return fit_pair_policy(self, angle_of(x), angle_of(y))


def circle_points(phi: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


# --- policy fitting ---------------------------------------------------------------

def _breakpoints(model: ChameleonModel, x: float, y: float, grid: int = 1 << 14) -> np.ndarray:
    """Angles where the outcome product changes, located by bisection."""
    phi = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    prod = model.product_on_circle(phi, x, y)
    change = np.nonzero(prod != np.roll(prod, -1))[0]
    found = [0.0]
    for i in change:  # two sign changes inside one cell cancel and are missed
        lo, hi = phi[i], phi[i] + TWO_PI / grid
        p_lo = prod[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if model.product_on_circle(mid, x, y)[0] == p_lo:
                lo = mid
            else:
                hi = mid
        found.append(hi)
    found = np.sort(np.mod(np.array(found), TWO_PI))
    keep = np.append(True, np.diff(found) > 1e-13)
    return found[keep]


def _arc_table(model, x, y):
    breaks = _breakpoints(model, x, y)
    lengths = np.diff(np.append(breaks, TWO_PI + breaks[0]))
    mids = breaks + lengths / 2
    prod = model.product_on_circle(np.mod(mids, TWO_PI), x, y)
    return breaks, lengths, prod


def _tilted_corr(beta, lengths, prod):
    mass = lengths * np.exp(beta * (prod > 0))
    return float(np.dot(mass, prod) / mass.sum())


def policy_correlation(model: ChameleonModel, policy: PairPolicy, x, y) -> float:
    """Independent quadrature of ``int density(phi) * S1 S2 dphi``."""
    x, y = angle_of(x), angle_of(y)
    f = lambda t: float(policy.density(t) * model.product_on_circle(t, x, y)[0])  # noqa: E731
    pts = _breakpoints(model, x, y)
    if isinstance(policy, ArcPolicy):
        pts = np.union1d(pts, np.asarray(policy.breaks))
    val, _ = integrate.quad(f, 0.0, TWO_PI, points=[p for p in pts if 0 < p < TWO_PI], limit=500)
    return val


def policy_probability(model: ChameleonModel, policy: PairPolicy, indicator: Callable, breaks) -> float:
    """``int density(phi) * indicator(phi) dphi`` by adaptive quadrature."""
    f = lambda t: float(policy.density(t) * indicator(np.atleast_1d(t))[0])  # noqa: E731
    pts = [p for p in np.unique(breaks) if 0 < p < TWO_PI]
    val, _ = integrate.quad(f, 0.0, TWO_PI, points=pts, limit=500)
    return val


@lru_cache(maxsize=256)
def _fit_cached(model: ChameleonModel, x: float, y: float, target: float) -> ArcPolicy:
    breaks, lengths, prod = _arc_table(model, x, y)
    uniform = _tilted_corr(0.0, lengths, prod)
    if abs(uniform - target) <= 1e-12:
        beta = 0.0
    else:
        lo, hi = -60.0, 60.0
        g = lambda b: _tilted_corr(b, lengths, prod) - target  # noqa: E731
        if g(lo) > 0 or g(hi) < 0:
            raise ValueError(f"target correlation {target} unreachable for pair ({x}, {y})")
        beta = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    weights = np.exp(beta * (prod > 0))
    policy = ArcPolicy(tuple(breaks.tolist()), tuple(weights.tolist()), policy_id=f"fitted:{x!r}:{y!r}")
    achieved = policy_correlation(model, policy, x, y)
    if abs(achieved - target) > FIT_TOL:
        raise RuntimeError(f"policy fit for ({x}, {y}) reached {achieved}, target {target}")
    return policy


def fit_pair_policy(model: ChameleonModel, x, y, target: float | None = None) -> ArcPolicy:
    """Tilt the hidden-parameter density on the arcs where ``S1 S2 = +1`` so
    the pair's correlation equals ``target`` (default ``-cos(x - y)``).

    The tilt is found by root-finding on the arc sums and then checked by an
    independent adaptive quadrature to within ``1e-3``.
    """
    x, y = angle_of(x), angle_of(y)
    if target is None:
        target = -math.cos(x - y)
    return _fit_cached(model, x, y, float(target))


# --- runs -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentRun:
    """One series of ``N`` pair measurements at ``pair = (x, y)``."""

    pair: tuple[float, float]
    lambda_ids: np.ndarray
    outcome1: np.ndarray
    outcome2: np.ndarray
    seed: int
    stream: str
    policy_id: str
    hidden: str
    lambdas: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.outcome1)

    @property
    def product_sum(self) -> int:
        return int(np.sum(self.outcome1.astype(np.int64) * self.outcome2))

    @property
    def empirical_corr(self) -> float:
        """``(1/N) sum_j o1_j o2_j``; integer sum, so exact before the division."""
        return self.product_sum / self.n if self.n else 0.0

    def manifest(self) -> dict:
        return {
            "pair": [self.pair[0], self.pair[1]],
            "n": self.n,
            "seed": self.seed,
            "stream": self.stream,
            "policy": self.policy_id,
            "hidden": self.hidden,
            "retain_lambda": self.lambdas is not None,
        }

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.lambda_ids, self.outcome1, self.outcome2):
            h.update(np.ascontiguousarray(arr).tobytes())
        if self.lambdas is not None:
            h.update(np.ascontiguousarray(self.lambdas).tobytes())
        return h.hexdigest()

    def to_json(self) -> str:
        record = {
            "manifest": self.manifest(),
            "empirical_corr": self.empirical_corr,
            "product_sum": self.product_sum,
            "digest": self.digest(),
        }
        return json.dumps(record, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda_id", "outcome1", "outcome2"])
        w.writerows(zip(self.lambda_ids.tolist(), self.outcome1.tolist(), self.outcome2.tolist()))
        return buf.getvalue()

    def subset(self, mask: np.ndarray) -> "ExperimentRun":
        return ExperimentRun(
            self.pair,
            self.lambda_ids[mask],
            self.outcome1[mask],
            self.outcome2[mask],
            self.seed,
            self.stream,
            self.policy_id,
            self.hidden,
            None if self.lambdas is None else self.lambdas[mask],
        )


def hidden_points(hidden: str, policy: PairPolicy, seed: int, stream: str, n: int, start: int = 0) -> np.ndarray:
    """Hidden states for draws ``start .. start+n-1`` of a stream.

    Draw ``j`` is a pure function of ``(seed, stream, j)``: the angle comes
    from the policy's inverse CDF, the radius (disk mode) from a second
    labeled stream, ``r = sqrt(1 - u)`` so that ``r > 0``.
    """
    phi = policy.sample(rng.uniforms(seed, stream, "angle", start=start, count=n))
    pts = circle_points(phi)
    if hidden == "disk":
        r = np.sqrt(1.0 - rng.uniforms(seed, stream, "radius", start=start, count=n))
        pts = pts * r[:, None]
    return pts


def run_pair_experiment(
    model: ChameleonModel,
    pair: tuple,
    n: int,
    seed: int,
    stream: str | None = None,
    retain_lambda: bool = False,
    lambdas: np.ndarray | None = None,
) -> ExperimentRun:
    """Measure ``n`` pairs at ``pair = (x, y)``.

    ``stream`` labels the hidden-parameter source; runs given the same
    stream (and policy) see the very same hidden parameters. The default
    stream is private to the pair. Explicit ``lambdas`` bypass source and
    policy.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x, y = angle_of(pair[0]), angle_of(pair[1])
    stream = f"pair:{x!r}:{y!r}" if stream is None else stream
    if lambdas is not None:
        pts = np.asarray(lambdas, dtype=float).reshape(-1, 2)
        if len(pts) != n:
            raise ValueError("explicit lambdas must have n rows")
        policy_id = "explicit"
    else:
        policy = model.policy_for(x, y)
        policy_id = policy.policy_id
        pts = hidden_points(model.hidden, policy, seed, stream, n)
    o1, o2 = model.outcomes(pts, x, y)
    return ExperimentRun(
        (x, y),
        np.arange(n, dtype=np.int64),
        o1.astype(np.int8),
        o2.astype(np.int8),
        int(seed),
        stream,
        policy_id,
        model.hidden,
        pts if (retain_lambda or lambdas is not None) else None,
    )


def replay(manifest: dict, model: ChameleonModel | None = None) -> ExperimentRun:
    """Re-execute a run from its manifest."""
    model = model or ChameleonModel(hidden=manifest["hidden"], policy=_policy_kind(manifest["policy"]))
    run = run_pair_experiment(
        model, tuple(manifest["pair"]), manifest["n"], manifest["seed"],
        stream=manifest["stream"], retain_lambda=manifest["retain_lambda"],
    )
    if run.policy_id != manifest["policy"]:
        raise ValueError(f"policy mismatch on replay: {run.policy_id} != {manifest['policy']}")
    return run


def _policy_kind(policy_id: str) -> str:
    return "fitted" if policy_id.startswith("fitted:") else "uniform"


def shares_hidden(run1: ExperimentRun, run2: ExperimentRun) -> bool:
    """Same hidden parameter at every index (``p^I_j = p^II_j``)."""
    if run1.n != run2.n:
        return False
    if run1.lambdas is not None and run2.lambdas is not None:
        return bool(np.array_equal(run1.lambdas, run2.lambdas))
    same_source = (run1.seed, run1.stream, run1.policy_id, run1.hidden) == (
        run2.seed, run2.stream, run2.policy_id, run2.hidden)
    return same_source and run1.policy_id != "explicit" and bool(np.array_equal(run1.lambda_ids, run2.lambda_ids))


# --- Bell expressions on runs --------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalBell:
    """``|<S1_x S2_b>_I + sign * <S1_z S2_b>_II|`` against the bounds in force.

    ``bound`` is the Bell bound that applies to the regime: in the
    single-space regime ``1 + sign * <S1_x S1_z>`` on the shared sample; in
    the separate-sample regime the counterfactual value
    ``1 - sign * <S1_x S2_z>_III`` (which needs a third run) or, without one,
    the only honest bound 2.
    """

    lhs: float
    bound: float
    regime: str
    sign: int
    sigma: float
    separate_bound: float = 2.0
    single_space_bound: float | None = None
    counterfactual_bound: float | None = None

    @property
    def margin(self) -> float:
        return self.lhs - self.bound

    @property
    def report(self) -> BoundReport:
        return _report(self.lhs, self.bound)

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "sign": self.sign,
            "lhs": self.lhs,
            "bound": self.bound,
            "margin": self.margin,
            "sigma": self.sigma,
            "separate_bound": self.separate_bound,
            "single_space_bound": self.single_space_bound,
            "counterfactual_bound": self.counterfactual_bound,
        }


def _se(corr: float, n: int) -> float:
    return math.sqrt(max(1.0 - corr * corr, 0.0) / n)


def empirical_bell_expression(
    run1: ExperimentRun, run2: ExperimentRun, sign: int = -1, run3: ExperimentRun | None = None
) -> EmpiricalBell:
    """Bell combination from two runs sharing particle 2's setting.

    ``sign=-1`` is the difference of correlations; ``sign=+1`` the sum,
    which is the form the singlet angles ``0, pi/4, pi/2`` violate.
    ``run3`` measures ``(x, z)`` and supplies the counterfactual bound.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if run1.n != run2.n:
        raise ValueError("runs must have equal N")
    if run1.pair[1] != run2.pair[1]:
        raise ValueError("runs must share particle 2's setting")
    c1, c2 = run1.empirical_corr, run2.empirical_corr
    n = run1.n
    # Both sides as integer counts over the same N: comparisons stay exact.
    lhs = abs(run1.product_sum + sign * run2.product_sum) / n
    single = counter = None
    variances = [_se(c1, n) ** 2, _se(c2, n) ** 2]
    if shares_hidden(run1, run2):
        regime = "single-space"
        s11 = int(np.sum(run1.outcome1.astype(np.int64) * run2.outcome1))
        single = (n + sign * s11) / n
        bound = single
    else:
        regime = "separate-sample"
        bound = 2.0
    if run3 is not None:
        if run3.pair[0] != run1.pair[0] or run3.pair[1] != run2.pair[0]:
            raise ValueError("run3 must measure (x, z)")
        counter = (run3.n - sign * run3.product_sum) / run3.n
        variances.append(_se(run3.empirical_corr, run3.n) ** 2)
        if regime == "separate-sample":
            bound = counter
    return EmpiricalBell(lhs, bound, regime, sign, math.sqrt(sum(variances)), 2.0, single, counter)


def cleaning(run1: ExperimentRun, run2: ExperimentRun) -> tuple[ExperimentRun, ExperimentRun, int]:
    """Keep only indices where particle 2's shared-setting outcome agrees
    across the two series."""
    if run1.n != run2.n:
        raise ValueError("runs must have equal N")
    keep = run1.outcome2 == run2.outcome2
    return run1.subset(keep), run2.subset(keep), int(run1.n - np.count_nonzero(keep))


def counterfactual_substitute(
    model: ChameleonModel, run: ExperimentRun, measured, substituted
) -> tuple[ExperimentRun, int]:
    """Re-measure particle 2 at ``substituted`` on the same hidden states.

    Returns the recomputed run and the number of indices where the recorded
    particle-2 outcome (taken at ``measured``) differs from
    ``-S1_substituted``, i.e. where the inference "what I saw is what the
    other direction would have shown" is false.
    """
    if run.lambdas is None:
        raise ValueError("run did not retain its hidden parameters")
    measured, substituted = angle_of(measured), angle_of(substituted)
    if measured != run.pair[1]:
        raise ValueError(f"run measured particle 2 at {run.pair[1]}, not {measured}")
    new2 = model.outcome2(run.lambdas, substituted).astype(np.int8)
    inferred = -model.outcome1(run.lambdas, substituted).astype(np.int8)
    mismatch = int(np.count_nonzero(run.outcome2 != inferred))
    rerun = ExperimentRun(
        (run.pair[0], substituted), run.lambda_ids, run.outcome1, new2,
        run.seed, run.stream, run.policy_id, run.hidden, run.lambdas,
    )
    return rerun, mismatch


def predicted_mismatch(model: ChameleonModel, pair: tuple, substituted) -> float:
    """Quadrature value of the mismatch probability for runs at ``pair``."""
    x, y = angle_of(pair[0]), angle_of(pair[1])
    z = angle_of(substituted)
    policy = model.policy_for(x, y)

    def indicator(phi):
        pts = circle_points(phi)
        return (model.outcome2(pts, y) != -model.outcome1(pts, z)).astype(float)

    breaks = np.concatenate([_breakpoints(model, x, y), _breakpoints(model, z, y)])
    if isinstance(policy, ArcPolicy):
        breaks = np.concatenate([breaks, policy.breaks])
    return policy_probability(model, policy, indicator, breaks)


def locality_probe(model: ChameleonModel, settings, points: np.ndarray) -> bool:
    """Exhaustive remote-setting insensitivity over ``settings x settings``."""
    settings = [angle_of(s) for s in settings]
    for x in settings:
        ref1 = ref2 = None
        for y in settings:
            o1, _ = model.outcomes(points, x, y)
            _, o2 = model.outcomes(points, y, x)
            if ref1 is None:
                ref1, ref2 = o1, o2
            elif not (np.array_equal(o1, ref1) and np.array_equal(o2, ref2)):
                return False
    return True


def coincidence_protocol(k: int, trials: int, seed: int) -> float:
    """Both observers pick uniformly among ``k`` agreed directions; return the
    fraction of trials where the picks coincide (expected ``1/k``)."""
    if k < 1 or trials < 1:
        raise ValueError("k and trials must be >= 1")
    first = rng.integers(seed, "coincidence", k, "observer1", high=k, count=trials)
    second = rng.integers(seed, "coincidence", k, "observer2", high=k, count=trials)
    return int(np.count_nonzero(first == second)) / trials
