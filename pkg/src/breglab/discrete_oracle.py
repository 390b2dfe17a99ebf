"""Exact risk computation on small finite-support models.

Expectations here are full enumerations of the outcome space, so they act as
an oracle for the Monte Carlo lab: decomposition identities must close to
1e-12 and symmetrization must never increase risk.  The outcome space is
enumerated once in lexicographic support order; expectations sum one block
per leading coordinate and combine blocks with the fixed-shape pairwise
tree, so threaded and serial results agree bitwise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .divergence import bregman_div
from .errors import BudgetError, ConfigError, DomainError
from .estimators import EXACT, Estimator, symmetrize
from .generators import Generator
from .prng import pairwise_sum

MAX_OUTCOMES = 2_000_000

RESIDUAL_TOL = 1e-12
RB_SLACK = 1e-12
_INVARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteModel:
    """n i.i.d. draws from a finite positive support, pmf proportional to exp(-theta * v)."""

    support: tuple
    n: int

    def __post_init__(self):
        vals = tuple(float(v) for v in self.support)
        if len(vals) < 1:
            raise ConfigError("support must be non-empty")
        if any(not np.isfinite(v) or v <= 0 for v in vals):
            raise ConfigError("support values must be positive and finite")
        ordered = tuple(sorted(vals))
        if any(a == b for a, b in zip(ordered, ordered[1:])):
            raise ConfigError("support values must be distinct")
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"n must be a positive int, got {self.n!r}")
        if len(ordered) ** self.n > MAX_OUTCOMES:
            raise BudgetError(
                f"outcome space {len(ordered)}^{self.n} exceeds the {MAX_OUTCOMES} budget"
            )
        object.__setattr__(self, "support", ordered)

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def outcome_count(self) -> int:
        return self.m**self.n

    @cached_property
    def outcome_index(self) -> np.ndarray:
        """(m^n, n) support indices, lexicographic with the first coordinate slowest."""
        grids = np.meshgrid(*([np.arange(self.m)] * self.n), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.n)

    @cached_property
    def outcome_values(self) -> np.ndarray:
        return np.asarray(self.support)[self.outcome_index]

    def _check_theta(self, theta) -> float:
        theta = float(theta)
        if not (np.isfinite(theta) and theta > 0):
            raise DomainError(f"theta = {theta} is outside open interval (0.0, inf)")
        return theta

    def pmf(self, theta) -> np.ndarray:
        theta = self._check_theta(theta)
        v = np.asarray(self.support)
        w = np.exp(-theta * (v - v.min()))
        return w / np.sum(w)

    def outcome_weights(self, theta) -> np.ndarray:
        return np.prod(self.pmf(theta)[self.outcome_index], axis=1)


def _expect(dm: DiscreteModel, theta, per_outcome: np.ndarray, workers: int = 1):
    """Exact expectation of precomputed per-outcome values.

    One partial sum per leading-coordinate block, merged with the pairwise
    tree; optionally threaded with identical results.
    """
    w = dm.outcome_weights(theta)
    fv = np.asarray(per_outcome, dtype=float)
    if fv.shape[0] != dm.outcome_count:
        raise ConfigError(
            f"per-outcome values must have leading length {dm.outcome_count}, got {fv.shape[0]}"
        )
    weighted = w * fv if fv.ndim == 1 else w[:, None] * fv
    block = dm.outcome_count // dm.m
    spans = [(j * block, (j + 1) * block) for j in range(dm.m)]

    def part(span):
        return np.sum(weighted[span[0] : span[1]], axis=0)

    if workers and int(workers) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            partials = list(pool.map(part, spans))
    else:
        partials = [part(s) for s in spans]
    out = pairwise_sum(partials)
    return float(out) if np.ndim(out) == 0 else out


def exact_expectation(dm: DiscreteModel, theta, fn, workers: int = 1):
    """Exact expectation of fn over the enumerated outcome space.

    fn receives the full (m^n, n) outcome array and must return one value
    (scalar or vector) per outcome row.
    """
    return _expect(dm, theta, np.asarray(fn(dm.outcome_values), dtype=float), workers)


def exact_rao_blackwell(dm: DiscreteModel, g: Generator, e: Estimator) -> Estimator:
    """Condition on the multiset of observations by exact permutation averaging."""
    if dm.n > 8:
        raise BudgetError(f"exact permutation averaging needs n <= 8, got n = {dm.n}")
    return symmetrize(g, e, budget=EXACT)


@dataclass(frozen=True)
class RBRow:
    theta: float
    risk_estimator: float
    risk_rb: float
    gap: float


@dataclass(frozen=True)
class RBInequalityReport:
    generator_id: str
    estimator_id: str
    rb_estimator_id: str
    support: tuple
    n: int
    rows: tuple
    permutation_invariant: bool
    passed: bool
    max_violation: float
    min_gap: float


def verify_rb_inequality(dm: DiscreteModel, g: Generator, e: Estimator, theta_grid) -> RBInequalityReport:
    """Exact check that permutation averaging never increases left risk.

    passed requires risk(rb) <= risk(e) + 1e-12 at every theta.  The report
    also states whether e was already permutation-invariant, in which case
    the gap is zero rather than strictly positive.
    """
    vals = dm.outcome_values
    base = np.asarray(e.fn(vals), dtype=float)
    rb_est = exact_rao_blackwell(dm, g, e)
    rb = np.asarray(rb_est.fn(vals), dtype=float)
    scale = 1.0 + float(np.max(np.abs(base)))
    invariant = bool(np.max(np.abs(rb - base)) <= _INVARIANCE_TOL * scale)
    rows = []
    for theta in theta_grid:
        risk_base = _expect(dm, theta, bregman_div(g, theta, base))
        risk_rb = _expect(dm, theta, bregman_div(g, theta, rb))
        rows.append(RBRow(float(theta), risk_base, risk_rb, risk_base - risk_rb))
    min_gap = min(r.gap for r in rows)
    return RBInequalityReport(
        generator_id=g.id,
        estimator_id=e.id,
        rb_estimator_id=rb_est.id,
        support=dm.support,
        n=dm.n,
        rows=tuple(rows),
        permutation_invariant=invariant,
        passed=bool(min_gap >= -RB_SLACK),
        max_violation=float(max(0.0, -min_gap)),
        min_gap=float(min_gap),
    )


@dataclass(frozen=True)
class DecompositionCheck:
    generator_id: str
    estimator_id: str
    support: tuple
    n: int
    theta: float
    risk_left: float
    bias_left: float
    variance_left: float
    center_left: float
    residual_left: float
    risk_right: float
    bias_right: float
    variance_right: float
    center_right: float
    residual_right: float
    passed: bool

    @property
    def max_residual(self) -> float:
        return max(self.residual_left, self.residual_right)


def verify_decompositions(dm: DiscreteModel, g: Generator, e: Estimator, theta) -> DecompositionCheck:
    """Exact risk = bias + variance in both orientations, residuals to 1e-12."""
    delta = np.asarray(e.fn(dm.outcome_values), dtype=float)
    g.domain.check(delta, "estimate")
    theta = float(theta)

    center_left = float(g.invert_gradient(_expect(dm, theta, np.asarray(g.gradient(delta)))))
    risk_left = _expect(dm, theta, bregman_div(g, theta, delta))
    bias_left = float(bregman_div(g, theta, center_left))
    var_left = _expect(dm, theta, bregman_div(g, center_left, delta))
    residual_left = abs(risk_left - bias_left - var_left)

    center_right = _expect(dm, theta, delta)
    risk_right = _expect(dm, theta, bregman_div(g, delta, theta))
    bias_right = float(bregman_div(g, center_right, theta))
    var_right = _expect(dm, theta, bregman_div(g, delta, center_right))
    residual_right = abs(risk_right - bias_right - var_right)

    return DecompositionCheck(
        generator_id=g.id,
        estimator_id=e.id,
        support=dm.support,
        n=dm.n,
        theta=theta,
        risk_left=risk_left,
        bias_left=bias_left,
        variance_left=var_left,
        center_left=center_left,
        residual_left=residual_left,
        risk_right=risk_right,
        bias_right=bias_right,
        variance_right=var_right,
        center_right=float(center_right),
        residual_right=residual_right,
        passed=bool(max(residual_left, residual_right) <= RESIDUAL_TOL),
    )


def calibrated_type1_estimator(
    dm: DiscreteModel, g: Generator, stat_fn, theta0, est_id="calibrated"
) -> Estimator:
    """Shift a statistic in dual space so its dual mean hits grad phi(theta0).

    The shift is computed by exact enumeration at theta0, so the resulting
    estimator is dual-unbiased at that single parameter value.  Raises at
    evaluation time if a shifted dual value leaves the gradient's range.
    """
    duals = np.asarray(g.gradient(stat_fn(dm.outcome_values)), dtype=float)
    shift = float(g.gradient(float(theta0))) - _expect(dm, float(theta0), duals)

    def fn(x):
        return np.asarray(g.invert_gradient(np.asarray(g.gradient(stat_fn(x))) + shift))

    return Estimator(est_id, fn, frozenset(), 1)


def resolve_discrete_estimator(spec: str) -> Estimator:
    """Estimator selection strings for the enumeration oracle.

    Accepted forms: "mean" (alias "classical"), "first-k:<k>" (mean of the
    first k observations), "const:<v>".
    """
    if spec in ("mean", "classical"):
        return Estimator("mean", lambda x: np.mean(x, axis=-1), frozenset(), 1)
    if spec.startswith("first-k:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad first-k spec {spec!r}") from None
        if k < 1:
            raise ConfigError(f"first-k needs k >= 1, got {k}")
        return Estimator(
            f"first-k:{k}", lambda x: np.mean(x[..., :k], axis=-1), frozenset(), k
        )
    if spec.startswith("const:"):
        try:
            v = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad const spec {spec!r}") from None
        return Estimator(f"const:{v:g}", lambda x: np.full(x.shape[:-1], v), frozenset(), 1)
    raise ConfigError(f"unknown oracle estimator {spec!r}")
