"""Monte Carlo risk estimation, unbiasedness checks, and paired comparisons.

Replicate streams are fully determined by (model, theta, n, replicates,
seed); workers only change how chunks are scheduled, never the draws, so
every report here is bitwise identical for any worker count.  Grid-valued
checks derive the stream for grid point i from derive_key(seed, i); paired
operations reuse one replicate set for every arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .divergence import bregman_div
from .errors import ConfigError, NumericError
from .estimators import Estimator
from .generators import Generator
from .models import Model
from .prng import derive_key

ORIENTATIONS = ("left", "right")
MIN_REPLICATES = 1000
PASS_Z = 4.0
MAX_DROP_FRACTION = 1e-3
_GRID_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class RiskReport:
    model_id: str
    generator_id: str
    estimator_id: str
    theta: float
    n: int
    replicates: int
    seed: int
    orientation: str
    risk: float
    bias_term: float
    variance_term: float
    center: float
    se_risk: float
    loss_excess_kurtosis: float
    dropped: int
    valid: bool


@dataclass(frozen=True)
class UnbiasednessReport:
    kind: str  # "type1" | "type2"
    model_id: str
    generator_id: str  # "" for type2 checks
    estimator_id: str
    theta: float
    n: int
    replicates: int
    seed: int
    mean: float
    target: float
    se: float
    z: float
    verdict: bool
    dropped: int
    valid: bool


@dataclass(frozen=True)
class LehmannGridReport:
    model_id: str
    generator_id: str
    estimator_id: str
    theta: float
    n: int
    replicates: int
    seed: int
    orientation: str
    grid: tuple
    means: tuple
    ses: tuple
    theta_index: int
    argmin_index: int
    tie_broken_toward_theta: bool
    dropped: int
    valid: bool


@dataclass(frozen=True)
class ComparisonReport:
    model_id: str
    generator_id: str
    estimator_id_1: str
    estimator_id_2: str
    theta: float
    n: int
    replicates: int
    seed: int
    orientation: str
    risk_1: float
    risk_2: float
    risk_diff: float
    se_diff: float
    dropped: int
    valid: bool


def _check_orientation(orientation: str) -> str:
    if orientation not in ORIENTATIONS:
        raise ConfigError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    return orientation


def _check_scalar_generator(g: Generator) -> None:
    if g.dimension != 1:
        raise ConfigError("scalar-parameter models need a one-dimensional generator")


def _check_setup(model: Model, theta, n: int, estimators, g: Generator | None, replicates: int):
    theta = float(theta)
    model.param_space.check(np.asarray(theta), "theta")
    if g is not None:
        _check_scalar_generator(g)
        g.domain.check(np.asarray(theta), "theta")
    if int(replicates) < MIN_REPLICATES:
        raise ConfigError(f"replicates must be >= {MIN_REPLICATES}, got {replicates}")
    for e in estimators:
        if int(n) < e.requires_min_n:
            raise ConfigError(f"estimator '{e.id}' needs n >= {e.requires_min_n}, got {n}")
    return theta


def _simulate(model: Model, theta, n, estimators, replicates, seed, workers=1):
    """Estimates per estimator id, all computed from one shared draw."""
    seen = {}
    for e in estimators:
        if e.id in seen and seen[e.id] is not e:
            raise ConfigError(f"two distinct estimators share the id '{e.id}'")
        seen[e.id] = e
    x = model.draw(theta, int(n), int(replicates), int(seed), workers)
    return {e.id: np.asarray(e(x), dtype=float) for e in seen.values()}


def _se(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1) / math.sqrt(values.shape[0]))


def _z_score(mean: float, target: float, se: float) -> float:
    if se == 0.0:
        return 0.0 if mean == target else math.copysign(math.inf, mean - target)
    return (mean - target) / se


def estimate_risk(
    model: Model,
    theta,
    n: int,
    estimator: Estimator,
    g: Generator,
    orientation: str,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> RiskReport:
    """Monte Carlo risk with its bias/variance split at the matching center.

    Left orientation: loss D(theta, delta), center is the inverse gradient of
    the mean dual estimate.  Right orientation: loss D(delta, theta), center
    is the plain mean estimate.  Replicates whose estimate leaves the
    generator's domain are dropped and counted; the report is flagged invalid
    when more than 0.1 percent drop.
    """
    _check_orientation(orientation)
    theta = _check_setup(model, theta, n, [estimator], g, replicates)
    est = _simulate(model, theta, n, [estimator], replicates, seed, workers)[estimator.id]
    mask = g.domain.mask(est)
    dropped = int(est.shape[0] - np.count_nonzero(mask))
    vals = est[mask]
    if vals.shape[0] < 2:
        raise NumericError("fewer than two replicates stayed inside the generator domain")
    if orientation == "left":
        center = float(g.invert_gradient(np.mean(g.gradient(vals))))
        losses = bregman_div(g, theta, vals)
        bias = float(bregman_div(g, theta, center))
        variance = float(np.mean(bregman_div(g, center, vals)))
    else:
        center = float(np.mean(vals))
        losses = bregman_div(g, vals, theta)
        bias = float(bregman_div(g, center, theta))
        variance = float(np.mean(bregman_div(g, vals, center)))
    # zero-variance losses have no defined kurtosis; report 0 so reports stay
    # strict JSON instead of carrying NaN
    kurt = 0.0 if np.ptp(losses) == 0.0 else float(
        scipy.stats.kurtosis(losses, fisher=True, bias=True)
    )
    return RiskReport(
        model_id=model.id,
        generator_id=g.id,
        estimator_id=estimator.id,
        theta=theta,
        n=int(n),
        replicates=int(replicates),
        seed=int(seed),
        orientation=orientation,
        risk=float(np.mean(losses)),
        bias_term=bias,
        variance_term=variance,
        center=center,
        se_risk=_se(losses),
        loss_excess_kurtosis=kurt,
        dropped=dropped,
        valid=bool(dropped <= MAX_DROP_FRACTION * int(replicates)),
    )


def _mean_check(values: np.ndarray, target: float, total: int):
    mean = float(np.mean(values))
    se = _se(values)
    z = _z_score(mean, target, se)
    dropped = total - values.shape[0]
    return mean, se, z, dropped


def check_type1_unbiased(
    model: Model,
    theta_grid,
    estimator: Estimator,
    g: Generator,
    n: int,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> list[UnbiasednessReport]:
    """Test whether the mean dual estimate matches grad phi(theta) on a grid.

    Verdict is PASS when |z| <= 4 with z = (mean - target) / se.
    """
    reports = []
    for i, theta in enumerate(theta_grid):
        theta = _check_setup(model, theta, n, [estimator], g, replicates)
        est = _simulate(
            model, theta, n, [estimator], replicates, derive_key(seed, i), workers
        )[estimator.id]
        vals = est[g.domain.mask(est)]
        if vals.shape[0] < 2:
            raise NumericError("fewer than two replicates stayed inside the generator domain")
        duals = np.asarray(g.gradient(vals), dtype=float)
        target = float(g.gradient(theta))
        mean, se, z, dropped = _mean_check(duals, target, est.shape[0])
        reports.append(
            UnbiasednessReport(
                kind="type1",
                model_id=model.id,
                generator_id=g.id,
                estimator_id=estimator.id,
                theta=theta,
                n=int(n),
                replicates=int(replicates),
                seed=int(seed),
                mean=mean,
                target=target,
                se=se,
                z=float(z),
                verdict=bool(abs(z) <= PASS_Z),
                dropped=dropped,
                valid=bool(dropped <= MAX_DROP_FRACTION * int(replicates)),
            )
        )
    return reports


def check_type2_unbiased(
    model: Model,
    theta_grid,
    estimator: Estimator,
    n: int,
    replicates: int,
    seed: int,
    workers: int = 1,
    target_fn=None,
) -> list[UnbiasednessReport]:
    """Test whether the mean estimate matches theta itself on a grid.

    target_fn optionally remaps theta to the comparison target, which lets a
    dual-space estimator be checked against grad phi(theta) with the same
    machinery and the same seeds.
    """
    reports = []
    for i, theta in enumerate(theta_grid):
        theta = _check_setup(model, theta, n, [estimator], None, replicates)
        est = _simulate(
            model, theta, n, [estimator], replicates, derive_key(seed, i), workers
        )[estimator.id]
        vals = est[np.isfinite(est)]
        if vals.shape[0] < 2:
            raise NumericError("fewer than two finite replicates")
        target = float(theta if target_fn is None else target_fn(theta))
        mean, se, z, dropped = _mean_check(vals, target, est.shape[0])
        reports.append(
            UnbiasednessReport(
                kind="type2",
                model_id=model.id,
                generator_id="",
                estimator_id=estimator.id,
                theta=theta,
                n=int(n),
                replicates=int(replicates),
                seed=int(seed),
                mean=mean,
                target=target,
                se=se,
                z=float(z),
                verdict=bool(abs(z) <= PASS_Z),
                dropped=dropped,
                valid=bool(dropped <= MAX_DROP_FRACTION * int(replicates)),
            )
        )
    return reports


def lehmann_grid_check(
    model: Model,
    theta,
    grid,
    estimator: Estimator,
    g: Generator,
    orientation: str,
    n: int,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> LehmannGridReport:
    """Mean loss against every grid parameter, from one shared replicate set.

    theta must be a grid member.  Ties at the minimum are broken toward
    theta and recorded explicitly.
    """
    _check_orientation(orientation)
    theta = _check_setup(model, theta, n, [estimator], g, replicates)
    grid = [float(v) for v in grid]
    matches = [
        i for i, v in enumerate(grid) if abs(v - theta) <= _GRID_MATCH_TOL * (1.0 + abs(theta))
    ]
    if not matches:
        raise ConfigError(f"theta = {theta} must be a member of the grid {grid}")
    theta_index = matches[0]
    for v in grid:
        g.domain.check(np.asarray(v), "grid parameter")
    est = _simulate(model, theta, n, [estimator], replicates, seed, workers)[estimator.id]
    mask = g.domain.mask(est)
    dropped = int(est.shape[0] - np.count_nonzero(mask))
    vals = est[mask]
    if vals.shape[0] < 2:
        raise NumericError("fewer than two replicates stayed inside the generator domain")
    means, ses = [], []
    for v in grid:
        losses = bregman_div(g, v, vals) if orientation == "left" else bregman_div(g, vals, v)
        means.append(float(np.mean(losses)))
        ses.append(_se(losses))
    best = min(means)
    candidates = [i for i, m in enumerate(means) if m == best]
    if theta_index in candidates:
        argmin_index = theta_index
    else:
        argmin_index = candidates[0]
    return LehmannGridReport(
        model_id=model.id,
        generator_id=g.id,
        estimator_id=estimator.id,
        theta=theta,
        n=int(n),
        replicates=int(replicates),
        seed=int(seed),
        orientation=orientation,
        grid=tuple(grid),
        means=tuple(means),
        ses=tuple(ses),
        theta_index=theta_index,
        argmin_index=int(argmin_index),
        tie_broken_toward_theta=bool(len(candidates) > 1 and theta_index in candidates),
        dropped=dropped,
        valid=bool(dropped <= MAX_DROP_FRACTION * int(replicates)),
    )


def compare_estimators(
    model: Model,
    theta,
    n: int,
    estimator_pair,
    g: Generator,
    orientation: str,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> ComparisonReport:
    """Paired risk comparison on shared samples.

    Both estimators see the same replicate draws; the difference of
    per-replicate losses gives the paired standard error.  Replicates where
    either estimate leaves the generator's domain are dropped from both arms.
    """
    _check_orientation(orientation)
    e1, e2 = estimator_pair
    theta = _check_setup(model, theta, n, [e1, e2], g, replicates)
    est = _simulate(model, theta, n, [e1, e2], replicates, seed, workers)
    v1, v2 = est[e1.id], est[e2.id]
    mask = g.domain.mask(v1) & g.domain.mask(v2)
    dropped = int(v1.shape[0] - np.count_nonzero(mask))
    a, b = v1[mask], v2[mask]
    if a.shape[0] < 2:
        raise NumericError("fewer than two replicates stayed inside the generator domain")
    if orientation == "left":
        l1, l2 = bregman_div(g, theta, a), bregman_div(g, theta, b)
    else:
        l1, l2 = bregman_div(g, a, theta), bregman_div(g, b, theta)
    diff = l1 - l2
    return ComparisonReport(
        model_id=model.id,
        generator_id=g.id,
        estimator_id_1=e1.id,
        estimator_id_2=e2.id,
        theta=theta,
        n=int(n),
        replicates=int(replicates),
        seed=int(seed),
        orientation=orientation,
        risk_1=float(np.mean(l1)),
        risk_2=float(np.mean(l2)),
        risk_diff=float(np.mean(diff)),
        se_diff=_se(diff),
        dropped=dropped,
        valid=bool(dropped <= MAX_DROP_FRACTION * int(replicates)),
    )
