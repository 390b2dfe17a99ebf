"""Sampling models with sufficient statistics and classical estimators.

All builtins are scalar i.i.d. families.  Draws are bit-reproducible: chunk c
of a batch uses the Philox stream keyed by derive_key(seed, c), uniforms are
shifted into the open interval (0, 1), and each family applies its inverse
CDF (exponential) or the ndtri Gaussian transform (normal, lognormal).  The
chunk grid is fixed, so batches are identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError
from .estimators import Estimator
from .generators import DomainSpec
from .prng import derive_key, open_uniforms, philox

CHUNK_ROWS = 65536


@dataclass(frozen=True)
class Sample:
    """One i.i.d. sample of scalar observations."""

    observations: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.observations, dtype=float)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ConfigError(f"observations must be a non-empty 1-d array, got shape {arr.shape}")
        object.__setattr__(self, "observations", arr)

    @property
    def n(self) -> int:
        return self.observations.shape[0]


def _chunk_ranges(rows: int):
    for c, start in enumerate(range(0, rows, CHUNK_ROWS)):
        yield c, start, min(start + CHUNK_ROWS, rows)


class Model:
    """Base class for scalar parametric families."""

    family: str = ""
    complete_sufficient = True  # the builtin sufficient statistics are complete

    def __init__(self, model_id: str, param_space: DomainSpec, support: DomainSpec):
        self.id = model_id
        self.param_space = param_space
        self.support = support

    def _transform(self, u: np.ndarray, theta: float) -> np.ndarray:
        raise NotImplementedError

    def _check_theta(self, theta) -> float:
        theta = float(theta)
        self.param_space.check(np.asarray(theta), "theta")
        return theta

    def draw(self, theta, n: int, replicates: int, seed: int, workers: int = 1) -> np.ndarray:
        """(replicates, n) array of observations, identical for any worker count."""
        theta = self._check_theta(theta)
        if int(n) < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        if int(replicates) < 1:
            raise ConfigError(f"replicates must be >= 1, got {replicates}")
        n = int(n)
        out = np.empty((int(replicates), n))

        def fill(task):
            c, start, stop = task
            rng = philox(derive_key(int(seed), c))
            out[start:stop] = self._transform(open_uniforms(rng, (stop - start, n)), theta)

        tasks = list(_chunk_ranges(int(replicates)))
        if workers and int(workers) > 1:
            with ThreadPoolExecutor(max_workers=int(workers)) as pool:
                list(pool.map(fill, tasks))
        else:
            for task in tasks:
                fill(task)
        return out

    def sample(self, theta, n: int, seed: int) -> Sample:
        return Sample(self.draw(theta, n, 1, seed)[0])

    def _stat(self, arr: np.ndarray) -> np.ndarray:
        return np.sum(arr, axis=-1)

    def sufficient_stat(self, x):
        """Reduce a sample (or a batch with samples on the last axis)."""
        arr = np.asarray(getattr(x, "observations", x), dtype=float)
        if arr.ndim < 1 or arr.shape[-1] < 1:
            raise ConfigError("expected at least one observation")
        self.support.check(arr, "observation")
        out = self._stat(arr)
        return float(out) if out.ndim == 0 else out

    @property
    def classical_umvue(self) -> Estimator:
        raise NotImplementedError


class ExponentialModel(Model):
    """Exponential family parameterized by its mean theta (rate 1/theta)."""

    family = "exp"

    def __init__(self):
        super().__init__("exp", DomainSpec(1, "positive"), DomainSpec(1, "positive"))

    def _transform(self, u, theta):
        # inverse CDF: F^{-1}(u) = -theta * log(1 - u)
        return -theta * np.log1p(-u)

    @property
    def classical_umvue(self) -> Estimator:
        return Estimator("classical", lambda x: np.mean(x, axis=-1), frozenset({"type2"}), 1)


class NormalModel(Model):
    """Normal location family with known variance sigma2."""

    family = "normal"

    def __init__(self, sigma2: float = 1.0):
        if not (np.isfinite(sigma2) and sigma2 > 0):
            raise ConfigError(f"sigma2 must be positive and finite, got {sigma2}")
        super().__init__(f"normal(sigma2={sigma2:g})", DomainSpec(1), DomainSpec(1))
        self.sigma2 = float(sigma2)
        self._sigma = float(np.sqrt(sigma2))

    def _transform(self, u, theta):
        return theta + self._sigma * ndtri(u)

    @property
    def classical_umvue(self) -> Estimator:
        return Estimator("classical", lambda x: np.mean(x, axis=-1), frozenset({"type2"}), 1)


class LogNormalModel(Model):
    """Lognormal with median theta: log X ~ Normal(log theta, sigma2)."""

    family = "lognormal"

    def __init__(self, sigma2: float = 0.25):
        if not (np.isfinite(sigma2) and sigma2 > 0):
            raise ConfigError(f"sigma2 must be positive and finite, got {sigma2}")
        super().__init__(
            f"lognormal(sigma2={sigma2:g})", DomainSpec(1, "positive"), DomainSpec(1, "positive")
        )
        self.sigma2 = float(sigma2)
        self._sigma = float(np.sqrt(sigma2))

    def _transform(self, u, theta):
        return theta * np.exp(self._sigma * ndtri(u))

    def _stat(self, arr):
        return np.sum(np.log(arr), axis=-1)

    @property
    def classical_umvue(self) -> Estimator:
        sigma2 = self.sigma2

        def fn(x):
            n = x.shape[-1]
            return np.exp(np.mean(np.log(x), axis=-1) - sigma2 / (2.0 * n))

        return Estimator("classical", fn, frozenset({"type2"}), 1)


def resolve_model(spec: str) -> Model:
    """Build a model from a selection string.

    Accepted forms: "exp", "normal[:<sigma2>]" (default sigma2 = 1) and
    "lognormal[:<sigma2>]" (default sigma2 = 0.25).
    """
    name, _, arg = spec.partition(":")
    if name == "exp":
        if arg:
            raise ConfigError("the exp model takes no parameter in its selection string")
        return ExponentialModel()
    if name in ("normal", "lognormal"):
        cls = NormalModel if name == "normal" else LogNormalModel
        if not arg:
            return cls()
        try:
            return cls(float(arg))
        except ValueError:
            raise ConfigError(f"bad sigma2 value {arg!r} in model spec {spec!r}") from None
    raise ConfigError(f"unknown model {spec!r}")
