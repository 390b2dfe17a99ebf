"""Estimators, their dual-space images, and symmetrization.

An estimator maps a sample (last axis of an array) to a scalar estimate.
Its dual image under a generator g is grad phi composed with the estimator.
Averaging the dual image over permutations of the sample and mapping back
through the inverse gradient never increases risk for losses of the form
D(theta, delta); symmetrize() builds that improved estimator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BudgetError, ConfigError, UnsupportedError
from .generators import Generator
from .prng import derive_key, philox

EXACT = "exact"
MAX_EXACT_N = 8  # 8! = 40320 permutations

_BLOCK_ELEMS = 1 << 22  # cap on rows * permutations held in memory at once


@dataclass(frozen=True)
class Estimator:
    """Named sample-to-estimate map with declared unbiasedness claims.

    The unbiasedness tags ("type2", "type1:<generator id>") are claims to be
    checked by the risk lab, never assumptions.
    """

    id: str
    fn: object = field(repr=False)
    unbiasedness: frozenset = frozenset()
    requires_min_n: int = 1

    def __call__(self, x):
        arr = np.asarray(getattr(x, "observations", x), dtype=float)
        if arr.ndim < 1:
            raise ConfigError("estimator input must have a sample axis")
        if arr.shape[-1] < self.requires_min_n:
            raise ConfigError(
                f"estimator '{self.id}' needs n >= {self.requires_min_n}, got {arr.shape[-1]}"
            )
        return self.fn(arr)


@dataclass(frozen=True)
class DualEstimator:
    """An estimator composed with a generator's gradient map."""

    id: str
    generator: Generator = field(repr=False)
    fn: object = field(repr=False)
    base: Estimator | None = None
    requires_min_n: int = 1

    def __call__(self, x):
        arr = np.asarray(getattr(x, "observations", x), dtype=float)
        if arr.ndim < 1 or arr.shape[-1] < self.requires_min_n:
            raise ConfigError(f"dual estimator '{self.id}' needs n >= {self.requires_min_n}")
        return self.fn(arr)


def to_dual(g: Generator, e: Estimator) -> DualEstimator:
    """Push an estimator through grad phi; estimates outside g's domain raise."""
    return DualEstimator(
        id=f"dual[{g.id}]({e.id})",
        generator=g,
        fn=lambda x: g.gradient(e.fn(x)),
        base=e,
        requires_min_n=e.requires_min_n,
    )


def from_dual(g: Generator, d) -> Estimator:
    """Pull a dual-space map back through the inverse gradient."""
    fn = d.fn if isinstance(d, DualEstimator) else d
    min_n = d.requires_min_n if isinstance(d, DualEstimator) else 1
    name = d.id if isinstance(d, DualEstimator) else getattr(d, "__name__", "dual")
    return Estimator(
        id=f"primal[{g.id}]({name})",
        fn=lambda x: g.invert_gradient(fn(x)),
        requires_min_n=min_n,
    )


@lru_cache(maxsize=None)
def _permutation_matrix(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def _permutation_indices(n: int, budget, seed: int) -> np.ndarray:
    if budget == EXACT:
        if n > MAX_EXACT_N:
            raise BudgetError(
                f"exact symmetrization enumerates n! permutations; n = {n} exceeds"
                f" the n <= {MAX_EXACT_N} budget, pass an integer budget instead"
            )
        return _permutation_matrix(n)
    if isinstance(budget, bool) or not isinstance(budget, int):
        raise ConfigError(f"budget must be EXACT or a positive int, got {budget!r}")
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    rng = philox(derive_key(seed, n))
    # argsort of i.i.d. uniforms is a uniformly random permutation
    return np.argsort(rng.random((budget, n)), axis=1)


def rao_blackwellize(d: DualEstimator, x, budget=EXACT, seed: int = 0):
    """Average a dual estimator over permutations of one sample.

    With budget=EXACT all n! permutations are enumerated (n <= 8); an integer
    budget averages that many seeded uniform permutations instead.
    """
    arr = np.asarray(getattr(x, "observations", x), dtype=float)
    if arr.ndim != 1:
        raise ConfigError("rao_blackwellize expects a single sample")
    idx = _permutation_indices(arr.shape[0], budget, seed)
    duals = np.asarray(d.fn(arr[idx]), dtype=float)
    out = np.mean(duals, axis=0)
    return float(out) if np.ndim(out) == 0 else out


def symmetrize(g: Generator, e: Estimator, budget=EXACT, seed: int = 0) -> Estimator:
    """Full pipeline: to dual, permutation-average, back to primal.

    The returned estimator is permutation-invariant and carries over any
    type-I unbiasedness claims of the base estimator (a dual-space average
    preserves the dual-space mean).
    """
    d = to_dual(g, e)
    suffix = "perms=all" if budget == EXACT else f"perms={budget}"

    def fn(x):
        arr = np.asarray(x, dtype=float)
        n = arr.shape[-1]
        idx = _permutation_indices(n, budget, seed)
        flat = arr.reshape(-1, n)
        block = max(1, _BLOCK_ELEMS // idx.shape[0])
        eta = np.empty(flat.shape[0])
        for start in range(0, flat.shape[0], block):
            sub = flat[start : start + block]
            eta[start : start + sub.shape[0]] = np.mean(d.fn(sub[:, idx]), axis=-1)
        return np.asarray(g.invert_gradient(eta.reshape(arr.shape[:-1])))

    return Estimator(
        id=f"rb[{g.id},{suffix}]({e.id})",
        fn=fn,
        unbiasedness=frozenset(t for t in e.unbiasedness if t.startswith("type1")),
        requires_min_n=e.requires_min_n,
    )


def _type1_exp_neglog(model) -> Estimator:
    return Estimator(
        "type1",
        lambda x: np.sum(x, axis=-1) / (x.shape[-1] - 1),
        frozenset({"type1:neglog"}),
        requires_min_n=2,
    )


def _type1_lognormal_negentropy(model) -> Estimator:
    return Estimator(
        "type1",
        lambda x: np.exp(np.mean(np.log(x), axis=-1)),
        frozenset({"type1:negentropy"}),
        requires_min_n=1,
    )


def _type1_normal_sqeuclid(model) -> Estimator:
    return Estimator(
        "type1",
        lambda x: np.mean(x, axis=-1),
        frozenset({"type1:sqeuclid", "type2"}),
        requires_min_n=1,
    )


_TYPE1_REGISTRY = {
    ("exp", "neglog"): _type1_exp_neglog,
    ("lognormal", "negentropy"): _type1_lognormal_negentropy,
    ("normal", "sqeuclid"): _type1_normal_sqeuclid,
}


def build_type1_umvue(model, g: Generator) -> Estimator:
    """Closed-form estimator whose dual mean equals grad phi(theta) exactly.

    Only registered (model family, generator) pairs are supported; anything
    else raises UnsupportedError rather than guessing a construction.
    """
    key = (model.family, g.id)
    try:
        factory = _TYPE1_REGISTRY[key]
    except KeyError:
        raise UnsupportedError(
            f"no dual-unbiased construction registered for model '{model.family}'"
            f" with generator '{g.id}'"
        ) from None
    return factory(model)


def first_k_estimator(model, g: Generator | None, k: int) -> Estimator:
    """Estimator that ignores everything after the first k observations.

    Uses the registered dual-unbiased construction on the truncated sample
    when one exists and k meets its minimum; otherwise the mean of the first
    k observations.  Deliberately not permutation-invariant, which makes it
    the standard comparator for symmetrization experiments.
    """
    if k < 1:
        raise ConfigError(f"first-k needs k >= 1, got {k}")
    base = None
    if g is not None:
        factory = _TYPE1_REGISTRY.get((getattr(model, "family", None), g.id))
        if factory is not None:
            candidate = factory(model)
            if k >= candidate.requires_min_n:
                base = candidate
    if base is not None:
        fn = lambda x, _f=base.fn: _f(x[..., :k])
        tags = base.unbiasedness
    else:
        fn = lambda x: np.mean(x[..., :k], axis=-1)
        tags = (
            frozenset({"type2"})
            if getattr(model, "family", None) in ("exp", "normal")
            else frozenset()
        )
    return Estimator(f"first-k:{k}", fn, tags, requires_min_n=k)


def const_estimator(value: float) -> Estimator:
    v = float(value)
    return Estimator(f"const:{v:g}", lambda x: np.full(x.shape[:-1], v), frozenset(), 1)


def resolve_estimator(spec: str, model, g: Generator | None = None) -> Estimator:
    """Build an estimator from a selection string.

    Accepted forms: "classical", "type1", "first-k:<k>", "const:<v>".
    """
    if spec == "classical":
        return model.classical_umvue
    if spec == "type1":
        if g is None:
            raise ConfigError("the type1 estimator needs a generator")
        return build_type1_umvue(model, g)
    if spec.startswith("first-k:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad first-k spec {spec!r}") from None
        return first_k_estimator(model, g, k)
    if spec.startswith("const:"):
        try:
            v = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad const spec {spec!r}") from None
        return const_estimator(v)
    raise ConfigError(f"unknown estimator {spec!r}")
