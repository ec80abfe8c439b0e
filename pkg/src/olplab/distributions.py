"""Seeded arrival/resource generators for every tested instance family.

Randomness comes from one named, counter-based generator (numpy's Philox
4x64) keyed by the trial's master seed.  The arrival stream, the per-period
resource stream, and the atom stream of a finite support are independent
substreams of that seed, so a trial is reproducible regardless of the order
in which its pieces are drawn.  Gamma and Beta variates use numpy's standard
rejection samplers; an alternate implementation only needs to match the
distributions, not the bit-streams.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .domain import Arrival, BoundsSpec, MarketConfig

__all__ = [
    "ARRIVAL_STREAM", "RESOURCE_STREAM", "ATOM_STREAM", "substream",
    "ResourceLaw", "ContinuousU1", "MultiSecretary", "BetaCont", "WideUniform",
    "Finite", "Custom", "FiniteSupport", "DistributionSpec",
    "sample_arrival", "sample_resources", "finite_support_build",
    "generate_instance", "continuous_spec", "finite_spec",
]

ARRIVAL_STREAM = 0
RESOURCE_STREAM = 1
ATOM_STREAM = 2

# 99.999th-percentile envelopes for the unbounded generating laws.
_FOLDED_NORMAL_Q = 4.417173413469023      # P(|N(0,1)| <= q) = 1 - 1e-5
_EXPONENTIAL_Q = -math.log(1e-5)          # P(Exp(1) <= q) = 1 - 1e-5


def substream(seed: int, stream_id: int, index: int = 0) -> np.random.Generator:
    """Independent Philox substream of a master seed."""
    ss = np.random.SeedSequence(seed, spawn_key=(stream_id, index))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ResourceLaw:
    """How the per-period resource vector d is drawn.

    kind is one of "uniform" (U[lo, hi]), "folded-normal" ((1+|X|)/3 with
    X ~ N(0,1)), "folded-exp" ((1+X)/3 with X ~ Exp(1)), or "fixed".
    """

    kind: str = "uniform"
    lo: float = 1.0 / 3.0
    hi: float = 2.0 / 3.0
    value: float = 0.5

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, m)
        if self.kind == "folded-normal":
            return (1.0 + np.abs(rng.standard_normal(m))) / 3.0
        if self.kind == "folded-exp":
            return (1.0 + rng.exponential(1.0, m)) / 3.0
        if self.kind == "fixed":
            return np.full(m, self.value)
        raise ValueError(f"unknown resource law {self.kind!r}")

    def envelope(self) -> tuple[float, float, bool]:
        """(d_min, d_max, is_envelope) for BoundsSpec."""
        if self.kind == "uniform":
            return self.lo, self.hi, False
        if self.kind == "folded-normal":
            return 1.0 / 3.0, (1.0 + _FOLDED_NORMAL_Q) / 3.0, True
        if self.kind == "folded-exp":
            return 1.0 / 3.0, (1.0 + _EXPONENTIAL_Q) / 3.0, True
        if self.kind == "fixed":
            return self.value, self.value, False
        raise ValueError(f"unknown resource law {self.kind!r}")


@dataclass(frozen=True)
class FiniteSupport:
    """K distinct (reward, request) atoms with a probability vector."""

    rewards: np.ndarray
    requests: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=np.float64))
        object.__setattr__(self, "requests", np.atleast_2d(np.asarray(self.requests, dtype=np.float64)))
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        k = len(self.rewards)
        if k < 1 or self.requests.shape[0] != k or self.probs.shape != (k,):
            raise ValueError("atoms and probs must agree on K >= 1")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector (sum 1 within 1e-12)")
        atoms = np.column_stack([self.rewards, self.requests])
        if len(np.unique(atoms, axis=0)) != k:
            raise ValueError("atoms must be distinct")

    @property
    def k(self) -> int:
        return len(self.rewards)

    @property
    def m(self) -> int:
        return self.requests.shape[1]

    def to_json(self) -> str:
        return json.dumps({
            "rewards": self.rewards.tolist(),
            "requests": self.requests.tolist(),
            "probs": self.probs.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "FiniteSupport":
        obj = json.loads(text)
        return cls(np.array(obj["rewards"]), np.array(obj["requests"]), np.array(obj["probs"]))


@dataclass(frozen=True)
class ContinuousU1:
    """Continuous family 1: rewards and requests i.i.d. U[0, 2]."""

    m: int = 1
    d_law: ResourceLaw = ResourceLaw()

    @property
    def name(self) -> str:
        return "continuous-1" + (f"-m{self.m}" if self.m != 1 else "")

    def sample_arrivals(self, rng, n):
        c = rng.uniform(0.0, 2.0, n)
        a = rng.uniform(0.0, 2.0, (n, self.m))
        return c, a

    def bounds(self) -> BoundsSpec:
        lo, hi, env = self.d_law.envelope()
        return BoundsSpec(self.m, 2.0, 2.0, lo, hi, env)


@dataclass(frozen=True)
class MultiSecretary:
    """Continuous family 2: unit requests, rewards U[0, 1] (multi-secretary)."""

    d_law: ResourceLaw = ResourceLaw()
    m: int = field(default=1, init=False)

    @property
    def name(self) -> str:
        return "multi-secretary"

    def sample_arrivals(self, rng, n):
        c = rng.uniform(0.0, 1.0, n)
        return c, np.ones((n, 1))

    def bounds(self) -> BoundsSpec:
        lo, hi, env = self.d_law.envelope()
        return BoundsSpec(1, 1.0, 1.0, lo, hi, env)


@dataclass(frozen=True)
class BetaCont:
    """Continuous family 3: requests Beta(1, 8), rewards U[0, 3]."""

    m: int = 5
    d_law: ResourceLaw = ResourceLaw()

    @property
    def name(self) -> str:
        return "continuous-3"

    def sample_arrivals(self, rng, n):
        c = rng.uniform(0.0, 3.0, n)
        a = rng.beta(1.0, 8.0, (n, self.m))
        return c, a

    def bounds(self) -> BoundsSpec:
        lo, hi, env = self.d_law.envelope()
        return BoundsSpec(self.m, 1.0, 3.0, lo, hi, env)


@dataclass(frozen=True)
class WideUniform:
    """Continuous family 4: requests U[1, 6], rewards U[0, 3]."""

    m: int = 5
    d_law: ResourceLaw = ResourceLaw()

    @property
    def name(self) -> str:
        return "continuous-4"

    def sample_arrivals(self, rng, n):
        c = rng.uniform(0.0, 3.0, n)
        a = rng.uniform(1.0, 6.0, (n, self.m))
        return c, a

    def bounds(self) -> BoundsSpec:
        lo, hi, env = self.d_law.envelope()
        return BoundsSpec(self.m, 6.0, 3.0, lo, hi, env)


@dataclass(frozen=True)
class Finite:
    """Finite-support family: atoms drawn by index with fixed probabilities."""

    support: FiniteSupport
    d_law: ResourceLaw = ResourceLaw()
    label: str = "finite"

    @property
    def name(self) -> str:
        return self.label

    @property
    def m(self) -> int:
        return self.support.m

    def sample_arrivals(self, rng, n):
        idx = rng.choice(self.support.k, size=n, p=self.support.probs)
        return self.support.rewards[idx].copy(), self.support.requests[idx].copy()

    def bounds(self) -> BoundsSpec:
        lo, hi, env = self.d_law.envelope()
        a_max = max(float(np.abs(self.support.requests).max()), 1e-12)
        c_max = max(float(np.abs(self.support.rewards).max()), 1e-12)
        return BoundsSpec(self.m, a_max, c_max, lo, hi, env)


@dataclass(frozen=True)
class Custom:
    """User-supplied batch sampler with declared bounds."""

    m: int
    sampler: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]
    bounds_spec: BoundsSpec
    d_law: ResourceLaw = ResourceLaw()
    label: str = "custom"

    @property
    def name(self) -> str:
        return self.label

    def sample_arrivals(self, rng, n):
        c, a = self.sampler(rng, n)
        return np.asarray(c, dtype=np.float64), np.atleast_2d(np.asarray(a, dtype=np.float64))

    def bounds(self) -> BoundsSpec:
        return self.bounds_spec


DistributionSpec = Union[ContinuousU1, MultiSecretary, BetaCont, WideUniform, Finite, Custom]


def sample_arrival(spec: DistributionSpec, rng: np.random.Generator) -> Arrival:
    """Draw one customer from the spec's arrival law."""
    c, a = spec.sample_arrivals(rng, 1)
    return Arrival(float(c[0]), a[0])


def sample_resources(spec: DistributionSpec, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the per-period resource vector under the spec's d-law."""
    if m != spec.m:
        raise ValueError(f"spec has m={spec.m}, requested {m}")
    return spec.d_law.sample(rng, m)


_ATOM_LAWS = ("uniform", "folded-normal", "exponential", "gamma")


def finite_support_build(m: int, k: int, atom_law: str, rng: np.random.Generator) -> FiniteSupport:
    """Build K atoms by one of the four finite recipes plus random probs.

    Probabilities are sampled uniformly from the simplex via normalized
    exponentials.  Recipes: "uniform" (c ~ U[0,1], a ~ U[0,3]),
    "folded-normal" (c ~ |N(0,1)|, a ~ |N(1,1)|), "exponential"
    (c ~ Exp(1), a ~ Exp(2), rate parameterization), "gamma"
    (c ~ U[1,2], a ~ Gamma(shape 2, scale 3)).
    """
    if k < 1:
        raise ValueError("support size K must be >= 1")
    if atom_law not in _ATOM_LAWS:
        raise ValueError(f"atom_law must be one of {_ATOM_LAWS}")
    for _ in range(100):
        if atom_law == "uniform":
            c = rng.uniform(0.0, 1.0, k)
            a = rng.uniform(0.0, 3.0, (k, m))
        elif atom_law == "folded-normal":
            c = np.abs(rng.standard_normal(k))
            a = np.abs(1.0 + rng.standard_normal((k, m)))
        elif atom_law == "exponential":
            c = rng.exponential(1.0, k)
            a = rng.exponential(0.5, (k, m))
        else:
            c = rng.uniform(1.0, 2.0, k)
            a = rng.gamma(2.0, 3.0, (k, m))
        e = rng.exponential(1.0, k)
        p = e / e.sum()
        atoms = np.column_stack([c, a])
        if len(np.unique(atoms, axis=0)) == k:
            return FiniteSupport(c, a, p)
    raise RuntimeError("could not draw distinct atoms")  # pragma: no cover


def generate_instance(
    spec: DistributionSpec, horizon: int, seed: int,
) -> tuple[MarketConfig, np.ndarray, np.ndarray]:
    """One full instance: config with realized d plus the arrival arrays."""
    d = sample_resources(spec, spec.m, substream(seed, RESOURCE_STREAM))
    c, a = spec.sample_arrivals(substream(seed, ARRIVAL_STREAM), horizon)
    return MarketConfig(horizon, spec.m, d, spec, seed), c, a


def continuous_spec(index: int, m: int | None = None) -> DistributionSpec:
    """The four benchmark-suite continuous families, 1-based index."""
    if index == 1:
        return ContinuousU1(m=m or 1)
    if index == 2:
        return MultiSecretary()
    if index == 3:
        return BetaCont(m=m or 5)
    if index == 4:
        return WideUniform(m=m or 5)
    raise ValueError("continuous families are numbered 1..4")


def finite_spec(index: int, seed: int) -> Finite:
    """The four finite families, atoms drawn from the seed's atom stream."""
    recipes = {
        1: (2, 5, "uniform", ResourceLaw()),
        2: (5, 5, "folded-normal", ResourceLaw("folded-normal")),
        3: (5, 10, "exponential", ResourceLaw("folded-exp")),
        4: (2, 10, "gamma", ResourceLaw()),
    }
    if index not in recipes:
        raise ValueError("finite families are numbered 1..4")
    m, k, law, d_law = recipes[index]
    support = finite_support_build(m, k, law, substream(seed, ATOM_STREAM))
    return Finite(support, d_law, label=f"finite-{index}")
