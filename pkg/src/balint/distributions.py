"""Covariate distributions: sampling, exact means, and exponential moments.

Each distribution is a frozen spec object that can sample itself, report its
mean, and evaluate its moment generating function where one exists. The MGF is
what the log-link intercept solver consumes; distributions without one (Cauchy
everywhere except t=0, and gamma outside t < rate) raise typed errors so the
caller can decide between failing and falling back to the Monte Carlo
exponential-moment estimator at the bottom of this module.

Randomness is addressed, never ambient: every sampling entry point takes an
RngStream, a small immutable descriptor (master seed plus derivation path)
that maps to a numpy generator as a pure function. Two calls with equal
descriptors produce bitwise-identical draws regardless of process, thread, or
call order, which is what makes the replication harness's outputs independent
of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .coding import CodingScheme, ReferenceCell, _check_probs
from .errors import MgfDomainError, NoMgfError, SpecError, UndefinedMomentError

__all__ = [
    "RngStream",
    "Bernoulli",
    "UniformContinuous",
    "Normal",
    "Gamma",
    "Cauchy",
    "Categorical",
    "CovariateSpec",
    "JointSampler",
    "independent_sampler",
    "MomentEstimate",
    "mc_exp_moment",
]

_U64 = 2**64


@dataclass(frozen=True)
class RngStream:
    """Pure descriptor of a random stream: (master_seed, derivation path).

    child(i) appends one index to the path; distinct paths yield statistically
    independent streams (numpy SeedSequence spawn keys). The descriptor is the
    whole state: generator() always starts the stream from its beginning.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) < _U64:
            raise SpecError("master_seed must be an unsigned 64-bit integer")
        for i in self.path:
            if not 0 <= int(i) < _U64:
                raise SpecError("stream path entries must be unsigned 64-bit integers")

    def child(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.default_rng(seq)


def _check_n(n: int) -> int:
    n = int(n)
    if n < 1:
        raise SpecError("sample size must be at least 1")
    return n


@dataclass(frozen=True)
class Bernoulli:
    p: float
    kind = "bernoulli"

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise SpecError(f"bernoulli probability must lie in [0, 1], got {self.p}")

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        # uniform draws are in [0, 1), so p=1 yields all ones and p=0 all zeros
        return (rng.generator().random(_check_n(n)) < self.p).astype(float)

    def mean(self) -> float:
        return float(self.p)

    def mgf(self, t: float) -> float:
        return 1.0 - self.p + self.p * math.exp(t)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([0.0, 1.0]), np.array([1.0 - self.p, self.p])


@dataclass(frozen=True)
class UniformContinuous:
    a: float
    b: float
    kind = "uniform"

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise SpecError(f"uniform bounds must satisfy a < b, got [{self.a}, {self.b}]")

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return rng.generator().uniform(self.a, self.b, _check_n(n))

    def mean(self) -> float:
        return (self.a + self.b) / 2.0

    def mgf(self, t: float) -> float:
        # analytic limit at t=0; the ratio form is 0/0 there
        if t == 0.0:
            return 1.0
        return (math.exp(t * self.b) - math.exp(t * self.a)) / (t * (self.b - self.a))


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float
    kind = "normal"

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise SpecError(f"normal sigma must be positive, got {self.sigma}")

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return rng.generator().normal(self.mu, self.sigma, _check_n(n))

    def mean(self) -> float:
        return float(self.mu)

    def mgf(self, t: float) -> float:
        return math.exp(self.mu * t + 0.5 * self.sigma**2 * t**2)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float
    kind = "gamma"

    def __post_init__(self) -> None:
        if not self.shape > 0.0:
            raise SpecError(f"gamma shape must be positive, got {self.shape}")
        if not self.rate > 0.0:
            raise SpecError(f"gamma rate must be positive, got {self.rate}")

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return rng.generator().gamma(self.shape, 1.0 / self.rate, _check_n(n))

    def mean(self) -> float:
        return self.shape / self.rate

    def mgf(self, t: float) -> float:
        """(1 - t/rate)^(-shape), defined only for t < rate."""
        if t >= self.rate:
            raise MgfDomainError(
                f"gamma MGF diverges for t >= rate ({t} >= {self.rate}); "
                "E[exp(tX)] is infinite"
            )
        return (1.0 - t / self.rate) ** (-self.shape)


@dataclass(frozen=True)
class Cauchy:
    location: float
    scale: float
    kind = "cauchy"

    def __post_init__(self) -> None:
        if not self.scale > 0.0:
            raise SpecError(f"cauchy scale must be positive, got {self.scale}")

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return self.location + self.scale * rng.generator().standard_cauchy(_check_n(n))

    def mean(self) -> float:
        raise UndefinedMomentError("the Cauchy distribution has no mean")

    def mgf(self, t: float) -> float:
        if t == 0.0:
            return 1.0
        raise NoMgfError(f"the Cauchy distribution has no MGF at t = {t}")


@dataclass(frozen=True)
class Categorical:
    probs: tuple[float, ...]
    coding: CodingScheme = field(default_factory=ReferenceCell)
    kind = "categorical"

    def __post_init__(self) -> None:
        pr = _check_probs(np.asarray(self.probs, dtype=float), "categorical")
        object.__setattr__(self, "probs", tuple(float(v) for v in pr))

    @property
    def p(self) -> int:
        return len(self.probs)

    def rows(self) -> np.ndarray:
        return self.coding.rows(self.p, self.probs)

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        """Level indices in {0, ..., p-1} as an int64 vector."""
        cum = np.cumsum(np.asarray(self.probs))
        lv = np.searchsorted(cum, rng.generator().random(_check_n(n)), side="right")
        # float cumsum may top out a hair below 1; a draw above it must not
        # produce the out-of-range index p
        return np.minimum(lv, self.p - 1).astype(np.int64)

    def mean(self) -> np.ndarray:
        """Probability-weighted encoded row: the expectation of the design block."""
        return np.asarray(self.probs) @ self.rows()

    def mgf(self, t: float) -> float:
        raise SpecError(
            "a coded categorical has no scalar MGF; use "
            "coding.categorical_expectation with f=exp instead"
        )

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        return np.arange(self.p), np.asarray(self.probs)


CovariateSpec = Union[Bernoulli, UniformContinuous, Normal, Gamma, Cauchy, Categorical]


def _block_width(spec: CovariateSpec) -> int:
    return spec.p - 1 if isinstance(spec, Categorical) else 1


@dataclass(frozen=True)
class JointSampler:
    """Joint draw of all covariate columns, already encoded.

    draw(n, rng) returns an (n, width) matrix whose columns line up with the
    concatenated coefficient vector. This is the one entry point through which
    dependent covariates can reach the solvers; everything built by
    independent_sampler draws each spec from its own substream.
    """

    draw: Callable[[int, RngStream], np.ndarray]
    width: int
    undefined_exp_moment: bool = False


def independent_sampler(specs: Sequence[CovariateSpec]) -> JointSampler:
    specs = tuple(specs)
    width = sum(_block_width(s) for s in specs)

    def draw(n: int, rng: RngStream) -> np.ndarray:
        cols = []
        for j, spec in enumerate(specs):
            v = spec.sample(n, rng.child(j))
            if isinstance(spec, Categorical):
                cols.append(spec.rows()[v])
            else:
                cols.append(v[:, None])
        return np.hstack(cols)

    heavy = any(isinstance(s, Cauchy) for s in specs)
    return JointSampler(draw=draw, width=width, undefined_exp_moment=heavy)


class MomentEstimate(NamedTuple):
    estimate: float
    se: float
    warnings: frozenset[str]


def mc_exp_moment(
    sampler: JointSampler,
    betas: Sequence[float],
    n_mc: int,
    rng: RngStream,
) -> MomentEstimate:
    """Monte Carlo estimate of E[exp(beta' X)] from joint draws.

    Returns the sample mean and its standard error (sample sd / sqrt(n_mc)).
    For inputs whose exponential moment does not exist (Cauchy), the estimate
    is still computed but flagged with 'undefined_moment': the number reported
    estimates a quantity that is not there.
    """
    n_mc = int(n_mc)
    if n_mc < 2:
        raise SpecError("mc_exp_moment needs at least 2 draws for a standard error")
    b = np.asarray(betas, dtype=float)
    if b.ndim != 1 or b.size != sampler.width:
        raise SpecError(
            f"coefficient vector length {b.size} does not match sampler width {sampler.width}"
        )
    x = sampler.draw(n_mc, rng)
    # heavy-tailed draws can overflow exp to inf; the resulting inf/nan
    # estimate is the honest answer for a nonexistent moment, so suppress
    # numpy's elementwise warnings rather than the result
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(x @ b)
        estimate = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n_mc))
    warnings = frozenset({"undefined_moment"}) if sampler.undefined_exp_moment else frozenset()
    return MomentEstimate(estimate, se, warnings)
