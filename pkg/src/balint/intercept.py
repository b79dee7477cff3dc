"""Balancing-intercept solvers.

Three routes to the intercept beta0 that makes the marginal outcome mean hit
its target:

  solve_linear_scale    beta0 = g(target) - sum_j beta_j E(X_j). Exact for the
                        identity link only; for log/logit it is the naive
                        comparator (Jensen's inequality breaks it) and the
                        solution is flagged.
  solve_log_closed_form beta0 = log(target) - sum_j log E[exp(beta_j X_j)],
                        exact for the log link with independent covariates,
                        using coded-categorical expectations and MGFs (Monte
                        Carlo estimation as an opt-in fallback).
  solve_numeric         bracketed bisection on beta0 -> E[g^-1(beta0 + eta)],
                        the route for logit and for anything without a closed
                        form. Monotone because g^-1 is strictly increasing.

The expectation engine behind the numeric route is either exact enumeration
over finite covariate supports or Monte Carlo over joint draws; with the MC
engine the draws are frozen once per solve (common random numbers), making
the objective deterministic and monotone within that solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .coding import categorical_expectation
from .distributions import (
    Bernoulli,
    Categorical,
    CovariateSpec,
    JointSampler,
    RngStream,
    independent_sampler,
    mc_exp_moment,
)
from .errors import (
    EngineMismatchError,
    LinkDomainError,
    MgfDomainError,
    NoMgfError,
    NoRootError,
    SpecError,
    UndefinedMomentError,
    WrongLinkError,
)
from .links import Identity, Link, Log, Logit

__all__ = [
    "ClampToUnit",
    "RejectOutOfRange",
    "ClampPolicy",
    "clamp_by_name",
    "NormalOutcome",
    "BernoulliOutcome",
    "OutcomeFamily",
    "Term",
    "DgpSpec",
    "ExactEnumeration",
    "MonteCarlo",
    "Engine",
    "InterceptSolution",
    "solve_linear_scale",
    "solve_log_closed_form",
    "expectation_of_mean",
    "solve_numeric",
    "solve",
    "SOLVER_NAMES",
]

DEFAULT_TOL_EXACT = 1e-10
DEFAULT_TOL_MC = 1e-4
MAX_EXPANSIONS = 60
MAX_BISECTIONS = 200

MAX_ENUM_SUPPORT = 1_000_000


@dataclass(frozen=True)
class ClampToUnit:
    name = "clamp_to_unit"


@dataclass(frozen=True)
class RejectOutOfRange:
    name = "reject_out_of_range"


ClampPolicy = Union[ClampToUnit, RejectOutOfRange]

_CLAMPS = {c.name: c() for c in (ClampToUnit, RejectOutOfRange)}


def clamp_by_name(name: str) -> ClampPolicy:
    try:
        return _CLAMPS[name]
    except KeyError:
        raise SpecError(f"unknown clamp policy '{name}' (expected one of {sorted(_CLAMPS)})") from None


@dataclass(frozen=True)
class NormalOutcome:
    sd: float
    family = "normal"

    def __post_init__(self) -> None:
        if not self.sd > 0.0:
            raise SpecError(f"normal outcome sd must be positive, got {self.sd}")


@dataclass(frozen=True)
class BernoulliOutcome:
    clamp: ClampPolicy = field(default_factory=ClampToUnit)
    family = "bernoulli"


OutcomeFamily = Union[NormalOutcome, BernoulliOutcome]


@dataclass(frozen=True)
class Term:
    """One covariate and its coefficient block.

    Continuous specs take a scalar beta; a p-level categorical takes p-1
    coefficients, one per encoded column.
    """

    name: str
    spec: CovariateSpec
    beta: Union[float, tuple[float, ...]]

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise SpecError("term name must be a nonempty string")
        if isinstance(self.spec, Categorical):
            try:
                block = tuple(float(b) for b in self.beta)
            except TypeError:
                raise SpecError(
                    f"term '{self.name}': categorical covariate needs a coefficient vector"
                ) from None
            if len(block) != self.spec.p - 1:
                raise SpecError(
                    f"term '{self.name}': coefficient block has length {len(block)}, "
                    f"need {self.spec.p - 1} for {self.spec.p} levels"
                )
            object.__setattr__(self, "beta", block)
        else:
            if isinstance(self.beta, (tuple, list)):
                raise SpecError(f"term '{self.name}': continuous covariate takes a scalar coefficient")
            object.__setattr__(self, "beta", float(self.beta))

    @property
    def betas(self) -> np.ndarray:
        """Coefficient block as a vector (length p-1, or 1 for continuous)."""
        if isinstance(self.spec, Categorical):
            return np.asarray(self.beta, dtype=float)
        return np.asarray([self.beta], dtype=float)


@dataclass(frozen=True)
class DgpSpec:
    """A complete data-generating mechanism minus its intercept.

    terms are sampled independently of each other. Dependent covariates enter
    only through a user-supplied JointSampler (with sampler_betas as the
    concatenated coefficient vector over its encoded columns), which confines
    every solver to the numeric / Monte Carlo path.
    """

    terms: tuple[Term, ...]
    link: Link
    outcome: OutcomeFamily
    target_mean: float
    sampler: Optional[JointSampler] = None
    sampler_betas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "target_mean", float(self.target_mean))
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise SpecError(f"term names must be distinct, got {names}")
        if self.sampler is not None:
            if self.terms:
                raise SpecError("a joint sampler replaces the term list; provide one or the other")
            betas = tuple(float(b) for b in self.sampler_betas)
            object.__setattr__(self, "sampler_betas", betas)
            if len(betas) != self.sampler.width:
                raise SpecError(
                    f"sampler_betas has length {len(betas)}, sampler width is {self.sampler.width}"
                )
        elif self.sampler_betas:
            raise SpecError("sampler_betas given without a joint sampler")
        t = self.target_mean
        if not math.isfinite(t):
            raise SpecError(f"target_mean must be finite, got {t}")
        if isinstance(self.link, Log) and t <= 0.0:
            raise LinkDomainError(f"log link needs target_mean > 0, got {t}")
        if isinstance(self.link, Logit) and not 0.0 < t < 1.0:
            raise LinkDomainError(f"logit link needs target_mean strictly inside (0, 1), got {t}")
        if isinstance(self.outcome, BernoulliOutcome) and not 0.0 < t < 1.0:
            raise SpecError(f"a Bernoulli outcome needs target_mean in (0, 1), got {t}")


@dataclass(frozen=True)
class ExactEnumeration:
    name = "exact"


@dataclass(frozen=True)
class MonteCarlo:
    n_mc: int = 100_000
    name = "mc"

    def __post_init__(self) -> None:
        if int(self.n_mc) < 2:
            raise SpecError(f"n_mc must be at least 2, got {self.n_mc}")
        object.__setattr__(self, "n_mc", int(self.n_mc))


Engine = Union[ExactEnumeration, MonteCarlo]


@dataclass(frozen=True)
class InterceptSolution:
    beta0: float
    method: str
    residual: float
    iterations: int
    mc_se: float
    warnings: frozenset[str] = frozenset()


def _exact_exp_moment(term: Term) -> float:
    """E[exp(beta' X)] for one term by closed form; raises where none exists."""
    spec = term.spec
    if isinstance(spec, Categorical):
        return categorical_expectation(spec.probs, term.beta, spec.coding, math.exp)
    try:
        return spec.mgf(term.beta)
    except MgfDomainError as e:
        raise MgfDomainError(f"term '{term.name}': {e}") from None
    except NoMgfError as e:
        raise NoMgfError(f"term '{term.name}': {e}") from None


def solve_linear_scale(dgp: DgpSpec) -> InterceptSolution:
    """beta0 = g(target) - sum_j beta_j E(X_j), on the linear predictor scale.

    Exact for the identity link. For log/logit the same arithmetic is the
    naive approximation that ignores E[g^-1(...)] != g^-1(E[...]); it is
    returned for comparison purposes with a 'naive_linear_scale' warning and
    its true residual where that is tractable.
    """
    if dgp.sampler is not None:
        raise SpecError(
            "linear-scale solving needs per-term means; a joint sampler routes to "
            "solve_numeric with the Monte Carlo engine"
        )
    g = dgp.link.apply(dgp.target_mean)
    s = 0.0
    for term in dgp.terms:
        spec = term.spec
        if isinstance(spec, Categorical):
            s += categorical_expectation(spec.probs, term.beta, spec.coding, lambda v: v)
        else:
            try:
                s += term.beta * spec.mean()
            except UndefinedMomentError as e:
                raise UndefinedMomentError(f"term '{term.name}': {e}") from None
    beta0 = g - s
    if isinstance(dgp.link, Identity):
        return InterceptSolution(
            beta0=beta0,
            method="linear_scale",
            residual=abs((beta0 + s) - dgp.target_mean),
            iterations=0,
            mc_se=0.0,
        )
    warnings = {"naive_linear_scale"}
    residual = math.nan
    if isinstance(dgp.link, Log):
        try:
            total = 1.0
            for term in dgp.terms:
                total *= _exact_exp_moment(term)
            residual = abs(math.exp(beta0) * total - dgp.target_mean)
        except MgfDomainError:
            residual = math.inf
        except NoMgfError:
            warnings.add("residual_unverified")
    else:
        try:
            value, _ = expectation_of_mean(beta0, dgp, ExactEnumeration())
            residual = abs(value - dgp.target_mean)
        except EngineMismatchError:
            warnings.add("residual_unverified")
    return InterceptSolution(
        beta0=beta0,
        method="linear_scale",
        residual=residual,
        iterations=0,
        mc_se=0.0,
        warnings=frozenset(warnings),
    )


def solve_log_closed_form(
    dgp: DgpSpec,
    engine: Engine = ExactEnumeration(),
    rng: Optional[RngStream] = None,
) -> InterceptSolution:
    """beta0 = log(target) - sum_j log E[exp(beta_j X_j)], log link only.

    Valid because independent covariates factor the expectation into a product
    of per-term exponential moments. Each moment comes from the coded
    categorical expectation, the MGF, or (only with the Monte Carlo engine,
    for terms without an MGF) mc_exp_moment, which contributes mc_se.
    """
    if not isinstance(dgp.link, Log):
        raise WrongLinkError(
            f"the closed form solves the log link only, got '{dgp.link.name}'"
        )
    warnings: set[str] = set()
    se2 = 0.0
    if dgp.sampler is not None:
        if not isinstance(engine, MonteCarlo):
            raise EngineMismatchError(
                "a joint sampler has no per-term closed form; use the Monte Carlo engine"
            )
        if rng is None:
            raise SpecError("the Monte Carlo engine needs an rng stream")
        est = mc_exp_moment(dgp.sampler, dgp.sampler_betas, engine.n_mc, rng)
        ln_total = math.log(est.estimate)
        se2 = (est.se / est.estimate) ** 2
        warnings |= set(est.warnings) | {"mc_fallback"}
    else:
        ln_total = 0.0
        for j, term in enumerate(dgp.terms):
            try:
                ln_total += math.log(_exact_exp_moment(term))
            except NoMgfError:
                if not isinstance(engine, MonteCarlo):
                    raise
                if rng is None:
                    raise SpecError("the Monte Carlo fallback needs an rng stream") from None
                est = mc_exp_moment(
                    independent_sampler([term.spec]), term.betas, engine.n_mc, rng.child(j)
                )
                ln_total += math.log(est.estimate)
                # delta method: se of log(m_hat) is se(m_hat)/m_hat
                se2 += (est.se / est.estimate) ** 2
                warnings |= set(est.warnings) | {"mc_fallback"}
    beta0 = math.log(dgp.target_mean) - ln_total
    residual = abs(math.exp(beta0 + ln_total) - dgp.target_mean)
    return InterceptSolution(
        beta0=beta0,
        method="log_closed_form",
        residual=residual,
        iterations=0,
        mc_se=math.sqrt(se2),
        warnings=frozenset(warnings),
    )


def _eta_support(dgp: DgpSpec) -> tuple[np.ndarray, np.ndarray]:
    """All attainable values of eta - beta0 with their probabilities."""
    if dgp.sampler is not None:
        raise EngineMismatchError("a joint sampler cannot be enumerated exactly")
    etas = np.zeros(1)
    probs = np.ones(1)
    for term in dgp.terms:
        spec = term.spec
        if isinstance(spec, Categorical):
            contrib = spec.rows() @ term.betas
            pr = np.asarray(spec.probs)
        elif isinstance(spec, Bernoulli):
            values, pr = spec.support()
            contrib = values * term.beta
        else:
            raise EngineMismatchError(
                f"term '{term.name}' ({spec.kind}) is continuous; exact enumeration "
                "needs finite supports"
            )
        if etas.size * contrib.size > MAX_ENUM_SUPPORT:
            raise EngineMismatchError(
                f"combined covariate support exceeds {MAX_ENUM_SUPPORT} points"
            )
        etas = (etas[:, None] + contrib[None, :]).ravel()
        probs = (probs[:, None] * pr[None, :]).ravel()
    return etas, probs


def _eta_draws(dgp: DgpSpec, n: int, rng: RngStream) -> np.ndarray:
    """n joint draws of eta - beta0, one substream per term."""
    if dgp.sampler is not None:
        x = dgp.sampler.draw(n, rng)
        return x @ np.asarray(dgp.sampler_betas, dtype=float)
    eta = np.zeros(n)
    for j, term in enumerate(dgp.terms):
        spec = term.spec
        sub = rng.child(j)
        if isinstance(spec, Categorical):
            eta += spec.rows()[spec.sample(n, sub)] @ term.betas
        else:
            eta += term.beta * spec.sample(n, sub)
    return eta


def expectation_of_mean(
    beta0: float,
    dgp: DgpSpec,
    engine: Engine = ExactEnumeration(),
    rng: Optional[RngStream] = None,
) -> tuple[float, float]:
    """(E[g^-1(beta0 + eta)], standard error); se is 0 on the exact path."""
    if isinstance(engine, ExactEnumeration):
        etas, probs = _eta_support(dgp)
        mu = dgp.link.invert(beta0 + etas)
        return float(probs @ np.atleast_1d(mu)), 0.0
    if rng is None:
        raise SpecError("the Monte Carlo engine needs an rng stream")
    eta = _eta_draws(dgp, engine.n_mc, rng)
    mu = dgp.link.invert(beta0 + eta)
    return float(mu.mean()), float(mu.std(ddof=1) / math.sqrt(engine.n_mc))


def solve_numeric(
    dgp: DgpSpec,
    engine: Engine = ExactEnumeration(),
    tol: Optional[float] = None,
    rng: Optional[RngStream] = None,
) -> InterceptSolution:
    """Bracketed bisection on beta0 -> E[g^-1(beta0 + eta)] - target.

    The initial bracket is g(target) +/- 1; its half-width doubles (at most 60
    times) until the residual changes sign, then bisection runs until the
    residual is within tol (at most 200 iterations). g^-1 strictly increasing
    makes the objective monotone, so the bracketed root is unique. With the
    Monte Carlo engine the eta draws are frozen before bracketing, so every
    evaluation sees the same sample.
    """
    if tol is None:
        tol = DEFAULT_TOL_MC if isinstance(engine, MonteCarlo) else DEFAULT_TOL_EXACT
    if not tol > 0.0:
        raise SpecError(f"tol must be positive, got {tol}")
    target = dgp.target_mean
    link = dgp.link
    if isinstance(engine, MonteCarlo):
        if rng is None:
            raise SpecError("the Monte Carlo engine needs an rng stream")
        eta = _eta_draws(dgp, engine.n_mc, rng)

        def expect(b0: float) -> float:
            return float(np.mean(link.invert(b0 + eta)))

    else:
        etas, probs = _eta_support(dgp)

        def expect(b0: float) -> float:
            return float(probs @ np.atleast_1d(link.invert(b0 + etas)))

    center = link.apply(target)
    half = 1.0
    lo, hi = center - half, center + half
    flo = expect(lo) - target
    fhi = expect(hi) - target
    expansions = 0
    while not (flo <= 0.0 <= fhi):
        expansions += 1
        if expansions > MAX_EXPANSIONS:
            raise NoRootError(
                f"no sign change within g(target) +/- {half / 2:g} "
                f"after {MAX_EXPANSIONS} bracket expansions"
            )
        half *= 2.0
        lo, hi = center - half, center + half
        flo = expect(lo) - target
        fhi = expect(hi) - target
    if abs(flo) <= tol:
        beta0, residual, bisections = lo, abs(flo), 0
    elif abs(fhi) <= tol:
        beta0, residual, bisections = hi, abs(fhi), 0
    else:
        beta0 = residual = None
        for bisections in range(1, MAX_BISECTIONS + 1):
            mid = 0.5 * (lo + hi)
            fm = expect(mid) - target
            if abs(fm) <= tol:
                beta0, residual = mid, abs(fm)
                break
            if fm < 0.0:
                lo = mid
            else:
                hi = mid
        if beta0 is None:
            raise NoRootError(
                f"bisection did not bring the residual under {tol:g} "
                f"within {MAX_BISECTIONS} iterations"
            )
    warnings: set[str] = set()
    mc_se = 0.0
    if isinstance(engine, MonteCarlo):
        mu = link.invert(beta0 + eta)
        mc_se = float(mu.std(ddof=1) / math.sqrt(engine.n_mc))
        if mc_se > tol / 4.0:
            warnings.add("mc_precision")
    return InterceptSolution(
        beta0=float(beta0),
        method="numeric",
        residual=float(residual),
        iterations=expansions + bisections,
        mc_se=mc_se,
        warnings=frozenset(warnings),
    )


SOLVER_NAMES = ("linear_scale", "log_closed_form", "numeric")


def solve(
    dgp: DgpSpec,
    method: str,
    engine: Engine = ExactEnumeration(),
    tol: Optional[float] = None,
    rng: Optional[RngStream] = None,
) -> InterceptSolution:
    """Dispatch to a solver by its serialized name."""
    if method == "linear_scale":
        return solve_linear_scale(dgp)
    if method == "log_closed_form":
        return solve_log_closed_form(dgp, engine=engine, rng=rng)
    if method == "numeric":
        return solve_numeric(dgp, engine=engine, tol=tol, rng=rng)
    raise SpecError(f"unknown solver '{method}' (expected one of {SOLVER_NAMES})")
