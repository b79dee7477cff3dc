"""Dataset generation from a solved data-generating mechanism."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .distributions import Categorical, RngStream
from .errors import OutOfRangeError, SpecError
from .intercept import BernoulliOutcome, ClampToUnit, DgpSpec, NormalOutcome

__all__ = ["Column", "Dataset", "generate"]


@dataclass(frozen=True)
class Column:
    """One covariate: sampled values, plus the encoded block for categoricals.

    values holds what was drawn (level indices for a categorical, reals
    otherwise); encoded is the (n, p-1) design block a categorical contributes
    to the linear predictor, None for continuous covariates.
    """

    name: str
    values: np.ndarray
    encoded: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Dataset:
    columns: tuple[Column, ...]
    outcome: np.ndarray
    clamp_count: int

    @property
    def n(self) -> int:
        return int(self.outcome.shape[0])

    def to_csv(self, destination: Union[str, io.TextIOBase]) -> None:
        """Header then n rows; categoricals as integer levels, outcome last.

        RFC-4180 quoting, LF line endings regardless of platform.
        """
        if isinstance(destination, (str, bytes)):
            with open(destination, "w", newline="") as f:
                self.to_csv(f)
            return
        w = csv.writer(destination, lineterminator="\n")
        w.writerow([c.name for c in self.columns] + ["y"])
        for i in range(self.n):
            row = [
                int(c.values[i]) if c.values.dtype == np.int64 else repr(float(c.values[i]))
                for c in self.columns
            ]
            row.append(repr(float(self.outcome[i])))
            w.writerow(row)


def generate(dgp: DgpSpec, beta0: float, n: int, rng: RngStream) -> Dataset:
    """Draw covariates, form mu = g^-1(beta0 + beta'x), then the outcome.

    Covariates draw in declaration order, each from its own substream, so
    adding a term never perturbs the draws of earlier columns; the outcome
    noise has its own substream for the same reason. A Bernoulli outcome runs
    mu through the clamp policy first: ClampToUnit clips to [0, 1] (in both
    directions) and counts the rows it changed, RejectOutOfRange refuses to
    generate through an invalid mean.
    """
    n = int(n)
    if n < 1:
        raise SpecError("dataset size must be at least 1")
    if dgp.sampler is not None:
        raise SpecError(
            "generate draws covariates independently; a joint sampler is not supported here"
        )
    eta = np.full(n, float(beta0))
    columns = []
    cov_rng = rng.child(0)
    for j, term in enumerate(dgp.terms):
        spec = term.spec
        values = spec.sample(n, cov_rng.child(j))
        if isinstance(spec, Categorical):
            encoded = spec.rows()[values]
            eta += encoded @ term.betas
            columns.append(Column(term.name, values, encoded))
        else:
            eta += term.beta * values
            columns.append(Column(term.name, values))
    mu = np.atleast_1d(dgp.link.invert(eta))
    out_rng = rng.child(1).generator()
    if isinstance(dgp.outcome, NormalOutcome):
        y = out_rng.normal(mu, dgp.outcome.sd)
        clamp_count = 0
    else:
        if isinstance(dgp.outcome.clamp, ClampToUnit):
            clamped = np.clip(mu, 0.0, 1.0)
            clamp_count = int(np.count_nonzero(clamped != mu))
            y = (out_rng.random(n) < clamped).astype(float)
        else:
            bad = (mu < 0.0) | (mu > 1.0)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise OutOfRangeError(
                    f"row {i}: mean {mu[i]:.6g} outside [0, 1] (eta = {eta[i]:.6g}); "
                    "generation rejected"
                )
            y = (out_rng.random(n) < mu).astype(float)
            clamp_count = 0
    return Dataset(columns=tuple(columns), outcome=y, clamp_count=clamp_count)
