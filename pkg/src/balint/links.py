"""Link functions: forward map g, inverse g^-1, and their domains.

All three inverses are total on the reals and strictly increasing, which is
what the numeric intercept solver's bracketing relies on. apply() enforces the
forward domain (log: mu > 0; logit: 0 < mu < 1) and raises LinkDomainError
outside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import LinkDomainError, SpecError

__all__ = ["Identity", "Log", "Logit", "Link", "link_by_name"]


def _returning_like(x, out):
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class Identity:
    name = "identity"

    def apply(self, mu):
        return _returning_like(mu, np.asarray(mu, dtype=float))

    def invert(self, eta):
        return _returning_like(eta, np.asarray(eta, dtype=float))


@dataclass(frozen=True)
class Log:
    name = "log"

    def apply(self, mu):
        m = np.asarray(mu, dtype=float)
        if np.any(m <= 0.0):
            raise LinkDomainError("log link requires mu > 0")
        return _returning_like(mu, np.log(m))

    def invert(self, eta):
        e = np.asarray(eta, dtype=float)
        # overflow to inf is the mathematically right answer for huge eta,
        # and the bracket expansion deliberately probes huge eta
        with np.errstate(over="ignore"):
            return _returning_like(eta, np.exp(e))


@dataclass(frozen=True)
class Logit:
    name = "logit"

    def apply(self, mu):
        m = np.asarray(mu, dtype=float)
        if np.any((m <= 0.0) | (m >= 1.0)):
            raise LinkDomainError("logit link requires 0 < mu < 1")
        return _returning_like(mu, np.log(m / (1.0 - m)))

    def invert(self, eta):
        e = np.atleast_1d(np.asarray(eta, dtype=float))
        # branch form: never exponentiates a positive argument, so no overflow
        # at the extreme eta probed during bracket expansion
        out = np.empty_like(e)
        pos = e >= 0.0
        out[pos] = 1.0 / (1.0 + np.exp(-e[pos]))
        ex = np.exp(e[~pos])
        out[~pos] = ex / (1.0 + ex)
        return float(out[0]) if np.ndim(eta) == 0 else out


Link = Union[Identity, Log, Logit]

_LINKS = {cls.name: cls() for cls in (Identity, Log, Logit)}


def link_by_name(name: str) -> Link:
    try:
        return _LINKS[name]
    except KeyError:
        raise SpecError(f"unknown link '{name}' (expected one of {sorted(_LINKS)})") from None
