"""Model parameters and the constants derived from them.

The generative model: n vertices get labels sigma in {+1,-1} uniformly and
independently; each pair is connected with probability a/n when the labels
agree and b/n otherwise; every vertex also carries an observed noisy label
sigma_tilde that equals sigma with probability 1-alpha.

All message-passing code in this package is driven by the two log-odds
scales computed here,

    beta  = (1/2) log(a/b)              edge coupling strength
    gamma = (1/2) log((1-alpha)/alpha)  noisy-label field strength

and by the transfer function ``edge_coupling`` that attenuates a neighbor's
log-likelihood ratio when it crosses one edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, NonPositiveRate, RateExceedsN, ValidationError

__all__ = [
    "ModelParams",
    "Derived",
    "validate_params",
    "derived_constants",
    "edge_coupling",
]


@dataclass(frozen=True)
class ModelParams:
    """Validated generative parameters. Construct via :func:`validate_params`."""

    n: int
    a: float
    b: float
    alpha: float


@dataclass(frozen=True)
class Derived:
    """Constants derived from :class:`ModelParams`.

    gamma is +inf when alpha == 0 (noiseless labels); everything downstream
    treats +-inf as a legal log-likelihood ratio.
    """

    beta: float
    gamma: float
    theta: float
    eta: float
    d: float
    mu_hat: float


def validate_params(n, a, b, alpha) -> ModelParams:
    """Check (n, a, b, alpha) and return ModelParams; never clamps silently.

    n = 0 is allowed (empty graph); tree-only work passes n = 0 since the
    branching process does not involve n.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 0:
        raise ValidationError(f"n must be a nonnegative integer, got {n!r}")
    n = int(n)
    a = float(a)
    b = float(b)
    alpha = float(alpha)
    if not (a > 0.0) or not (b > 0.0):
        raise NonPositiveRate(f"edge rates must be positive, got a={a}, b={b}")
    if not (0.0 <= alpha < 0.5):
        raise AlphaOutOfRange(f"alpha must lie in [0, 1/2), got {alpha}")
    if n > 0 and (a > n or b > n):
        raise RateExceedsN(f"edge probabilities a/n, b/n must be <= 1, got a={a}, b={b}, n={n}")
    return ModelParams(n=n, a=a, b=b, alpha=alpha)


def derived_constants(p: ModelParams) -> Derived:
    beta = 0.5 * math.log(p.a / p.b)
    gamma = math.inf if p.alpha == 0.0 else 0.5 * math.log((1.0 - p.alpha) / p.alpha)
    theta = math.tanh(beta)
    return Derived(
        beta=beta,
        gamma=gamma,
        theta=theta,
        eta=(1.0 - theta) / 2.0,
        d=(p.a + p.b) / 2.0,
        mu_hat=(p.a - p.b) / math.sqrt(p.b),
    )


# Beyond this the correction e^{-2(x-beta)} is far below double precision,
# and 2*x stays clear of overflow inside logaddexp.
_SATURATE = 350.0


def edge_coupling(x, beta: float):
    """atanh(tanh(beta) * tanh(x)), evaluated stably for any x including +-inf.

    Uses the equivalent form (1/2) log((e^{2x+2b}+1)/(e^{2x}+e^{2b})) via
    logaddexp; the naive tanh composition overflows atanh for |x| > ~19.
    Output is bounded by |beta|, with edge_coupling(+-inf) = +-beta.

    Evaluated on |x| with the sign applied afterwards, so the function is
    odd bit-for-bit; negating every label then negates messages exactly.
    Accepts scalars or arrays; scalar in, float out.
    """
    x = np.asarray(x, dtype=np.float64)
    ax = np.minimum(np.abs(x), _SATURATE)
    mag = 0.5 * (np.logaddexp(2.0 * ax + 2.0 * beta, 0.0) - np.logaddexp(2.0 * ax, 2.0 * beta))
    mag = np.where(np.abs(x) > _SATURATE, beta, mag)
    out = np.sign(x) * mag
    if out.ndim == 0:
        return float(out)
    return out
