"""Exact binomial machinery for the truncated tests.

Everything here is about a single Bin(n, p0) count Y and its standardization
Z = (Y - n p0) / sigma.  The statistic kernel is

    w(y) = (n - y) log((n - y) / (n (1 - p0))) + y log(y / (n p0)),

with 0 log 0 = 0, equivalently n(1-p0) h_B(-(y-np0)/(n(1-p0))) +
n p0 h_B((y-np0)/(n p0)) for the Bennett function h_B.  Truncation events
{Z >= a} are realized on the integer lattice as {Y >= k_min} with
k_min = ceil(n p0 + a sigma), and the conditional moments nu_a = E[w(Y) |
Y >= k_min] and gamma_a = E[w(Y)^2 | Y >= k_min] are computed by exact
log-space summation of the binomial pmf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import EmptyConditionError, ParameterError


def bennett_h(x: float) -> float:
    """Bennett function h_B(x) = (1+x)log(1+x) - x, with h_B(-1) = 1."""
    if x < -1.0:
        # Absorb float dust from standardized ratios landing on -1.
        if x >= -1.0 - 1e-9:
            return 1.0
        raise ParameterError(f"bennett_h requires x >= -1, got {x}")
    if x == -1.0:
        return 1.0
    # log1p keeps precision near 0; x*log1p(x) - x would cancel badly.
    return (1.0 + x) * math.log1p(x) - x


@dataclass(frozen=True)
class BennettKernel:
    """Immutable Bin(n, p0) context: mean, sigma, log-pmf table."""

    n: int
    p0: float
    sigma: float = field(init=False)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.p0 < 1.0:
            raise ParameterError(f"p0 must lie in (0, 1), got {self.p0}")
        object.__setattr__(self, "sigma", math.sqrt(self.n * self.p0 * (1.0 - self.p0)))

    @property
    def mean(self) -> float:
        return self.n * self.p0

    def log_pmf(self, y: np.ndarray) -> np.ndarray:
        """log P(Y = y) elementwise, exact via log-gamma."""
        y = np.asarray(y, dtype=np.float64)
        n = float(self.n)
        return (
            gammaln(n + 1.0)
            - gammaln(y + 1.0)
            - gammaln(n - y + 1.0)
            + y * math.log(self.p0)
            + (n - y) * math.log1p(-self.p0)
        )


def w_stat(y, kernel: BennettKernel):
    """Statistic kernel w(y) >= 0; vanishes at y = n p0, increasing above
    the mean.  Accepts a scalar or an integer array."""
    arr = np.asarray(y, dtype=np.float64)
    if np.any((arr < 0) | (arr > kernel.n)):
        raise ParameterError(f"count outside [0, {kernel.n}]")
    n, p0 = float(kernel.n), kernel.p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(arr < n, (n - arr) * np.log((n - arr) / (n * (1.0 - p0))), 0.0)
        t2 = np.where(arr > 0, arr * np.log(arr / (n * p0)), 0.0)
    out = np.maximum(t1 + t2, 0.0)
    return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out


def z_threshold_to_count(a: float, kernel: BennettKernel) -> int:
    """k_min = ceil(n p0 + a sigma): smallest count with (y - n p0)/sigma >= a."""
    if a < 0.0:
        raise ParameterError(f"threshold a must be nonnegative, got {a}")
    x = kernel.mean + a * kernel.sigma
    nearest = round(x)
    # Honor the >= convention when n p0 + a sigma is an integer up to
    # floating-point noise.
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def _conditional_moment(a: float, kernel: BennettKernel, power: int) -> float:
    k_min = z_threshold_to_count(a, kernel)
    if k_min > kernel.n:
        raise EmptyConditionError(
            f"k_min={k_min} exceeds n={kernel.n}: conditioning event is empty"
        )
    ys = np.arange(k_min, kernel.n + 1)
    logp = kernel.log_pmf(ys)
    w = w_stat(ys, kernel) ** power
    log_denom = logsumexp(logp)
    pos = w > 0.0
    if not pos.any():
        return 0.0
    log_num = logsumexp(logp[pos] + np.log(w[pos]))
    return float(math.exp(log_num - log_denom))


def nu(a: float, kernel: BennettKernel) -> float:
    """nu_a = E[w(Y) | Y >= k_min(a)], exact."""
    return _conditional_moment(a, kernel, 1)


def gamma(a: float, kernel: BennettKernel) -> float:
    """gamma_a = E[w(Y)^2 | Y >= k_min(a)], exact."""
    return _conditional_moment(a, kernel, 2)


def binomial_tail(k: int, n: int, p: float) -> float:
    """Exact P(Bin(n, p) >= k) for 0 <= k <= n+1, stable in log space."""
    if not 0 <= k <= n + 1:
        raise ParameterError(f"k={k} outside [0, {n + 1}]")
    if k <= 0:
        return 1.0
    if k == n + 1:
        return 0.0
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return 0.0
        if p == 1.0:
            return 1.0
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    kern = BennettKernel(n, p)
    # Sum the side that is the smaller probability mass: direct summation
    # above the mean keeps deep tails exact in log space, the complement
    # below the mean avoids an O(n) sum of near-1 mass.
    if k > n * p:
        return float(math.exp(logsumexp(kern.log_pmf(np.arange(k, n + 1)))))
    head = math.exp(logsumexp(kern.log_pmf(np.arange(0, k))))
    return max(0.0, 1.0 - float(head))
