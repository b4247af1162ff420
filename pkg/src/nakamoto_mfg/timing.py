"""Block generation and block propagation laws.

Time advances in time steps; a block is generated in a time step with
probability ``alpha`` and an agent receives an outstanding block in a time
step with probability ``delta``.  Decisions happen once per block step (the
random number of time steps between two generations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.stats import nbinom

# Tail mass below which series evaluation stops.
SERIES_TAIL = 1e-14


@dataclass(frozen=True)
class TimingParams:
    alpha: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def miss_ratio(self) -> float:
        """Probability that a block is still outstanding after one block step.

        Equals E[(1 - delta)^k] for k ~ Geometric(alpha).
        """
        a, d = self.alpha, self.delta
        return a * (1.0 - d) / (1.0 - (1.0 - a) * (1.0 - d))


def block_step_pmf(params: TimingParams, k: int) -> float:
    """P(a block step lasts exactly k time steps)."""
    if k < 1:
        return 0.0
    return (1.0 - params.alpha) ** (k - 1) * params.alpha


def multi_block_step_pmf(params: TimingParams, y: int, k: int) -> float:
    """P(y consecutive block steps last exactly k time steps in total)."""
    if y < 1:
        raise ValueError("y must be a positive integer")
    if k < y:
        return 0.0
    a = params.alpha
    # log-space keeps the binomial finite for large k
    log_p = (
        math.lgamma(k) - math.lgamma(y) - math.lgamma(k - y + 1)
        + (k - y) * math.log1p(-a) + y * math.log(a)
    )
    return math.exp(log_p)


def reception_cdf(params: TimingParams, h: int) -> float:
    """P(an agent receives a block within h block steps), closed form 1 - q^h."""
    if h <= 0:
        return 0.0
    return 1.0 - params.miss_ratio ** h


def reception_pmf(params: TimingParams, h: int) -> float:
    """P(an agent receives a block at exactly block step h)."""
    if h < 1:
        raise ValueError("h must be a positive integer")
    q = params.miss_ratio
    return q ** (h - 1) * (1.0 - q)


def _support_limit(alpha: float, h: int, tail: float) -> int:
    """Smallest K with P(k time steps in h block steps > K) < tail."""
    law = nbinom(h, alpha)
    k = int(h / alpha) + 1
    while law.sf(k - h) >= tail:
        k = int(k * 1.25) + 1
    return k + 1


def reception_cdf_series_table(alpha: float, deltas, h_max: int,
                               tail: float = SERIES_TAIL) -> np.ndarray:
    """Truncated-series evaluation of P(H <= h) for h = 1..h_max, one row per delta.

    The negative-binomial mass P(k time steps in h block steps) is built by the
    recursion P_h(k) = alpha P_{h-1}(k-1) + (1 - alpha) P_h(k-1) over the whole
    support up to the point where the remaining mass is below ``tail``, and
    then summed against 1 - (1 - delta)^k.  Shares nothing with the closed
    form used by :func:`reception_cdf`.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=np.float64))
    k_max = _support_limit(alpha, h_max, tail)
    k = np.arange(k_max + 1, dtype=np.float64)
    received = -np.expm1(np.outer(np.log1p(-deltas), k))  # (n_delta, k)
    out = np.empty((deltas.size, h_max))
    # P_0 is a point mass at k = 0
    prev = np.zeros(k_max + 1)
    prev[0] = 1.0
    for h in range(1, h_max + 1):
        shifted = np.concatenate(([0.0], prev[:-1]))
        cur = lfilter([alpha], [1.0, -(1.0 - alpha)], shifted)
        out[:, h - 1] = received @ cur
        prev = cur
    return out


def reception_cdf_series(params: TimingParams, h: int, tail: float = SERIES_TAIL) -> float:
    """Truncated-series value of P(H <= h); see :func:`reception_cdf_series_table`."""
    if h <= 0:
        return 0.0
    return float(reception_cdf_series_table(params.alpha, [params.delta], h, tail)[0, h - 1])


def delay_steps(delta: float, rho: float) -> int:
    """Time steps until a fraction ``rho`` of agents has received a block."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if rho >= 1.0:
        raise ValueError("rho >= 1 needs an infinite delay under geometric delivery")
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    k = math.ceil(math.log1p(-rho) / math.log1p(-delta))
    # guard against rounding right at an integer boundary
    while k > 1 and 1.0 - (1.0 - delta) ** (k - 1) >= rho:
        k -= 1
    while 1.0 - (1.0 - delta) ** k < rho:
        k += 1
    return max(k, 1)
