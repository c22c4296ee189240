"""Exact steady-state analysis of a single monitored source under threshold jamming.

Model: a binary Markov source (state flips with probability r each slot)
streams status updates to a remote monitor over an unreliable channel
(delivery probability p per slot). An adversary may jam any slot; a jamming
attempt suppresses an otherwise-successful delivery with probability q. The
adversary only sees the delivery feedback stream, so its observable state is
the age k, the number of slots since the last delivery. The expected age of
incorrect information (EAoII) given age k is

    s_k = (1 / 2r) * (1 + (1 - 2r)^(k+1) - 2 (1 - r)^(k+1)),

a strictly increasing ladder with ceiling 1/(2r). Under a threshold policy
(jam exactly when k >= n) the age evolves as a reset chain: back to 0 on
delivery, else k -> k+1, with per-slot delivery probability p below the
threshold and p(1-q) at or above it. Everything in this module is a closed
form on that chain: the stationary law, the long-run EAoII and attack-time
averages, the subsidy levels at which consecutive thresholds tie, and the
map from a per-slot jamming cost to the optimal threshold.

All functions are pure and deterministic; there is no shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SubsystemParams",
    "InfiniteThreshold",
    "INFINITE",
    "Threshold",
    "ThresholdPolicy",
    "SteadyStateSummary",
    "eaoii_value",
    "eaoii_ladder",
    "delivery_probability",
    "transition_distribution",
    "stationary_pmf",
    "stationary_pmf_no_jam",
    "avg_eaoii_closed",
    "avg_aat_closed",
    "avg_eaoii_no_jam",
    "steady_curves",
    "steady_reward",
    "steady_state_summary",
    "lambda_seq",
    "lambda_curve",
    "lambda_limit",
    "intersection_lambda",
    "optimal_threshold",
]


@dataclass(frozen=True)
class SubsystemParams:
    """One source/channel/adversary triple.

    p: probability a transmitted update is decoded, in (0, 1].
    q: probability a jamming attempt suppresses a delivery, in [0, 1).
    r: source state-flip probability per slot, in (0, 1/2].

    q = 1 is rejected: with certain jamming the age above a finite threshold
    can only grow, so no stationary regime exists. p = 0 is rejected for the
    same reason (the age never resets).
    """

    p: float
    q: float
    r: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"q must be in [0, 1), got {self.q}")
        if not 0.0 < self.r <= 0.5:
            raise ValueError(f"r must be in (0, 1/2], got {self.r}")


class InfiniteThreshold:
    """Distinguished never-jam threshold marker (not a sentinel number)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"


INFINITE = InfiniteThreshold()

Threshold = int | InfiniteThreshold

# Ages are plain nonnegative ints throughout the package.
AgeIndex = int


@dataclass(frozen=True)
class ThresholdPolicy:
    """Jam exactly when the age index is at least ``threshold``.

    ``INFINITE`` means never jam.
    """

    threshold: Threshold

    def __post_init__(self):
        if isinstance(self.threshold, InfiniteThreshold):
            return
        if not isinstance(self.threshold, (int, np.integer)) or self.threshold < 0:
            raise ValueError(f"threshold must be a natural number or INFINITE, got {self.threshold!r}")

    @property
    def is_finite(self) -> bool:
        return not isinstance(self.threshold, InfiniteThreshold)

    def jams(self, age: int) -> bool:
        if not self.is_finite:
            return False
        return age >= self.threshold


@dataclass(frozen=True)
class SteadyStateSummary:
    """Steady-state quantities of one finite threshold policy."""

    avg_eaoii: float
    avg_aat: float
    lambda_n: float


def _check_age(k: int) -> int:
    if k < 0:
        raise ValueError(f"age index must be >= 0, got {k}")
    return int(k)


def _finite_threshold(n) -> int:
    """Normalize a threshold argument to a finite int, rejecting INFINITE."""
    if isinstance(n, ThresholdPolicy):
        n = n.threshold
    if isinstance(n, InfiniteThreshold):
        raise ValueError("finite threshold required; use the dedicated no-jam path for INFINITE")
    if n < 0:
        raise ValueError(f"threshold must be >= 0, got {n}")
    return int(n)


def eaoii_value(params: SubsystemParams, k: int) -> float:
    """EAoII after k slots without a delivery.

    s_0 = 0, s_1 = r, and s_k increases strictly toward 1/(2r): the longer
    the monitor's estimate is stale, the closer the mismatch probability gets
    to its stationary ceiling. Ages 0 and 1 reduce symbolically to 0 and r
    and are returned exactly (the general expression would leave division
    noise scaled by 1/r).
    """
    k = _check_age(k)
    r = params.r
    if k == 0:
        return 0.0
    if k == 1:
        return r
    return (1.0 + (1.0 - 2.0 * r) ** (k + 1) - 2.0 * (1.0 - r) ** (k + 1)) / (2.0 * r)


def eaoii_ladder(params: SubsystemParams, size: int) -> np.ndarray:
    """Vector of s_k for k = 0 .. size-1."""
    if size <= 0:
        raise ValueError("size must be positive")
    k = np.arange(size, dtype=np.float64)
    r = params.r
    out = (1.0 + (1.0 - 2.0 * r) ** (k + 1) - 2.0 * (1.0 - r) ** (k + 1)) / (2.0 * r)
    out[0] = 0.0
    if size > 1:
        out[1] = r
    return out


def delivery_probability(params: SubsystemParams, jammed: bool) -> float:
    """Per-slot delivery probability: p unjammed, p(1-q) under jamming."""
    return params.p * (1.0 - params.q) if jammed else params.p


def transition_distribution(
    params: SubsystemParams, k: int, jammed: bool
) -> list[tuple[int, float]]:
    """One-step age law from age k: reset to 0 on delivery, else k+1.

    Returns the two-point distribution [(0, sigma), (k+1, 1-sigma)] with
    sigma the delivery probability for the given action.
    """
    k = _check_age(k)
    sigma = delivery_probability(params, jammed)
    return [(0, sigma), (k + 1, 1.0 - sigma)]


def stationary_pmf(params: SubsystemParams, n, i: int) -> float:
    """Stationary probability of age i under the finite threshold n.

    Below the threshold the chain loses mass geometrically at rate 1-p per
    step; at and above it, at rate 1 - p(1-q). The atom at 0 is
    p(1-q) / (1 - q + q (1-p)^n). Rejects INFINITE (see
    ``stationary_pmf_no_jam`` for the q-free geometric law).
    """
    n = _finite_threshold(n)
    i = _check_age(i)
    p, q = params.p, params.q
    a = 1.0 - p
    b = 1.0 - p * (1.0 - q)
    u0 = p * (1.0 - q) / (1.0 - q + q * a**n)
    if i == 0:
        return u0
    if i <= n:
        return a**i * u0
    return a**n * b ** (i - n) * u0


def stationary_pmf_no_jam(params: SubsystemParams, i: int) -> float:
    """Stationary age law when the adversary never jams: geometric(p)."""
    i = _check_age(i)
    return params.p * (1.0 - params.p) ** i


def _tail_transform(a: float, b: float, n, beta):
    """Sum over the stationary shape of beta^(k+1), divided by the atom.

    With shape a^k up to n and a^n b^(k-n) after, the sum splits into a
    finite geometric block and an infinite geometric tail; both are exact.
    Accepts scalars or numpy arrays for ``n``.
    """
    c = a * beta
    e = b * beta
    return beta * (1.0 - c ** (n + 1)) / (1.0 - c) + (c**n) * beta * e / (1.0 - e)


def avg_eaoii_closed(params: SubsystemParams, n) -> float:
    """Long-run average EAoII under the finite threshold n.

    Derived by summing the s_k ladder against the stationary law: the
    constant 1/(2r) term contributes the full mass, and each geometric
    component of s_k telescopes through ``_tail_transform``. Validated
    against the truncated-sum oracle in the test suite.
    """
    n = _finite_threshold(n)
    p, q, r = params.p, params.q, params.r
    a = 1.0 - p
    b = 1.0 - p * (1.0 - q)
    u0 = p * (1.0 - q) / (1.0 - q + q * a**n)
    body = _tail_transform(a, b, n, 1.0 - 2.0 * r) - 2.0 * _tail_transform(a, b, n, 1.0 - r)
    return (1.0 + u0 * body) / (2.0 * r)


def avg_aat_closed(params: SubsystemParams, n) -> float:
    """Long-run fraction of jammed slots under the finite threshold n.

    Equals (1-p)^n / (1 - q + q (1-p)^n): the stationary mass at or above
    the threshold. Strictly decreasing in n; equal to 1 at n = 0.
    """
    n = _finite_threshold(n)
    p, q = params.p, params.q
    a = 1.0 - p
    return a**n / (1.0 - q + q * a**n)


def avg_eaoii_no_jam(params: SubsystemParams) -> float:
    """Long-run average EAoII when the adversary never jams."""
    p, r = params.p, params.r
    a = 1.0 - p
    beta1 = 1.0 - 2.0 * r
    beta2 = 1.0 - r
    body = p * beta1 / (1.0 - a * beta1) - 2.0 * p * beta2 / (1.0 - a * beta2)
    return (1.0 + body) / (2.0 * r)


def steady_curves(params: SubsystemParams, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (avg_eaoii, avg_aat) over thresholds n = 0 .. n_max."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    p, q, r = params.p, params.q, params.r
    a = 1.0 - p
    b = 1.0 - p * (1.0 - q)
    ns = np.arange(n_max + 1, dtype=np.float64)
    an = a**ns
    u0 = p * (1.0 - q) / (1.0 - q + q * an)
    body = _tail_transform(a, b, ns, 1.0 - 2.0 * r) - 2.0 * _tail_transform(a, b, ns, 1.0 - r)
    sbar = (1.0 + u0 * body) / (2.0 * r)
    dbar = an / (1.0 - q + q * an)
    return sbar, dbar


def steady_reward(params: SubsystemParams, n, lam: float) -> float:
    """Steady-state adversary reward of threshold n at jamming cost lam."""
    n = _finite_threshold(n)
    return avg_eaoii_closed(params, n) - lam * avg_aat_closed(params, n)


def lambda_limit(params: SubsystemParams) -> float:
    """Supremum of the tie-subsidy sequence; jamming never pays above it.

    Every lambda_seq value lies strictly below this limit, and the optimal
    threshold is INFINITE exactly when the jamming cost reaches it.
    """
    p, q, r = params.p, params.q, params.r
    z = (1.0 - r) * (1.0 - p)
    y = (1.0 - 2.0 * r) * (1.0 - p)
    return p * q * (1.0 - r) / (r * (1.0 - z)) - p * q * (1.0 - 2.0 * r) / (2.0 * r * (1.0 - y))


def _lambda_decay(params: SubsystemParams, n):
    """Gap lambda_limit - lambda_seq(n); decays geometrically in n.

    The exact gap is a positive combination of (1-r)^(n+2) and
    (1-2r)^(n+2) terms. In floats the combination can round to a tiny
    negative once it falls below machine resolution, so it is clamped at 0:
    the sequence then saturates exactly at lambda_limit instead of
    overshooting it. Accepts scalars or numpy arrays for ``n``.
    """
    p, q, r = params.p, params.q, params.r
    a = 1.0 - p
    b = 1.0 - p * (1.0 - q)
    w = (1.0 - r) * b
    x = (1.0 - 2.0 * r) * b
    z = (1.0 - r) * a
    y = (1.0 - 2.0 * r) * a
    pow_r = (1.0 - r) ** (n + 2)
    pow_2r = (1.0 - 2.0 * r) ** (n + 2)
    an1 = a ** (n + 1)
    decay = (
        p * q * (1.0 - q) * pow_r / (r * (1.0 - w))
        + p * q * q * an1 * pow_r / ((1.0 - z) * (1.0 - w))
        - p * q * (1.0 - q) * pow_2r / (2.0 * r * (1.0 - x))
        - p * q * q * an1 * pow_2r / ((1.0 - y) * (1.0 - x))
    )
    return np.maximum(decay, 0.0) if isinstance(n, np.ndarray) else max(decay, 0.0)


def lambda_seq(params: SubsystemParams, n) -> float:
    """Jamming cost at which thresholds n and n+1 earn the same reward.

    The reward lines avg_eaoii(n) - lam * avg_aat(n) of consecutive
    thresholds intersect at exactly one subsidy level; this closed form is
    that intersection. It is strictly increasing in n (toward
    ``lambda_limit``), zero everywhere when q = 0, and doubles as the
    per-state priority index of the multi-channel jammer.
    """
    n = _finite_threshold(n)
    return lambda_limit(params) - _lambda_decay(params, n)


def lambda_curve(params: SubsystemParams, n_max: int) -> np.ndarray:
    """Vectorized lambda_seq over n = 0 .. n_max."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    ns = np.arange(n_max + 1, dtype=np.float64)
    return lambda_limit(params) - _lambda_decay(params, ns)


def intersection_lambda(params: SubsystemParams, m: int, n) -> float:
    """Subsidy at which threshold policies m and n (m < n) tie in reward.

    Algebraically this is (avg_eaoii(n) - avg_eaoii(m)) / (avg_aat(n) -
    avg_aat(m)), but evaluated with the stationary normalizations cancelled
    analytically, so it stays accurate where the raw differences would lose
    every significant digit (both averages converge geometrically in the
    threshold). ``intersection_lambda(params, n, n+1) == lambda_seq(params, n)``.
    Accepts a scalar or numpy array for ``n``.
    """
    m = _finite_threshold(m)
    scalar = not isinstance(n, np.ndarray)
    if scalar and n <= m:
        raise ValueError(f"need n > m, got m={m}, n={n}")
    p, q, r = params.p, params.q, params.r
    a = 1.0 - p
    b = 1.0 - p * (1.0 - q)
    d = n - m
    one_minus_ad = 1.0 - a**d

    def g(beta):
        c = a * beta
        e = b * beta
        block = (1.0 - q) * (1.0 - c**d) + q * a**n * (1.0 - beta**d)
        return q * one_minus_ad / (1.0 - c) - p * q * beta ** (m + 1) * block / ((1.0 - c) * (1.0 - e))

    out = p * (2.0 * (1.0 - r) * g(1.0 - r) - (1.0 - 2.0 * r) * g(1.0 - 2.0 * r)) / (
        2.0 * r * one_minus_ad
    )
    return float(out) if scalar else out


def optimal_threshold(params: SubsystemParams, lam: float) -> ThresholdPolicy:
    """Optimal jamming threshold for a per-slot jamming cost lam >= 0.

    Three regimes: jam always (threshold 0) when lam is at most the first
    tie level; threshold n when lam falls in the half-open band
    (lambda_seq(n-1), lambda_seq(n)]; never jam once lam reaches
    ``lambda_limit``. A cost exactly at a tie level maps to the lower
    threshold (both tie in reward; the convention keeps the map
    deterministic).
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam >= lambda_limit(params):
        return ThresholdPolicy(INFINITE)
    if lam <= lambda_seq(params, 0):
        return ThresholdPolicy(0)
    # Gallop to bracket the smallest n with lambda_seq(n) >= lam, then bisect.
    hi = 1
    while lambda_seq(params, hi) < lam:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lambda_seq(params, mid) < lam:
            lo = mid
        else:
            hi = mid
    return ThresholdPolicy(hi)


def steady_state_summary(params: SubsystemParams, n) -> SteadyStateSummary:
    """Bundle the three steady-state closed forms of one finite threshold."""
    n = _finite_threshold(n)
    return SteadyStateSummary(
        avg_eaoii=avg_eaoii_closed(params, n),
        avg_aat=avg_aat_closed(params, n),
        lambda_n=lambda_seq(params, n),
    )
