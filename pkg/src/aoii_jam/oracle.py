"""Independent numeric ground truth for the closed forms in ``core``.

Nothing here reuses a steady-state closed form it is meant to check: the
average-reward problem is solved by relative value iteration on a truncated
age chain, the stationary law by power iteration on the same kernel, the
long-run averages by truncated summation with an analytic tail bound, and
the optimal threshold by exhaustive search over the reward curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    INFINITE,
    SubsystemParams,
    ThresholdPolicy,
    avg_eaoii_no_jam,
    delivery_probability,
    eaoii_ladder,
    lambda_limit,
    stationary_pmf,
    steady_curves,
)

__all__ = [
    "OracleConfig",
    "ValueIterationResult",
    "ConvergenceError",
    "ThresholdStructureError",
    "recommended_state_cap",
    "relative_value_iteration",
    "extract_threshold",
    "stationary_pmf_numeric",
    "avg_numeric",
    "brute_force_threshold",
]


class ConvergenceError(RuntimeError):
    """Iteration did not reach its tolerance; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class ThresholdStructureError(RuntimeError):
    """A policy or index table violated its proven monotone structure."""


@dataclass(frozen=True)
class OracleConfig:
    """Truncation and stopping control for the numeric solvers.

    state_cap: largest age kept in the truncated chain (ages 0..state_cap).
    tolerance: span-seminorm stopping threshold for value iteration, also
        the L1 stopping threshold for power iteration.
    max_iterations: hard cap before declaring non-convergence.
    """

    state_cap: int = 400
    tolerance: float = 1e-9
    max_iterations: int = 200_000

    def __post_init__(self):
        if self.state_cap < 10:
            raise ValueError("state_cap must be >= 10")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def recommended_state_cap(params: SubsystemParams, n_hint: int = 0) -> int:
    """Truncation size keeping the bias well under the test tolerances.

    The chain forgets its tail at rate p(1-q) per slot under jamming, so the
    cap leaves about 60 expected reset times above the largest threshold of
    interest.
    """
    reset = params.p * (1.0 - params.q)
    return int(n_hint + math.ceil(60.0 / reset))


@dataclass
class ValueIterationResult:
    """Converged relative-value-iteration output on the truncated chain.

    theta is the optimal long-run average reward, values the differential
    value function over ages 0..cap (pinned to 0 at age 0), policy the
    per-age jam decision. The value function is non-decreasing and the
    policy monotone (passive then active); violations indicate a truncation
    that is too small and are surfaced by ``extract_threshold``.
    """

    theta: float
    values: np.ndarray
    policy: np.ndarray
    iterations: int
    converged: bool


def relative_value_iteration(
    params: SubsystemParams, lam: float, cfg: OracleConfig
) -> ValueIterationResult:
    """Solve the average-reward jamming problem on the truncated age chain.

    Each sweep takes the max of the passive update
        s_k + (1-p) V(k+1) + p V(0)
    and the active update
        s_k - lam + (1 - p(1-q)) V(k+1) + p(1-q) V(0),
    with the top age self-looping on non-delivery (truncation closure), then
    re-pins V(0) = 0. Stops when the span of successive differences falls
    below the tolerance; the average reward is read off the midpoint of the
    final difference bounds.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    cap = cfg.state_cap
    p = params.p
    pj = delivery_probability(params, True)
    fail_passive = 1.0 - p
    fail_active = 1.0 - pj
    s = eaoii_ladder(params, cap + 1)
    values = np.zeros(cap + 1)
    span = math.inf
    for iteration in range(1, cfg.max_iterations + 1):
        shifted = np.empty_like(values)
        shifted[:-1] = values[1:]
        shifted[-1] = values[-1]
        passive = s + fail_passive * shifted + p * values[0]
        active = s - lam + fail_active * shifted + pj * values[0]
        updated = np.maximum(passive, active)
        diff = updated - values
        hi = float(diff.max())
        lo = float(diff.min())
        span = hi - lo
        values = updated - updated[0]
        if span < cfg.tolerance:
            theta = 0.5 * (hi + lo)
            # Recompute both action values at the fixed point for the policy.
            shifted[:-1] = values[1:]
            shifted[-1] = values[-1]
            passive = s + fail_passive * shifted + p * values[0]
            active = s - lam + fail_active * shifted + pj * values[0]
            return ValueIterationResult(
                theta=theta,
                values=values,
                policy=active >= passive,
                iterations=iteration,
                converged=True,
            )
    raise ConvergenceError(
        f"value iteration did not converge in {cfg.max_iterations} sweeps", span
    )


def extract_threshold(result: ValueIterationResult) -> ThresholdPolicy:
    """First active age of a converged policy; INFINITE if all passive.

    An all-passive policy is only trustworthy when the jamming cost is known
    to be at or above lambda_limit, since a finite threshold beyond the
    truncation looks identical. A non-monotone policy (active then passive)
    contradicts the threshold structure and raises.
    """
    if not result.converged:
        raise ValueError("threshold extraction requires a converged result")
    policy = np.asarray(result.policy, dtype=bool)
    if not policy.any():
        return ThresholdPolicy(INFINITE)
    first = int(np.argmax(policy))
    if not policy[first:].all():
        raise ThresholdStructureError(
            f"policy is not monotone: active at {first} but passive again later"
        )
    return ThresholdPolicy(first)


def _threshold_kernel_sigma(params: SubsystemParams, n: int, cap: int) -> np.ndarray:
    """Per-age delivery probability under threshold n on ages 0..cap."""
    sigma = np.full(cap + 1, params.p)
    sigma[n:] = delivery_probability(params, True)
    return sigma


def stationary_pmf_numeric(
    params: SubsystemParams, n: int, cfg: OracleConfig
) -> np.ndarray:
    """Stationary age law by power iteration on the truncated kernel.

    The kernel resets to age 0 on delivery and shifts up by one otherwise
    (self-loop at the cap). Iterates from uniform until the L1 change drops
    below the tolerance, then renormalizes.
    """
    if params.q >= 1.0:
        raise ValueError("q < 1 required")
    cap = cfg.state_cap
    if n > cap:
        raise ValueError(f"threshold {n} exceeds the state cap {cap}")
    sigma = _threshold_kernel_sigma(params, n, cap)
    fail = 1.0 - sigma
    x = np.full(cap + 1, 1.0 / (cap + 1))
    for _ in range(cfg.max_iterations):
        nxt = np.empty_like(x)
        nxt[0] = float(sigma @ x)
        nxt[1:] = fail[:-1] * x[:-1]
        nxt[-1] += fail[-1] * x[-1]
        change = float(np.abs(nxt - x).sum())
        x = nxt
        if change < cfg.tolerance:
            return x / x.sum()
    raise ConvergenceError("power iteration did not converge", change)


def _tail_mass(params: SubsystemParams, n: int, cap: int) -> float:
    """Exact stationary mass above the truncation cap (cap >= n)."""
    b = 1.0 - delivery_probability(params, True)
    if b == 0.0:
        return 0.0
    return stationary_pmf(params, n, cap) * b / (1.0 - b)


def avg_numeric(
    params: SubsystemParams, n: int, cfg: OracleConfig | None = None
) -> tuple[float, float]:
    """(avg EAoII, avg attack time) by truncated summation of the age law.

    Sums s_k and the jam indicator against the stationary probabilities up
    to a cap chosen so the neglected mass contributes less than 1e-13, then
    adds the exact geometric remainders of both tails, keeping the residual
    under 1e-12 in all cases.
    """
    p, q, r = params.p, params.q, params.r
    b = 1.0 - delivery_probability(params, True)
    floor = cfg.state_cap if cfg is not None else 0
    if b == 0.0:
        cap = max(n + 10, floor)
    else:
        # Mass above the cap decays like b^(cap-n); s_k is below 1/(2r).
        target = 1e-13 * (1.0 - b) * 2.0 * r
        steps = math.ceil(math.log(target) / math.log(b)) if target < 1.0 else 0
        cap = max(n + max(steps, 10), floor)
    ages = np.arange(cap + 1)
    u = np.array([stationary_pmf(params, n, int(k)) for k in ages])
    s = eaoii_ladder(params, cap + 1)
    avg_s = float(np.sum(s * u))
    avg_d = float(np.sum(u[n:]))
    # Exact geometric remainders beyond the cap.
    mass = _tail_mass(params, n, cap)
    if mass > 0.0:
        u_cap = stationary_pmf(params, n, cap)
        beta1 = 1.0 - 2.0 * r
        beta2 = 1.0 - r
        tail1 = beta1 ** (cap + 1) * (b * beta1) / (1.0 - b * beta1)
        tail2 = beta2 ** (cap + 1) * (b * beta2) / (1.0 - b * beta2)
        avg_s += (mass + u_cap * (tail1 - 2.0 * tail2)) / (2.0 * r)
        avg_d += mass
    return avg_s, avg_d


def brute_force_threshold(
    params: SubsystemParams, lam: float, n_max: int
) -> ThresholdPolicy:
    """Optimal threshold by exhaustive search of the steady-reward curve.

    Declares INFINITE when the cost reaches lambda_limit; otherwise the
    argmax over 0..n_max. An argmax sitting exactly at n_max means the scan
    window was too small to contain the maximizer, which is an error rather
    than an answer.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam >= lambda_limit(params):
        return ThresholdPolicy(INFINITE)
    sbar, dbar = steady_curves(params, n_max)
    best = int(np.argmax(sbar - lam * dbar))
    if best == n_max:
        raise ValueError(
            f"argmax at the scan edge n_max={n_max}; enlarge n_max (lam={lam} is "
            f"below lambda_limit={lambda_limit(params):.6g})"
        )
    return ThresholdPolicy(best)


def no_jam_reward(params: SubsystemParams) -> float:
    """Steady reward of the never-jam policy (no attack-time cost)."""
    return avg_eaoii_no_jam(params)
