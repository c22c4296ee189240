"""Oracle-equivalence check suite.

Every closed form in ``core`` and ``whittle`` is paired here with an
independent numeric route (power iteration, truncated sums, exhaustive
search, value iteration, or a second construction of the same object) and a
tolerance. ``run_checks`` executes the suite over a parameter grid and
returns a machine-readable report; the CLI ``verify`` command is a thin
wrapper over it. The registry below is the coverage manifest: tests assert
the two stay in sync.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
import math

import numpy as np

from . import core, oracle, whittle

# Grid knobs kept module-level so the acceptance suite and the CLI agree.
RVI_PARAMS = [(0.9, 0.9, 0.1), (0.5, 0.6, 0.3)]
RVI_LAMBDA_COUNT = 6
N_GRID = [0, 1, 2, 5, 10]


@dataclass
class CheckResult:
    name: str
    tolerance: float
    worst_error: float
    passed: bool
    witness: dict = field(default_factory=dict)
    detail: str = ""


def default_grid() -> list[core.SubsystemParams]:
    """72 parameter triples covering the valid ranges and their edges."""
    grid = []
    for p in (0.2, 0.4, 0.6, 0.8, 0.9, 1.0):
        for q in (0.0, 0.3, 0.6, 0.9):
            for r in (0.1, 0.3, 0.5):
                grid.append(core.SubsystemParams(p=p, q=q, r=r))
    return grid


def _witness(params, **extra):
    out = {"p": params.p, "q": params.q, "r": params.r}
    out.update(extra)
    return out


def _track(state, err, params, **extra):
    if err > state["worst"]:
        state["worst"] = err
        state["witness"] = _witness(params, **extra)


def _result(name, tolerance, state, detail="") -> CheckResult:
    return CheckResult(
        name=name,
        tolerance=tolerance,
        worst_error=state["worst"],
        passed=state["worst"] <= tolerance and not state.get("failed", False),
        witness=state["witness"],
        detail=detail,
    )


def _fresh():
    return {"worst": 0.0, "witness": {}}


def check_eaoii_identities(grid) -> CheckResult:
    """s_0 is identically 0 and s_1 is identically r."""
    state = _fresh()
    rng = np.random.default_rng(2024)
    for r in rng.uniform(1e-6, 0.5, size=100):
        params = core.SubsystemParams(p=0.5, q=0.5, r=float(r))
        _track(state, abs(core.eaoii_value(params, 0)), params, k=0)
        _track(state, abs(core.eaoii_value(params, 1) - r), params, k=1)
    return _result("eaoii_identities", 1e-14, state)


def check_eaoii_monotone_bounded(grid) -> CheckResult:
    """Strict increase with the exact step size, below the 1/(2r) ceiling."""
    state = _fresh()
    for params in grid:
        r = params.r
        ladder = core.eaoii_ladder(params, 301)
        ceil = 1.0 / (2.0 * r)
        ks = np.arange(300, dtype=np.float64)
        exact_step = (1.0 - r) ** (ks + 1) - (1.0 - 2.0 * r) ** (ks + 1)
        _track(state, float(np.max(np.abs(np.diff(ladder) - exact_step))), params)
        # The strict ceiling saturates in float64 once (1-r)^(k+1)/r drops
        # below resolution; require strictness only where the gap resolves.
        resolvable = (1.0 - r) ** (np.arange(301) + 1.0) / r > 1e-12
        if ladder.min() < 0 or ladder.max() > ceil or np.any(ladder[resolvable] >= ceil):
            state["failed"] = True
            state["witness"] = _witness(params)
    return _result("eaoii_monotone_bounded", 1e-12, state)


def check_kernel_stochastic(grid) -> CheckResult:
    """The two-point age kernel is an exact probability distribution."""
    state = _fresh()
    for params in grid:
        for k in (0, 1, 5):
            for jammed in (False, True):
                dist = core.transition_distribution(params, k, jammed)
                total = sum(prob for _, prob in dist)
                _track(state, abs(total - 1.0), params, k=k, jammed=jammed)
                if any(prob < 0 for _, prob in dist) or len(dist) != 2:
                    state["failed"] = True
    return _result("kernel_stochastic", 0.0, state)


def _pmf_cap(params, n, target=1e-10) -> int:
    b = 1.0 - core.delivery_probability(params, True)
    if b == 0.0:
        return n + 10
    steps = math.ceil(math.log(target * (1.0 - b)) / math.log(b))
    return n + max(steps, 20)


def _tail_mass(params, n, cap) -> float:
    b = 1.0 - core.delivery_probability(params, True)
    if b == 0.0:
        return 0.0
    return core.stationary_pmf(params, n, cap) * b / (1.0 - b)


def check_stationary_vs_power_iteration(grid) -> CheckResult:
    """Closed-form age law vs the power-iteration fixed point (TV distance)."""
    state = _fresh()
    for params in grid:
        for n in N_GRID:
            cap = _pmf_cap(params, n)
            cfg = oracle.OracleConfig(state_cap=cap, tolerance=1e-14)
            numeric = oracle.stationary_pmf_numeric(params, n, cfg)
            closed = np.array([core.stationary_pmf(params, n, k) for k in range(cap + 1)])
            tv = 0.5 * (np.abs(numeric - closed).sum() + _tail_mass(params, n, cap))
            _track(state, float(tv), params, n=n)
    return _result("stationary_vs_power_iteration", 1e-8, state)


def check_stationary_normalization(grid) -> CheckResult:
    """Closed-form age law sums to one, geometric tail included."""
    state = _fresh()
    for params in grid:
        for n in N_GRID:
            cap = _pmf_cap(params, n, target=1e-16)
            total = sum(core.stationary_pmf(params, n, k) for k in range(cap + 1))
            total += _tail_mass(params, n, cap)
            _track(state, abs(total - 1.0), params, n=n)
    return _result("stationary_normalization", 1e-12, state)


def check_stationary_balance(grid) -> CheckResult:
    """The closed-form law satisfies the full balance equation pointwise."""
    state = _fresh()
    for params in grid:
        p_jam = core.delivery_probability(params, True)
        for n in N_GRID:
            cap = _pmf_cap(params, n, target=1e-16)
            u = np.array([core.stationary_pmf(params, n, k) for k in range(cap + 1)])
            sigma = np.full(cap + 1, params.p)
            sigma[n:] = p_jam
            # Inflow to age 0 comes from every age; the tail beyond the cap
            # delivers at the jammed rate.
            inflow0 = float(sigma @ u) + p_jam * _tail_mass(params, n, cap)
            _track(state, abs(u[0] - inflow0), params, n=n, k=0)
            upto = min(40, cap)
            resid = np.abs(u[1 : upto + 1] - (1.0 - sigma[:upto]) * u[:upto])
            _track(state, float(resid.max()), params, n=n, k=int(resid.argmax()) + 1)
    return _result("stationary_balance", 1e-10, state)


# Relative errors are floored at this scale: the pinned chain at p = 1 makes
# some averages exactly zero up to float dust, where a pure ratio of dust to
# dust would report noise instead of agreement.
_REL_FLOOR = 1e-6


def check_avg_eaoii_closed(grid) -> CheckResult:
    """Closed-form average EAoII vs the truncated-sum-plus-tail oracle."""
    state = _fresh()
    for params in grid:
        for n in N_GRID:
            num_s, _ = oracle.avg_numeric(params, n)
            closed = core.avg_eaoii_closed(params, n)
            err = abs(closed - num_s) / max(abs(num_s), _REL_FLOOR)
            _track(state, err, params, n=n)
    return _result("avg_eaoii_closed_vs_numeric", 1e-8, state)


def check_avg_aat_closed(grid) -> CheckResult:
    """Closed-form average attack time vs the truncated-sum oracle."""
    state = _fresh()
    for params in grid:
        for n in N_GRID:
            _, num_d = oracle.avg_numeric(params, n)
            closed = core.avg_aat_closed(params, n)
            err = abs(closed - num_d) / max(abs(num_d), _REL_FLOOR)
            _track(state, err, params, n=n)
            if not 0.0 <= closed <= 1.0:
                state["failed"] = True
    return _result("avg_aat_closed_vs_numeric", 1e-8, state)


def _usable_ratio(params, n) -> bool:
    """Keep the finite-difference comparison where it has float headroom."""
    gap = core.avg_aat_closed(params, n + 1) - core.avg_aat_closed(params, n)
    return params.q > 0.0 and abs(gap) >= 1e-6


def check_lambda_seq_vs_ratio(grid) -> CheckResult:
    """Tie-subsidy closed form vs the finite-difference ratio of averages."""
    state = _fresh()
    for params in grid:
        for n in (0, 1, 2, 5, 10, 20):
            if not _usable_ratio(params, n):
                continue
            ds = core.avg_eaoii_closed(params, n + 1) - core.avg_eaoii_closed(params, n)
            dd = core.avg_aat_closed(params, n + 1) - core.avg_aat_closed(params, n)
            ratio = ds / dd
            closed = core.lambda_seq(params, n)
            err = abs(closed - ratio) / max(abs(ratio), 1e-12)
            _track(state, err, params, n=n)
    return _result("lambda_seq_vs_ratio", 1e-8, state)


def check_lambda_monotone_below_limit(grid) -> CheckResult:
    """The tie sequence never decreases and never exceeds its limit."""
    state = _fresh()
    for params in grid:
        seq = core.lambda_curve(params, 200)
        limit = core.lambda_limit(params)
        _track(state, max(float(np.max(seq - limit)), 0.0), params)
        diffs = np.diff(seq)
        _track(state, max(float(-diffs.min()), 0.0), params)
        if params.q > 0.0:
            # Strict increase is checked where the increments are resolvable
            # in float64; exact-arithmetic strictness lives in the tests.
            resolvable = (limit - seq[:-1]) > 1e-12 * max(limit, 1.0)
            if np.any(diffs[resolvable] <= 0.0):
                state["failed"] = True
                state["witness"] = _witness(params)
    return _result("lambda_monotone_below_limit", 0.0, state)


def check_lambda_limit_is_sup(grid) -> CheckResult:
    """The limit matches the supremum of the sequence out to n = 10^4."""
    state = _fresh()
    for params in grid:
        sup = float(core.lambda_curve(params, 10_000).max())
        _track(state, abs(core.lambda_limit(params) - sup), params)
    return _result("lambda_limit_is_sup", 1e-6, state)


def _lambda_probe_points(params):
    """Jam costs hitting all three regimes, including exact tie boundaries.

    Regime-two probes stay at small optimal thresholds, where the float
    reward curve resolves its argmax; the deep end (maximizer far out, with
    reward increments below the reward's ULP) belongs to exact-arithmetic
    tests, not to this float oracle.
    """
    limit = core.lambda_limit(params)
    probes = [0.0]
    if params.q > 0.0:
        first = core.lambda_seq(params, 0)
        probes.extend([0.3 * first, 0.6 * first, 0.999 * first])
        for n in (0, 1, 2, 3):
            tie = core.lambda_seq(params, n)
            # Probe just off the tie on both sides: exactly at it the two
            # candidate rewards are equal and a float argmax is a coin flip.
            eps = 1e-9 * max(1.0, tie)
            probes.extend([tie - eps, tie + eps, 0.5 * (tie + core.lambda_seq(params, n + 1))])
        probes.extend([limit, 1.1 * limit, 2.0 * limit + 0.1, 10.0 * limit + 1.0])
    else:
        probes.extend([0.1, 0.5, 1.0, 2.0])
    return probes


def check_optimal_threshold_vs_brute(grid) -> CheckResult:
    """Regime map vs exhaustive argmax of the steady reward curve.

    p = 1 is excluded: there every threshold >= 1 has zero attack time and
    identical reward, so the argmax is a tie and index-exact agreement is
    vacuous.
    """
    state = _fresh()
    for params in grid:
        if params.p == 1.0:
            continue
        for lam in _lambda_probe_points(params):
            mapped = core.optimal_threshold(params, lam)
            brute = oracle.brute_force_threshold(params, lam, n_max=4000)
            if mapped != brute:
                state["failed"] = True
                state["worst"] = max(state["worst"], 1.0)
                state["witness"] = _witness(params, lam=lam)
    return _result("optimal_threshold_vs_brute", 0.0, state)


def check_steady_reward_tie(grid) -> CheckResult:
    """At the tie subsidy, consecutive thresholds earn equal reward."""
    state = _fresh()
    for params in grid:
        for n in N_GRID:
            lam = core.lambda_seq(params, n)
            gap = abs(
                core.steady_reward(params, n, lam) - core.steady_reward(params, n + 1, lam)
            )
            _track(state, gap, params, n=n, lam=lam)
    return _result("steady_reward_tie", 1e-10, state)


def check_exchange_sign_flip(grid) -> CheckResult:
    """reward(n) - reward(n+1) changes sign exactly at the tie subsidy."""
    state = _fresh()
    for params in grid:
        if params.q == 0.0:
            continue
        for n in (0, 2, 5):
            if core.avg_aat_closed(params, n) == core.avg_aat_closed(params, n + 1):
                continue  # p = 1 beyond the first step: both sides tie exactly
            tie = core.lambda_seq(params, n)
            eps = 1e-6 * max(1.0, tie)
            below = core.steady_reward(params, n, tie - eps) - core.steady_reward(
                params, n + 1, tie - eps
            )
            above = core.steady_reward(params, n, tie + eps) - core.steady_reward(
                params, n + 1, tie + eps
            )
            if below < 0.0 or above >= 0.0:
                state["failed"] = True
                state["worst"] = max(state["worst"], 1.0)
                state["witness"] = _witness(params, n=n, lam=tie)
    return _result("exchange_sign_flip", 0.0, state)


def check_whittle_closed_equals_lambda(grid) -> CheckResult:
    """The priority index is the tie subsidy, state for state."""
    state = _fresh()
    for params in grid:
        for n in N_GRID:
            gap = abs(whittle.whittle_index_closed(params, n) - core.lambda_seq(params, n))
            _track(state, gap, params, n=n)
    return _result("whittle_closed_equals_lambda", 0.0, state)


def check_whittle_iterative_vs_closed(grid) -> CheckResult:
    """Iterative infimum construction reproduces the closed-form table.

    p = 1 is excluded: there the ratios driving the construction are 0/0
    limits that no longer depend on the scan state, so the two routes only
    agree on the reachable age 0 (the others are vacuous by unreachability).
    """
    state = _fresh()
    for params in grid:
        if params.p == 1.0:
            continue
        closed = whittle.whittle_table_closed(params, 60)
        iterative = whittle.whittle_index_iterative(params, 60)
        scale = np.maximum(np.abs(closed), 1e-12)
        err = float(np.max(np.abs(closed - iterative) / scale))
        _track(state, err, params)
    return _result("whittle_iterative_vs_closed", 1e-8, state)


def check_whittle_monotone_bounded(grid) -> CheckResult:
    """Index tables never decrease and stay at or below the limit."""
    state = _fresh()
    for params in grid:
        table = whittle.whittle_table_closed(params, 200)
        limit = core.lambda_limit(params)
        _track(state, max(float(np.max(table - limit)), 0.0), params)
        _track(state, max(float(-np.min(np.diff(table))), 0.0), params)
    return _result("whittle_monotone_bounded", 0.0, state)


def check_indexability(grid) -> CheckResult:
    """Average attack time decreases in the threshold for every triple."""
    state = _fresh()
    for params in grid:
        if not whittle.indexability_check(params, 200):
            state["failed"] = True
            state["witness"] = _witness(params)
    return _result("indexability", 0.0, state)


def check_pairwise_tie_floor(grid) -> CheckResult:
    """Pairwise tie subsidies never undercut the consecutive one."""
    state = _fresh()
    for params in grid:
        if params.q == 0.0:
            continue
        for k in (0, 3, 10):
            base = core.lambda_seq(params, k)
            ns = np.arange(k + 1, k + 61, dtype=np.float64)
            ratios = core.intersection_lambda(params, k, ns)
            undercut = max(float(np.max(base - ratios)), 0.0)
            _track(state, undercut, params, n=k)
    return _result("pairwise_tie_floor", 1e-12, state)


def check_intersection_vs_naive(grid) -> CheckResult:
    """Cancelled pairwise ratio vs the raw closed-form difference quotient."""
    state = _fresh()
    for params in grid:
        if params.q == 0.0:
            continue
        for m, n in ((0, 1), (0, 7), (2, 3), (2, 20), (10, 11), (10, 40)):
            dd = core.avg_aat_closed(params, n) - core.avg_aat_closed(params, m)
            if abs(dd) < 1e-6:
                continue
            ds = core.avg_eaoii_closed(params, n) - core.avg_eaoii_closed(params, m)
            naive = ds / dd
            stable = core.intersection_lambda(params, m, n)
            err = abs(stable - naive) / max(abs(naive), 1e-12)
            _track(state, err, params, m=m, n=n)
    return _result("intersection_vs_naive_ratio", 1e-8, state)


def check_rvi_consistency(grid) -> CheckResult:
    """Value iteration reproduces the threshold map and its average reward."""
    state = _fresh()
    for p, q, r in RVI_PARAMS:
        params = core.SubsystemParams(p=p, q=q, r=r)
        limit = core.lambda_limit(params)
        lams = np.linspace(0.0, 1.1 * limit, RVI_LAMBDA_COUNT)
        for lam in lams:
            lam = float(lam)
            expected = core.optimal_threshold(params, lam)
            hint = expected.threshold if expected.is_finite else 120
            cfg = oracle.OracleConfig(
                state_cap=oracle.recommended_state_cap(params, int(hint)),
                tolerance=1e-10,
            )
            result = oracle.relative_value_iteration(params, lam, cfg)
            extracted = oracle.extract_threshold(result)
            if extracted != expected:
                state["failed"] = True
                state["witness"] = _witness(params, lam=lam)
                continue
            if expected.is_finite:
                target = core.steady_reward(params, expected.threshold, lam)
            else:
                target = core.avg_eaoii_no_jam(params)
            _track(state, abs(result.theta - target), params, lam=lam)
    return _result("rvi_consistency", 1e-6, state)


def check_select_jam_set(grid) -> CheckResult:
    """Budgeted selection equals sort-by-(index desc, id asc) prefix."""
    state = _fresh()
    rng = np.random.default_rng(7)
    pool = [params for params in grid if params.q > 0.0]
    for _ in range(40):
        size = int(rng.integers(1, 13))
        fleet = [
            whittle.SubsystemState(
                subsystem_id=i,
                params=pool[int(rng.integers(0, len(pool)))],
                age=int(rng.integers(0, 30)),
            )
            for i in range(size)
        ]
        budget = int(rng.integers(0, size + 1))
        got = whittle.select_jam_set(fleet, budget)
        ranked = sorted(
            fleet,
            key=lambda s: (-whittle.whittle_index_closed(s.params, s.age), s.subsystem_id),
        )
        expected = {s.subsystem_id for s in ranked[:budget]}
        if got != expected:
            state["failed"] = True
            state["witness"] = {"fleet_size": size, "budget": budget}
    return _result("select_jam_set_vs_sort", 0.0, state)


# name -> (function, tolerance). This is the coverage inventory: the report
# always contains exactly these checks, in this order.
CHECKS = {
    "eaoii_identities": (check_eaoii_identities, 1e-14),
    "eaoii_monotone_bounded": (check_eaoii_monotone_bounded, 1e-12),
    "kernel_stochastic": (check_kernel_stochastic, 0.0),
    "stationary_vs_power_iteration": (check_stationary_vs_power_iteration, 1e-8),
    "stationary_normalization": (check_stationary_normalization, 1e-12),
    "stationary_balance": (check_stationary_balance, 1e-10),
    "avg_eaoii_closed_vs_numeric": (check_avg_eaoii_closed, 1e-8),
    "avg_aat_closed_vs_numeric": (check_avg_aat_closed, 1e-8),
    "lambda_seq_vs_ratio": (check_lambda_seq_vs_ratio, 1e-8),
    "lambda_monotone_below_limit": (check_lambda_monotone_below_limit, 0.0),
    "lambda_limit_is_sup": (check_lambda_limit_is_sup, 1e-6),
    "optimal_threshold_vs_brute": (check_optimal_threshold_vs_brute, 0.0),
    "steady_reward_tie": (check_steady_reward_tie, 1e-10),
    "exchange_sign_flip": (check_exchange_sign_flip, 0.0),
    "whittle_closed_equals_lambda": (check_whittle_closed_equals_lambda, 0.0),
    "whittle_iterative_vs_closed": (check_whittle_iterative_vs_closed, 1e-8),
    "whittle_monotone_bounded": (check_whittle_monotone_bounded, 0.0),
    "indexability": (check_indexability, 0.0),
    "pairwise_tie_floor": (check_pairwise_tie_floor, 1e-12),
    "intersection_vs_naive_ratio": (check_intersection_vs_naive, 1e-8),
    "rvi_consistency": (check_rvi_consistency, 1e-6),
    "select_jam_set_vs_sort": (check_select_jam_set, 0.0),
}

MANIFEST = [(name, tol) for name, (_, tol) in CHECKS.items()]


def run_checks(grid=None, names=None) -> dict:
    """Run the (selected) suite and return the JSON-ready report."""
    grid = default_grid() if grid is None else grid
    selected = list(CHECKS) if names is None else list(names)
    unknown = [name for name in selected if name not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}")
    results = []
    for name in selected:
        func, _ = CHECKS[name]
        results.append(func(grid))
    return {
        "grid_size": len(grid),
        "checks": [asdict(res) for res in results],
        "passed": all(res.passed for res in results),
    }
