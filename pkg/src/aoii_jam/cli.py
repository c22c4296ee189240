"""Command-line harness: verification suite, experiment sweeps, ad-hoc runs.

Subcommands: verify | sweep-lambda | threshold-curve | multi-sim |
whittle-table | sim. Output is CSV (default) or JSON; leading ``#``
comment lines echo the resolved configuration so every file documents how
it was produced. All commands are deterministic for a fixed configuration
and seed: no timestamps, floats printed with 17 significant digits.

Exit codes: 0 success, 1 verification failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import verify
from .core import (
    INFINITE,
    SubsystemParams,
    avg_eaoii_no_jam,
    eaoii_ladder,
    lambda_limit,
    optimal_threshold,
    steady_reward,
)
from .sim import (
    RandomJam,
    RandomMultiJam,
    ThresholdJam,
    WhittleJam,
    simulate_multi_batch,
    simulate_single,
    single_trace,
)
from .whittle import FleetConfig, whittle_index_iterative, whittle_table_closed


class ConfigError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return str(value)


def _write_table(stream, config: dict, columns: list[str], rows: list[tuple], fmt: str):
    if fmt == "json":
        payload = {
            "config": config,
            "rows": [dict(zip(columns, row)) for row in rows],
        }
        json.dump(payload, stream, indent=2, sort_keys=True, default=str)
        stream.write("\n")
        return
    for key in sorted(config):
        stream.write(f"# {key}={_fmt(config[key])}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w"), True


def _emit(path, config, columns, rows, fmt):
    stream, close = _open_out(path)
    try:
        _write_table(stream, config, columns, rows, fmt)
    finally:
        if close:
            stream.close()


def _parse_params(text: str) -> SubsystemParams:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--params expects 'p,q,r', got {text!r}")
    try:
        p, q, r = (float(x) for x in parts)
        return SubsystemParams(p=p, q=q, r=r)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_policy(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "never":
            return ThresholdJam(INFINITE)
        if kind == "always":
            return ThresholdJam(0)
        if kind == "threshold":
            if arg.lower() in ("inf", "infinite"):
                return ThresholdJam(INFINITE)
            return ThresholdJam(int(arg))
        if kind == "random":
            return RandomJam(float(arg))
    except ValueError as exc:
        raise ConfigError(f"bad policy {text!r}: {exc}") from exc
    raise ConfigError(f"unknown policy kind {text!r}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_classes(text: str) -> list[tuple[SubsystemParams, float]]:
    classes = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 4:
            raise ConfigError(f"class spec needs 'p,q,r,fraction', got {chunk!r}")
        p, q, r, frac = (float(x) for x in parts)
        classes.append((SubsystemParams(p=p, q=q, r=r), frac))
    total = sum(frac for _, frac in classes)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"class fractions must sum to 1, got {total}")
    return classes


def _resolve(args, file_cfg: dict, key: str, default):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _load_config(args) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    with open(args.config) as handle:
        cfg = json.load(handle)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _lambda_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ConfigError("lambda step must be positive")
    if hi < lo:
        raise ConfigError("lambda range is empty")
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def _threshold_cell(policy) -> str:
    return "INF" if not policy.is_finite else str(policy.threshold)


# --- subcommands -----------------------------------------------------------


def cmd_verify(args) -> int:
    file_cfg = _load_config(args)
    names = _resolve(args, file_cfg, "checks", None)
    if isinstance(names, str):
        names = [x for x in names.split(",") if x]
    report = verify.run_checks(names=names)
    stream, close = _open_out(args.out)
    try:
        json.dump(report, stream, indent=2, sort_keys=True)
        stream.write("\n")
    finally:
        if close:
            stream.close()
    return 0 if report["passed"] else 1


def cmd_sweep_lambda(args) -> int:
    file_cfg = _load_config(args)
    params = _require_params(args, file_cfg)
    lo = _resolve(args, file_cfg, "lambda-min", 0.0)
    hi = _resolve(args, file_cfg, "lambda-max", 10.0)
    step = _resolve(args, file_cfg, "lambda-step", 0.001)
    horizon = int(_resolve(args, file_cfg, "horizon", 1_000_000))
    seed = int(_resolve(args, file_cfg, "seed", 12345))
    full = bool(_resolve(args, file_cfg, "full", False))
    grid = _lambda_grid(lo, hi, step)
    keep = np.arange(len(grid)) if full else np.arange(0, len(grid), 10)

    baseline = simulate_single(params, RandomJam(0.5), 0.0, horizon, seed)
    cache: dict = {}
    rows = []
    for i in keep:
        lam = float(grid[i])
        policy = optimal_threshold(params, lam)
        key = policy.threshold if policy.is_finite else "INF"
        if key not in cache:
            cache[key] = simulate_single(params, ThresholdJam(policy.threshold), 0.0, horizon, seed)
        stats = cache[key]
        closed = (
            steady_reward(params, policy.threshold, lam)
            if policy.is_finite
            else avg_eaoii_no_jam(params)
        )
        rows.append(
            (
                lam,
                closed,
                stats.avg_eaoii - lam * stats.avg_aat,
                baseline.avg_eaoii - lam * baseline.avg_aat,
                _threshold_cell(policy),
            )
        )
    config = {
        "command": "sweep-lambda",
        "p": params.p,
        "q": params.q,
        "r": params.r,
        "lambda-min": lo,
        "lambda-max": hi,
        "lambda-step": step,
        "horizon": horizon,
        "seed": seed,
        "full": full,
        "decimation": 1 if full else 10,
    }
    columns = [
        "lambda",
        "optimal_reward_closed",
        "optimal_reward_sim",
        "random_reward_sim",
        "threshold_n",
    ]
    _emit(args.out, config, columns, rows, args.format)
    return 0


def cmd_threshold_curve(args) -> int:
    file_cfg = _load_config(args)
    params = _require_params(args, file_cfg)
    lo = _resolve(args, file_cfg, "lambda-min", 0.0)
    hi = _resolve(args, file_cfg, "lambda-max", 10.0)
    step = _resolve(args, file_cfg, "lambda-step", 0.001)
    full = bool(_resolve(args, file_cfg, "full", False))
    grid = _lambda_grid(lo, hi, step)
    keep = np.arange(len(grid)) if full else np.arange(0, len(grid), 10)
    rows = [
        (float(grid[i]), _threshold_cell(optimal_threshold(params, float(grid[i]))))
        for i in keep
    ]
    config = {
        "command": "threshold-curve",
        "p": params.p,
        "q": params.q,
        "r": params.r,
        "lambda-min": lo,
        "lambda-max": hi,
        "lambda-step": step,
        "full": full,
        "decimation": 1 if full else 10,
        "lambda-limit": lambda_limit(params),
    }
    _emit(args.out, config, ["lambda", "threshold_n"], rows, args.format)
    return 0


def cmd_multi_sim(args) -> int:
    file_cfg = _load_config(args)
    classes_text = _resolve(args, file_cfg, "classes", None)
    if classes_text is None:
        raise ConfigError("--classes (or a config file) is required")
    classes = (
        _parse_classes(classes_text) if isinstance(classes_text, str) else [
            (SubsystemParams(p=c["p"], q=c["q"], r=c["r"]), c["fraction"]) for c in classes_text
        ]
    )
    n_list = _resolve(args, file_cfg, "n-list", "4,8,16,24,32,40")
    n_values = _parse_int_list(n_list) if isinstance(n_list, str) else [int(x) for x in n_list]
    m_rule = str(_resolve(args, file_cfg, "m-rule", "half"))
    horizon = int(_resolve(args, file_cfg, "horizon", 100_000))
    seeds_text = _resolve(args, file_cfg, "seeds", "0,1,2,3,4,5,6,7,8,9")
    seeds = _parse_int_list(seeds_text) if isinstance(seeds_text, str) else [int(x) for x in seeds_text]
    if not seeds:
        raise ConfigError("at least one seed is required")

    def budget_for(n: int) -> int:
        if m_rule == "half":
            return n // 2
        try:
            return int(m_rule)
        except ValueError as exc:
            raise ConfigError(f"unknown m-rule {m_rule!r}") from exc

    rows = []
    for n_total in n_values:
        fleet = FleetConfig.from_classes(classes, n_total, budget_for(n_total))
        whittle_runs = simulate_multi_batch(fleet, WhittleJam(fleet.budget), horizon, seeds)
        random_runs = simulate_multi_batch(fleet, RandomMultiJam(fleet.budget), horizon, seeds)
        w_vals = np.array([s.avg_true_aoii for s in whittle_runs])
        r_vals = np.array([s.avg_true_aoii for s in random_runs])
        rows.append(
            (
                n_total,
                float(w_vals.mean()),
                _seed_stderr(w_vals),
                float(r_vals.mean()),
                _seed_stderr(r_vals),
            )
        )
    config = {
        "command": "multi-sim",
        "classes": ";".join(
            f"{c.p},{c.q},{c.r},{frac}" for c, frac in classes
        ),
        "n-list": ",".join(str(n) for n in n_values),
        "m-rule": m_rule,
        "horizon": horizon,
        "seeds": ",".join(str(s) for s in seeds),
        "normalization": "per-slot fleet totals divided by N",
    }
    columns = ["N", "whittle_avg_aoii", "whittle_stderr", "random_avg_aoii", "random_stderr"]
    _emit(args.out, config, columns, rows, args.format)
    return 0


def _seed_stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return float("nan")
    return float(values.std(ddof=1) / np.sqrt(len(values)))


def cmd_whittle_table(args) -> int:
    file_cfg = _load_config(args)
    params_list = args.params or file_cfg.get("params")
    if not params_list:
        raise ConfigError("at least one --params triple is required")
    parsed = [
        _parse_params(text) if isinstance(text, str) else SubsystemParams(**text)
        for text in params_list
    ]
    k_max = int(_resolve(args, file_cfg, "k-max", 200))
    method = str(_resolve(args, file_cfg, "method", "closed"))
    if method not in ("closed", "iterative"):
        raise ConfigError(f"method must be closed or iterative, got {method!r}")
    rows = []
    for sub_id, params in enumerate(parsed):
        if method == "closed":
            table = whittle_table_closed(params, k_max)
        else:
            table = whittle_index_iterative(params, k_max)
        ladder = eaoii_ladder(params, k_max + 1)
        for k in range(k_max + 1):
            rows.append((sub_id, k, float(ladder[k]), float(table[k])))
    config = {
        "command": "whittle-table",
        "params": ";".join(f"{p.p},{p.q},{p.r}" for p in parsed),
        "k-max": k_max,
        "method": method,
    }
    _emit(args.out, config, ["subsystem_id", "k", "s_k", "W"], rows, args.format)
    return 0


def cmd_sim(args) -> int:
    file_cfg = _load_config(args)
    params = _require_params(args, file_cfg)
    policy_text = str(_resolve(args, file_cfg, "policy", "never"))
    policy = _parse_policy(policy_text)
    lam = float(_resolve(args, file_cfg, "lam", file_cfg.get("lambda", 0.0)))
    horizon = int(_resolve(args, file_cfg, "horizon", 100_000))
    seed = int(_resolve(args, file_cfg, "seed", 12345))
    stats = simulate_single(params, policy, lam, horizon, seed)
    config = {
        "command": "sim",
        "p": params.p,
        "q": params.q,
        "r": params.r,
        "policy": policy_text,
        "lambda": lam,
        "horizon": horizon,
        "seed": seed,
    }
    columns = [
        "slots",
        "seed",
        "lambda",
        "avg_reward",
        "avg_eaoii",
        "avg_true_aoii",
        "avg_aat",
        "se_reward",
        "se_eaoii",
        "se_true_aoii",
        "se_aat",
    ]
    row = (
        stats.slots,
        stats.seed,
        stats.lam,
        stats.avg_reward,
        stats.avg_eaoii,
        stats.avg_true_aoii,
        stats.avg_aat,
        stats.se_reward,
        stats.se_eaoii,
        stats.se_true_aoii,
        stats.se_aat,
    )
    _emit(args.out, config, columns, [row], args.format)
    if args.trace is not None:
        trace = single_trace(params, policy, horizon, seed)
        trace_rows = [
            (
                int(trace["slot"][t]),
                0,
                int(trace["age_index"][t]),
                int(trace["true_aoii"][t]),
                bool(trace["jammed"][t]),
                bool(trace["delivered"][t]),
            )
            for t in range(horizon)
        ]
        with open(args.trace, "w") as handle:
            _write_table(
                handle,
                config,
                ["slot", "subsystem_id", "age_index", "true_aoii", "jammed", "delivered"],
                trace_rows,
                "csv",
            )
    return 0


def _require_params(args, file_cfg) -> SubsystemParams:
    text = _resolve(args, file_cfg, "params", None)
    if text is None:
        raise ConfigError("--params p,q,r (or a config file) is required")
    if isinstance(text, str):
        return _parse_params(text)
    return SubsystemParams(**text)


# --- argument parsing ------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--out", default=None, help="output file (default stdout)")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_lambda_range(sub):
    sub.add_argument("--lambda-min", type=float, dest="lambda_min")
    sub.add_argument("--lambda-max", type=float, dest="lambda_max")
    sub.add_argument("--lambda-step", type=float, dest="lambda_step")
    sub.add_argument("--full", action="store_const", const=True, default=None,
                     help="emit every grid point instead of every 10th")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoii-jam",
        description="Jamming-policy analysis against AoII-based monitoring",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("verify", help="run the oracle-equivalence suite")
    _add_common(sub)
    sub.add_argument("--checks", help="comma-separated check names (default all)")
    sub.set_defaults(func=cmd_verify)

    sub = subs.add_parser("sweep-lambda", help="reward vs jamming cost sweep")
    _add_common(sub)
    sub.add_argument("--params", help="p,q,r")
    _add_lambda_range(sub)
    sub.add_argument("--horizon", type=int)
    sub.add_argument("--seed", type=int)
    sub.set_defaults(func=cmd_sweep_lambda)

    sub = subs.add_parser("threshold-curve", help="optimal threshold vs jamming cost")
    _add_common(sub)
    sub.add_argument("--params", help="p,q,r")
    _add_lambda_range(sub)
    sub.set_defaults(func=cmd_threshold_curve)

    sub = subs.add_parser("multi-sim", help="fleet comparison: index policy vs random")
    _add_common(sub)
    sub.add_argument("--classes", help="p,q,r,fraction;p,q,r,fraction;...")
    sub.add_argument("--n-list", dest="n_list", help="fleet sizes, e.g. 4,8,16")
    sub.add_argument("--m-rule", dest="m_rule", help="'half' or a fixed integer budget")
    sub.add_argument("--horizon", type=int)
    sub.add_argument("--seeds", help="comma-separated seeds")
    sub.set_defaults(func=cmd_multi_sim)

    sub = subs.add_parser("whittle-table", help="per-state priority index table")
    _add_common(sub)
    sub.add_argument("--params", action="append", help="p,q,r (repeatable)")
    sub.add_argument("--k-max", type=int, dest="k_max")
    sub.add_argument("--method", choices=("closed", "iterative"))
    sub.set_defaults(func=cmd_whittle_table)

    sub = subs.add_parser("sim", help="ad-hoc single-source simulation")
    _add_common(sub)
    sub.add_argument("--params", help="p,q,r")
    sub.add_argument("--policy", help="never|always|threshold:N|threshold:inf|random:P")
    sub.add_argument("--lambda", type=float, dest="lam")
    sub.add_argument("--horizon", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--trace", help="also write a per-slot trace CSV to this path")
    sub.set_defaults(func=cmd_sim)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
