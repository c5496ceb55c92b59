"""Command line front end and result file formats.

Four subcommands cover the full workflow:

* ``hetnet-opt generate`` draws a scenario file from a topology config,
* ``hetnet-opt solve`` runs one method at one power price,
* ``hetnet-opt sweep`` runs a grid of prices and methods into a CSV,
* ``hetnet-opt cdf`` merges solve results into a per-method rate CDF.

Results are deterministic given the same inputs; only the wall-time field
varies between identical runs.  The environment variable HETNET_OPT_LOG
sets the log level (DEBUG, INFO, ...).  Exit codes: 0 success, 2 bad input
or config, 3 infeasible problem, 4 solver failure or stall.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace

import numpy as np

from .baselines import (
    greedy_turnoff,
    load_balanced_association,
    max_sinr_association,
    optimize_after_association,
)
from .bcga import SolverConfig, SolveResult
from .errors import DualSolveError, HetnetError, InfeasibleError, ScenarioFormatError
from .objective import full_objective, utility as utility_of
from .reweight import solve_sparse, update_weights
from .scenario import (
    Scenario,
    TopologyConfig,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_to_dict,
)

log = logging.getLogger("hetnet_opt")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

METHODS = ("proposed", "greedy", "maxsinr", "loadbal")

SWEEP_COLUMNS = (
    "method",
    "lambda",
    "utility",
    "total_power_w",
    "active_macros",
    "active_picos",
    "seconds",
    "status",
)


def scenario_hash(s: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(s), separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _jsonable(value):
    """Strip numpy types out of nested structures so json.dump accepts them."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def run_method(
    s: Scenario,
    method: str,
    lam: float,
    cfg: SolverConfig | None = None,
    carry: SolveResult | None = None,
) -> SolveResult:
    """Dispatch one solve; all methods return a SolveResult with full_objective in meta.

    `carry` warm-starts the solve from an earlier result on the same
    scenario (continuation across a price sweep): the proposed method seeds
    its first round from the carried point with already-silent stations
    pinned off (reset weights would otherwise regrow them, since a zero
    power column has an enormous rate slope), the greedy keeps the carried
    off set and continues from there, and the fixed-association baselines
    reuse the carried powers.
    """
    cfg = cfg or SolverConfig()
    init = None if carry is None else (carry.association.x, carry.power.p)
    if method == "proposed":
        if carry is None:
            result = solve_sparse(s, lam, cfg=cfg)
        else:
            live = set(int(l) for l in carry.active_bs)
            off0 = tuple(l for l in range(s.num_bs) if l not in live)
            result = solve_sparse(
                s,
                lam,
                tau_schedule=[cfg.tau_floor],
                cfg=cfg,
                init=init,
                off_bs=off0,
                w0=update_weights(carry.power.p, cfg.tau_floor),
            )
    elif method == "greedy":
        off0 = () if carry is None else carry.meta.get("off_bs", ())
        result = greedy_turnoff(s, lam, cfg=cfg, off0=off0, init=init)
    elif method == "maxsinr":
        assoc = max_sinr_association(s, s.budget_by_band)
        result = optimize_after_association(
            s, assoc, lam, cfg, init_power=None if carry is None else carry.power.p
        )
    elif method == "loadbal":
        assoc = load_balanced_association(s, s.budget_by_band, cfg)
        result = optimize_after_association(
            s, assoc, lam, cfg, init_power=None if carry is None else carry.power.p
        )
        # Rounded-relaxation stand-in for a dedicated load-balancing
        # scheme; numbers from it are indicative, not a faithful replica.
        result.meta["association_rule"] = "relaxation_argmax_proxy"
    else:
        raise ScenarioFormatError("method", f"unknown method {method!r}; pick from {METHODS}")
    if "full_objective" not in result.meta:
        result.meta["full_objective"] = full_objective(
            s, result.association.x, result.power.p, lam, cfg.eps_off
        )
    return result


def result_to_dict(
    s: Scenario, method: str, lam: float, cfg: SolverConfig, result: SolveResult, wall_time_s: float
) -> dict:
    x = result.association.x
    p = result.power.p
    active = result.active_bs
    kinds = s.bs_kind
    cfg_echo = asdict(cfg)
    cfg_echo["weights"] = None if cfg.weights is None else np.asarray(cfg.weights).tolist()
    meta = {
        k: _jsonable(v)
        for k, v in result.meta.items()
        if isinstance(v, (int, float, str, list, tuple, np.generic))
        and k not in ("weights", "traces_by_round")
    }
    return {
        "method": method,
        "lambda": lam,
        "scenario_hash": scenario_hash(s),
        "config": cfg_echo,
        "status": result.status,
        "iterations": result.iterations,
        "wall_time_s": wall_time_s,
        "objective": result.meta["full_objective"],
        "utility": utility_of(s, x, p),
        "transmit_power_w": float(p.sum()),
        "total_power_w": float(p.sum()) + float(s.on_power_w[list(active)].sum()),
        "active_bs": [int(l) for l in active],
        "active_macros": int(sum(1 for l in active if kinds[l] == "macro")),
        "active_picos": int(sum(1 for l in active if kinds[l] == "pico")),
        "rates_bps": np.asarray(result.rates).tolist(),
        "meta": meta,
        "X": x.tolist(),
        "P": p.tolist(),
    }


def _cfg_from_args(args) -> SolverConfig:
    cfg = SolverConfig()
    if getattr(args, "tol", None) is not None:
        cfg = replace(cfg, eps_bcga=args.tol)
    if getattr(args, "max_iters", None) is not None:
        cfg = replace(cfg, max_outer_iters=args.max_iters)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    return cfg


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------


def cmd_generate(config_path, out_path, seed=None) -> int:
    """Draw a scenario from a config file (or defaults) and save it."""
    if config_path is None:
        cfg = TopologyConfig()
    else:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError("root", f"config is not valid JSON: {exc}") from exc
        cfg = TopologyConfig.from_dict(data)
    if seed is not None:
        cfg.rng_seed = int(seed)
    cfg.validate()
    s = generate_scenario(cfg)
    save_scenario(s, out_path)
    log.info("wrote scenario K=%d L=%d N=%d to %s", s.num_users, s.num_bs, s.num_bands, out_path)
    return EXIT_OK


def cmd_solve(scenario_path, method, lam, out_path, cfg: SolverConfig | None = None) -> int:
    """Solve one instance with one method; returns the CLI exit code."""
    s = load_scenario(scenario_path)
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    result = run_method(s, method, lam, cfg)
    elapsed = time.perf_counter() - start
    payload = result_to_dict(s, method, lam, cfg, result, elapsed)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")
    log.info(
        "%s lam=%g: objective %.6f, %d active stations, %.2fs",
        method,
        lam,
        payload["objective"],
        len(result.active_bs),
        elapsed,
    )
    if result.status == "stalled":
        log.warning("solver stalled; result written to %s", out_path)
        return EXIT_SOLVER
    return EXIT_OK


def auto_lambda_grid(
    s: Scenario, cfg: SolverConfig | None = None, points: int = 10, lam_start: float = 1e-4
) -> np.ndarray:
    """Logarithmic price grid calibrated so the top end empties the pico tier.

    Doubles the price until the active set stops shrinking (or no pico is
    left transmitting), then spans three decades down from that price.
    """
    cfg = cfg or SolverConfig()
    picos = set(int(l) for l in s.pico_indices)
    lam = lam_start
    prev_size = None
    shrunk = False
    for _ in range(40):
        res = solve_sparse(s, lam, cfg=cfg)
        active = set(res.active_bs)
        size = len(active)
        log.debug("calibration lam=%g active=%d", lam, size)
        if picos and not (active & picos):
            break
        if prev_size is not None and size < prev_size:
            shrunk = True
        # Cheap prices leave the active set flat for several doublings, so
        # the plateau test only arms after the first real shutdown.
        if shrunk and prev_size is not None and size >= prev_size:
            break
        prev_size = size
        lam *= 2.0
    return np.logspace(np.log10(lam) - 3.0, np.log10(lam), points)


def _sweep_row(s, method, lam, cfg, carry=None):
    start = time.perf_counter()
    try:
        result = run_method(s, method, lam, cfg, carry=carry)
        elapsed = time.perf_counter() - start
        active = result.active_bs
        kinds = s.bs_kind
        row = {
            "method": method,
            "lambda": lam,
            "utility": utility_of(s, result.association.x, result.power.p),
            "total_power_w": float(result.power.p.sum()) + float(s.on_power_w[list(active)].sum()),
            "active_macros": int(sum(1 for l in active if kinds[l] == "macro")),
            "active_picos": int(sum(1 for l in active if kinds[l] == "pico")),
            "seconds": elapsed,
            "status": result.status,
        }
        return row, result
    except HetnetError as exc:
        log.warning("sweep point %s lam=%g failed: %s", method, lam, exc)
        return {
            "method": method,
            "lambda": lam,
            "utility": "",
            "total_power_w": "",
            "active_macros": "",
            "active_picos": "",
            "seconds": time.perf_counter() - start,
            "status": f"error:{type(exc).__name__}",
        }, None


def sweep_prices(
    s: Scenario,
    lams,
    methods=("proposed", "greedy"),
    cfg: SolverConfig | None = None,
    continuation: bool = False,
):
    """Solve a grid of prices per method; returns (rows, results) aligned.

    With `continuation` each method walks the prices in ascending order and
    warm-starts every solve from the previous price's solution, which
    traces one frontier instead of re-finding a basin per point.  Failed
    points keep an error row (result None) and do not break the walk.
    """
    cfg = cfg or SolverConfig()
    lams = [float(l) for l in np.sort(np.asarray(list(lams), dtype=float))]
    rows, results = [], []
    for m in methods:
        carry = None
        for lam in lams:
            row, result = _sweep_row(s, m, lam, cfg, carry=carry)
            rows.append(row)
            results.append(result)
            if continuation and result is not None:
                carry = result
    return rows, results


def cmd_sweep(
    scenario_path,
    out_path,
    lambdas=None,
    methods=("proposed", "greedy"),
    workers: int = 1,
    cfg: SolverConfig | None = None,
    continuation: bool = False,
) -> int:
    """Run a price sweep for several methods and write one CSV row per solve.

    Rows that fail keep their place with an error status; the sweep
    continues.  Rows come out sorted by method then price regardless of the
    worker count, and the grid defaults to `auto_lambda_grid`.  With
    `continuation` the solves run serially in ascending price order,
    warm-started per method from the previous price.
    """
    s = load_scenario(scenario_path)
    cfg = cfg or SolverConfig()
    for m in methods:
        if m not in METHODS:
            raise ScenarioFormatError("method", f"unknown method {m!r}; pick from {METHODS}")
    if lambdas is None:
        lams = auto_lambda_grid(s, cfg)
    else:
        lams = np.asarray(list(lambdas), dtype=float)
        if len(lams) == 0 or np.any(lams < 0):
            raise ScenarioFormatError("lambdas", "prices must be nonnegative")

    if continuation:
        if workers > 1:
            log.info("continuation sweep is order dependent; ignoring --workers")
        rows, _ = sweep_prices(s, lams, methods, cfg, continuation=True)
    elif workers > 1:
        tasks = [(m, float(lam)) for m in methods for lam in lams]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = [row for row, _ in pool.map(lambda t: _sweep_row(s, t[0], t[1], cfg), tasks)]
    else:
        rows, _ = sweep_prices(s, lams, methods, cfg, continuation=False)

    rows.sort(key=lambda r: (r["method"], r["lambda"]))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    failures = sum(1 for r in rows if str(r["status"]).startswith("error"))
    log.info("sweep wrote %d rows (%d failed) to %s", len(rows), failures, out_path)
    return EXIT_OK if failures == 0 else EXIT_SOLVER


def cmd_cdf(result_paths, out_path) -> int:
    """Merge solve results into per-method empirical rate CDFs.

    Pools the per-user rates of every input file by method, writes sorted
    (method, rate_bps, cdf) rows, and prints the 10th and 50th percentile
    rate per method.
    """
    by_method: dict = {}
    for path in result_paths:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError("root", f"{path} is not valid JSON: {exc}") from exc
        if "method" not in data or "rates_bps" not in data:
            raise ScenarioFormatError("rates_bps", f"{path} is not a solve result")
        by_method.setdefault(data["method"], []).extend(float(r) for r in data["rates_bps"])

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "rate_bps", "cdf"])
        for method in sorted(by_method):
            rates = np.sort(np.asarray(by_method[method]))
            n = len(rates)
            for i, rate in enumerate(rates):
                writer.writerow([method, repr(float(rate)), repr((i + 1) / n)])

    for method in sorted(by_method):
        rates = np.asarray(by_method[method])
        p10, p50 = np.percentile(rates, [10, 50])
        print(f"{method}: p10={p10:.6g} bit/s  p50={p50:.6g} bit/s  ({len(rates)} samples)")
    return EXIT_OK


# ----------------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetnet-opt",
        description="Joint association and energy-aware power control for multi-band HetNets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="draw a scenario file from a topology config")
    gen.add_argument("--config", help="topology config JSON; defaults when omitted")
    gen.add_argument("--seed", type=int, help="override the config rng seed")
    gen.add_argument("--out", required=True, help="scenario JSON to write")

    solve = sub.add_parser("solve", help="solve one scenario with one method")
    solve.add_argument("--scenario", help="scenario JSON (omit when using --seeds)")
    solve.add_argument("--method", choices=METHODS, default="proposed")
    solve.add_argument("--lambda", dest="lam", type=float, default=0.0, help="power price")
    solve.add_argument("--tol", type=float, help="relative objective tolerance")
    solve.add_argument("--max-iters", type=int, help="outer iteration cap")
    solve.add_argument("--seed", type=int, help="seed echoed into the result config")
    solve.add_argument(
        "--seeds",
        help="comma list; generates a default scenario per seed and writes into --out dir",
    )
    solve.add_argument("--out", required=True, help="result JSON (or directory with --seeds)")

    sweep = sub.add_parser("sweep", help="price sweep over methods into a CSV")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument(
        "--method",
        default="proposed,greedy",
        help="comma list of methods (default proposed,greedy)",
    )
    sweep.add_argument("--lambdas", help="comma list of prices; auto grid when omitted")
    sweep.add_argument("--workers", type=int, default=1, help="concurrent solves")
    sweep.add_argument(
        "--continuation",
        action="store_true",
        help="warm-start each price from the previous one (serial, ascending)",
    )
    sweep.add_argument("--tol", type=float, help="relative objective tolerance")
    sweep.add_argument("--max-iters", type=int, help="outer iteration cap")
    sweep.add_argument("--out", required=True, help="CSV to write")

    cdf = sub.add_parser("cdf", help="merge solve results into rate CDFs")
    cdf.add_argument("results", nargs="+", help="solve result JSON files")
    cdf.add_argument("--out", required=True, help="CSV to write")

    return parser


def _dispatch(args) -> int:
    if args.command == "generate":
        return cmd_generate(args.config, args.out, seed=args.seed)

    if args.command == "solve":
        cfg = _cfg_from_args(args)
        if args.seeds:
            seeds = [int(tok) for tok in args.seeds.split(",") if tok.strip()]
            if not seeds:
                raise ScenarioFormatError("seeds", "no seeds given")
            os.makedirs(args.out, exist_ok=True)
            worst = EXIT_OK
            for seed in seeds:
                topo = TopologyConfig(rng_seed=seed)
                s = generate_scenario(topo)
                tmp_scn = os.path.join(args.out, f"scenario_seed{seed}.json")
                save_scenario(s, tmp_scn)
                out = os.path.join(args.out, f"{args.method}_lam{args.lam:g}_seed{seed}.json")
                code = cmd_solve(tmp_scn, args.method, args.lam, out, cfg=cfg)
                worst = max(worst, code)
            return worst
        if not args.scenario:
            raise ScenarioFormatError("scenario", "--scenario is required without --seeds")
        return cmd_solve(args.scenario, args.method, args.lam, args.out, cfg=cfg)

    if args.command == "sweep":
        cfg = _cfg_from_args(args)
        lambdas = None
        if args.lambdas:
            lambdas = [float(tok) for tok in args.lambdas.split(",") if tok.strip()]
        methods = tuple(tok.strip() for tok in args.method.split(",") if tok.strip())
        return cmd_sweep(
            args.scenario,
            args.out,
            lambdas=lambdas,
            methods=methods,
            workers=args.workers,
            cfg=cfg,
            continuation=args.continuation,
        )

    if args.command == "cdf":
        return cmd_cdf(args.results, args.out)

    raise ScenarioFormatError("command", f"unknown command {args.command!r}")


def main(argv=None) -> int:
    level = os.environ.get("HETNET_OPT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(message)s")

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ScenarioFormatError as exc:
        log.error("input error: %s", exc)
        return EXIT_PARSE
    except InfeasibleError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except DualSolveError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("io error: %s", exc)
        return EXIT_PARSE
    return EXIT_OK  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
