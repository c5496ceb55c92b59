"""Shutdown and association baselines to benchmark the sparse solver against.

Three reference strategies live here:

* a greedy station shutdown that tries switching off one station at a time
  and keeps any change that raises the priced objective,
* a strongest-signal single-station association,
* a load-balanced single-station association obtained by relaxing the
  assignment, optimizing it, and rounding back.

The two association rules produce a fixed serving pattern per user and
band; `optimize_after_association` then runs the block ascent with the
association constrained to that pattern, which is how the baselines get
their power control.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .assoc_proj import ascent_step_x
from .bcga import SolverConfig, SolveResult, default_init, snap_off_columns, solve_weighted
from .errors import InfeasibleError, UncoverableUserError
from .objective import Association, full_objective, user_rates
from .scenario import Scenario


def _check_coverage(s: Scenario, off: frozenset) -> None:
    """Every user must keep a positive gain to some station left on."""
    on = np.array([l not in off for l in range(s.num_bs)])
    if not on.any():
        raise UncoverableUserError(0, "cannot turn off every station")
    best = s.gains[:, on, :].max(axis=(1, 2))
    if np.any(best <= 0.0):
        raise UncoverableUserError(int(np.argmin(best)))


def _restricted_init(s: Scenario, off: frozenset) -> tuple[np.ndarray, np.ndarray]:
    x, p = default_init(s)
    if off:
        cols = sorted(off)
        x[:, :, cols] = 0.0
        p[:, cols] = 0.0
    return x, p


def solve_restricted(
    s: Scenario,
    lam: float,
    off,
    cfg: SolverConfig | None = None,
    init: tuple | None = None,
) -> SolveResult:
    """Block ascent with a set of stations pinned silent.

    Solves the smooth priced objective only; the group penalty is disabled
    (zero weights) because the shutdown decision is made by the caller, not
    by the solver.  `meta["full_objective"]` evaluates the solution with
    on-powers charged to whichever stations still transmit.
    """
    off = frozenset(int(l) for l in off)
    if off and (min(off) < 0 or max(off) >= s.num_bs):
        raise InfeasibleError("off set contains an unknown station index")
    _check_coverage(s, off)

    cfg = replace(cfg or SolverConfig(), lam=float(lam))
    if init is None:
        init = _restricted_init(s, off)
    result = solve_weighted(
        s, cfg, init=init, weights=np.zeros(s.num_bs), off_bs=off
    )
    result = snap_off_columns(s, result, cfg.eps_off)
    result.meta["off_bs"] = sorted(off)
    result.meta["full_objective"] = full_objective(
        s, result.association.x, result.power.p, lam, cfg.eps_off
    )
    return result


def _order_stations(s: Scenario, test_order) -> list:
    if test_order == "macro_first":
        return [int(l) for l in s.macro_indices] + [int(l) for l in s.pico_indices]
    if test_order == "index":
        return list(range(s.num_bs))
    order = [int(l) for l in test_order]
    if sorted(set(order)) != sorted(order) or any(l < 0 or l >= s.num_bs for l in order):
        raise InfeasibleError("test_order must list distinct station indices")
    return order


def greedy_turnoff(
    s: Scenario,
    lam: float,
    cfg: SolverConfig | None = None,
    test_order="macro_first",
    passes: int = 2,
    off0=(),
    init: tuple | None = None,
) -> SolveResult:
    """Greedy station shutdown against the priced objective.

    Starting from everything on (minus any `off0` carried in, which stays
    off), each station in `test_order` is trial silenced and the restricted
    problem re-solved from the incumbent; the shutdown sticks only if the
    full objective strictly increases.  The order defaults to macros before
    picos, and the sweep runs `passes` times so stations that survive get a
    second look after the network has thinned out.  Candidates whose
    removal would leave a user with no serving station are skipped
    outright.  `init` (x, p) seeds the starting solve; price sweeps pass
    the previous price's solution and off set to continue the frontier.
    """
    order = _order_stations(s, test_order)
    cfg = replace(cfg or SolverConfig(), lam=float(lam))

    off: set = set(int(l) for l in off0)
    if init is not None and off:
        x0, p0 = np.array(init[0], dtype=float), np.array(init[1], dtype=float)
        cols = sorted(off)
        x0[:, :, cols] = 0.0
        p0[:, cols] = 0.0
        if np.any(user_rates(s, x0, p0) <= 0.0):
            x0, p0 = _restricted_init(s, frozenset(off))
        init = (x0, p0)
    incumbent = solve_restricted(s, lam, frozenset(off), cfg, init=init)
    best_value = incumbent.meta["full_objective"]
    accepted = []
    tested = 0

    for _ in range(passes):
        for cand in order:
            if cand in off:
                continue
            trial_off = frozenset(off | {cand})
            try:
                _check_coverage(s, trial_off)
            except UncoverableUserError:
                continue
            tested += 1

            x0 = incumbent.association.x.copy()
            p0 = incumbent.power.p.copy()
            cols = sorted(trial_off)
            x0[:, :, cols] = 0.0
            p0[:, cols] = 0.0
            if np.any(user_rates(s, x0, p0) <= 0.0):
                x0, p0 = _restricted_init(s, trial_off)

            candidate = solve_restricted(s, lam, trial_off, cfg, init=(x0, p0))
            value = candidate.meta["full_objective"]
            if value > best_value:
                off.add(cand)
                incumbent = candidate
                best_value = value
                accepted.append((cand, value))

    incumbent.meta.update(
        {
            "off_bs": sorted(off),
            "full_objective": best_value,
            "accepted_turnoffs": accepted,
            "candidates_tested": tested,
        }
    )
    return incumbent


def max_sinr_association(s: Scenario, p: np.ndarray) -> Association:
    """Single-station association by strongest received signal.

    For fixed powers the per-band SINR order matches the received-power
    order, so each user picks argmax of gain times power (ties go to the
    lowest station index), and each station splits its airtime evenly over
    the users that picked it.
    """
    p = np.asarray(p, dtype=float)
    if not p.sum() > 0:
        raise InfeasibleError("association needs some positive transmit power")
    received = s.gains_by_band * p[:, None, :]
    best = received.argmax(axis=2)  # (N, K)
    x = np.zeros((s.num_bands, s.num_users, s.num_bs))
    users = np.arange(s.num_users)
    for n in range(s.num_bands):
        counts = np.bincount(best[n], minlength=s.num_bs)
        x[n, users, best[n]] = 1.0 / counts[best[n]]
    return Association(x)


def load_balanced_association(
    s: Scenario,
    p: np.ndarray,
    cfg: SolverConfig | None = None,
    max_rounds: int = 300,
    tol: float = 1e-7,
) -> Association:
    """Single-station association that accounts for station load.

    Optimizes the relaxed (fractional, multi-station) association at fixed
    powers by projected gradient ascent, then rounds each user and band to
    the station holding its largest share and splits that station's airtime
    evenly.  Exact share ties break toward the station carrying fewer users
    so far (then the lowest index), so fully symmetric instances come out
    with balanced counts instead of piling onto station 0.  Compared to
    strongest-signal association this moves users off crowded stations onto
    idle ones.
    """
    cfg = cfg or SolverConfig()
    p = np.asarray(p, dtype=float)
    x, _ = default_init(s)
    duals = None
    alpha_prev = cfg.alpha0
    value = None

    for _ in range(max_rounds):
        res = ascent_step_x(
            s,
            x,
            p,
            alpha0=min(cfg.alpha0, 4.0 * alpha_prev),
            shrink=cfg.armijo_shrink,
            slope=cfg.armijo_slope,
            max_halvings=cfg.max_halvings,
            dual_tol=cfg.dual_tol,
            dual_max_iters=cfg.dual_max_iters,
            warm_duals=duals,
        )
        duals = res.duals
        x = res.x
        if res.accepted:
            alpha_prev = res.alpha
        if not res.accepted:
            break
        if value is not None and abs(res.utility - value) / max(1.0, abs(value)) < tol:
            value = res.utility
            break
        value = res.utility

    rounded = np.zeros_like(x)
    for n in range(s.num_bands):
        load = np.zeros(s.num_bs, dtype=int)
        pick = np.empty(s.num_users, dtype=int)
        for k in range(s.num_users):
            row = x[n, k]
            tied = np.flatnonzero(row == row.max())
            pick[k] = tied[np.argmin(load[tied])] if len(tied) > 1 else tied[0]
            load[pick[k]] += 1
        for k in range(s.num_users):
            rounded[n, k, pick[k]] = 1.0 / load[pick[k]]
    return Association(rounded)


def optimize_after_association(
    s: Scenario,
    assoc: Association,
    lam: float,
    cfg: SolverConfig | None = None,
    init_power: np.ndarray | None = None,
) -> SolveResult:
    """Block ascent with the association pattern frozen.

    Airtime shares may still move within the nonzero pattern of `assoc`
    (users can get more or less of their station's time), but no new
    user-station link is created.  Powers are optimized without
    restriction.  With a full support this is identical to the ordinary
    weighted solve.
    """
    cfg = replace(cfg or SolverConfig(), lam=float(lam))
    x0 = np.asarray(assoc.x, dtype=float)
    support = x0 > 0.0
    p0 = s.budget_by_band.copy() if init_power is None else np.asarray(init_power, dtype=float)
    result = solve_weighted(s, cfg, init=(x0, p0), x_support=support)
    result = snap_off_columns(s, result, cfg.eps_off)
    result.meta["full_objective"] = full_objective(
        s, result.association.x, result.power.p, lam, cfg.eps_off
    )
    return result
