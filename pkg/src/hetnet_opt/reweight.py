"""Iterative reweighting that turns the group penalty into real shutdowns.

The on-power cost counts stations, which is combinatorial, so the solver
works with a weighted 2-norm surrogate instead.  Solving with unit weights,
then setting each station's weight to the reciprocal of its power norm plus
a vanishing smoothing term, and repeating, drives redundant stations to
exactly zero power: a barely loaded column gets a huge weight, the prox
threshold swamps its norm, and the column snaps off.  The smoothing term
tau shrinks geometrically with a floor so weights stay finite.

Iteration stops once the set of transmitting stations has survived two
consecutive rounds unchanged and either the weights of those live stations
have settled or the unweighted objective has stopped moving.  Off stations
are excluded from the weight check: their weights keep growing as tau
decays, but past the shutdown threshold the growth cannot change any
iterate.  The objective fallback matters for stations pinned at tiny power
by a user only they can serve: their weights wander with every re-solve
even though the solution is finished.  With a zero power price the weights
never matter and a single inner solve is returned.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .bcga import (
    SolverConfig,
    SolveResult,
    default_init,
    snap_off_columns,
    solve_weighted,
)
from .errors import InfeasibleError, StarvedUserError
from .objective import Association, PowerMatrix, full_objective, user_rates
from .scenario import Scenario

# Relative settling tolerance for the unweighted objective between outer
# rounds; matches the spirit of the 1e-3 weight tolerance one level up.
_OBJ_SETTLE_REL = 1e-4


def update_weights(p: np.ndarray, tau: float) -> np.ndarray:
    """New group weights: 1 / (column norm + tau), one per station."""
    if not tau > 0.0:
        raise InfeasibleError("tau must be positive")
    return 1.0 / (np.linalg.norm(np.asarray(p, dtype=float), axis=0) + tau)


def _tau_at(cfg: SolverConfig, schedule, t: int) -> float:
    if schedule is None:
        return max(cfg.tau0 * cfg.tau_decay**t, cfg.tau_floor)
    if callable(schedule):
        tau = float(schedule(t))
    else:
        seq = list(schedule)
        if not seq:
            raise InfeasibleError("tau schedule must not be empty")
        tau = float(seq[min(t, len(seq) - 1)])
    if not tau > 0.0:
        raise InfeasibleError("tau schedule must stay positive")
    return tau


def solve_sparse(
    s: Scenario,
    lam: float,
    tau_schedule=None,
    cfg: SolverConfig | None = None,
    init: tuple | None = None,
    off_bs=(),
    w0: np.ndarray | None = None,
) -> SolveResult:
    """Reweighted sequence of weighted solves, shutdown, then a level refit.

    `tau_schedule` may be None (geometric schedule from the config), a
    positive sequence indexed by round, or a callable round -> tau.  An
    explicit `init` (x, p) seeds the first round instead of the uniform
    default, `off_bs` pins stations silent throughout, and `w0` replaces the
    all-ones starting weights.  Price sweeps use all three to continue from
    the previous price's solution: the carried point seeds the ascent, its
    silent stations stay silent (reset weights would otherwise regrow them),
    and weights derived from its power norms skip the early rounds in which
    uniform weights slowly relearn which stations matter.  The returned
    result carries exactly-zero power columns for stations whose norm fell
    at or below `eps_off`, and `meta["full_objective"]` holds the utility
    minus the priced consumption including on-powers.

    The weighted surrogate prices transmit power at the margin by roughly
    the on-power over the column norm, which biases the surviving stations'
    levels far below what the real objective asks for.  After the shutdown
    decision settles, a final zero-weight solve on the surviving support
    refits the levels against the real priced objective (its trace and
    iteration count land in `meta["polish_trace"]` and
    `meta["polish_iterations"]`).  With a zero price the single unweighted
    solve is already unbiased and is returned as is.
    """
    cfg = replace(cfg or SolverConfig(), lam=float(lam))
    cfg.validate(s)

    off = frozenset(int(l) for l in off_bs)
    if off and (min(off) < 0 or max(off) >= s.num_bs):
        raise InfeasibleError("off_bs contains an unknown station index")

    if w0 is None:
        w = np.ones(s.num_bs)
    else:
        w = np.asarray(w0, dtype=float).copy()
        if w.shape != (s.num_bs,) or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InfeasibleError("w0 must be positive and finite, one per station")
    if init is None:
        init = default_init(s)
    prev_active = None
    prev_objective = None
    reweight_iters = 0
    inner_iterations = []
    traces_by_round = []
    taus = []
    result = None

    for t in range(cfg.max_reweight_iters):
        result = solve_weighted(s, cfg, init=init, weights=w, off_bs=off)
        reweight_iters = t + 1
        inner_iterations.append(result.iterations)
        traces_by_round.append(list(result.objective_trace))
        active = frozenset(result.active_bs)
        objective = full_objective(
            s, result.association.x, result.power.p, cfg.lam, cfg.eps_off
        )

        if cfg.lam == 0.0:
            break  # weights never enter the objective

        tau = _tau_at(cfg, tau_schedule, t)
        taus.append(tau)
        w_new = update_weights(result.power.p, tau)

        if prev_active is not None and active == prev_active:
            live = sorted(active)
            rel = max(
                (abs(w_new[l] - w[l]) / w[l] for l in live),
                default=0.0,
            )
            # The objective fallback only arms once tau has bottomed out;
            # while tau still shrinks, a quiet round just means the weights
            # have not bitten yet.
            settled = tau <= cfg.tau_floor and abs(
                objective - prev_objective
            ) <= _OBJ_SETTLE_REL * (1.0 + abs(objective))
            if rel < cfg.weight_rel_tol or settled:
                break

        prev_active = active
        prev_objective = objective
        w = w_new
        init = (result.association.x, result.power.p)

    # Hard shutdown: columns that ended at or below the off threshold become
    # exact zeros before the unweighted objective is evaluated.
    p = result.power.p.copy()
    norms = np.linalg.norm(p, axis=0)
    dead = norms <= cfg.eps_off
    p[:, dead] = 0.0
    x = result.association.x

    rates = user_rates(s, x, p)
    if np.any(rates <= 0.0):
        raise StarvedUserError(int(np.argmin(rates)), "shutdown starved a user")

    status = result.status
    polish_trace: list = []
    polish_iterations = 0
    if cfg.lam > 0.0:
        silent = off | frozenset(int(l) for l in np.flatnonzero(dead))
        refit = solve_weighted(
            s, cfg, init=(x, p), weights=np.zeros(s.num_bs), off_bs=silent
        )
        refit = snap_off_columns(s, refit, cfg.eps_off)
        x = refit.association.x
        p = refit.power.p
        rates = refit.rates
        status = refit.status
        polish_trace = list(refit.objective_trace)
        polish_iterations = refit.iterations

    power = PowerMatrix(p)
    return SolveResult(
        association=Association(x),
        power=power,
        objective_trace=result.objective_trace,
        rates=rates,
        active_bs=power.active_stations(cfg.eps_off),
        iterations=int(sum(inner_iterations)) + polish_iterations,
        status=status,
        meta={
            "lambda": cfg.lam,
            "off_bs": sorted(off),
            "reweight_iters": reweight_iters,
            "inner_iterations": inner_iterations,
            "traces_by_round": traces_by_round,
            "polish_trace": polish_trace,
            "polish_iterations": polish_iterations,
            "tau_used": taus,
            "weights": w,
            "full_objective": full_objective(s, x, p, cfg.lam, cfg.eps_off),
        },
    )
