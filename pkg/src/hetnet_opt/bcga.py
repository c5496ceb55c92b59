"""Block coordinate gradient ascent over association and power.

Each outer iteration takes one projected gradient step on the association
tensor (all bands at once) and one proximal gradient step on the power
matrix (all stations at once, Jacobi style against the powers frozen at the
start of the step).  Both steps backtrack until they do not decrease the
ascent target, which is the smooth objective minus the weighted group
penalty, so the recorded objective trace is nondecreasing at every accepted
step.  The loop ends when a full round moves the objective by less than a
relative tolerance, when both blocks stall, or at the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assoc_proj import ascent_step_x
from .errors import InfeasibleError, StarvedUserError
from .objective import (
    EPS_FEAS,
    EPS_OFF,
    Association,
    PowerMatrix,
    group_penalty,
    user_rates,
)
from .power_prox import ascent_step_p
from .scenario import Scenario

# Backtracked steps regrow by this factor between iterations, so one bad
# iteration does not permanently shrink the step size.
_STEP_REGROW = 4.0


@dataclass
class SolverConfig:
    """Tunables for the ascent and the reweighting loop around it."""

    lam: float = 0.0                 # price of consumed power in the objective
    weights: np.ndarray | None = None  # per-station group weights; None means all ones
    alpha0: float = 1.0              # initial / maximal association step
    beta0: float = 0.5               # initial / maximal power step
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    max_halvings: int = 40
    eps_bcga: float = 1e-6           # relative objective change declaring convergence
    max_outer_iters: int = 500
    dual_tol: float = 1e-9           # projection dual residual; keeps airtime sums within 1e-9
    dual_max_iters: int = 5000
    eps_off: float = EPS_OFF
    tau0: float = 1.0                # reweighting smoothing, shrinks geometrically
    tau_decay: float = 0.1
    tau_floor: float = 1e-6
    max_reweight_iters: int = 15
    weight_rel_tol: float = 1e-3
    rng_seed: int = 0                # echoed into results; the solver itself is deterministic

    def validate(self, s: Scenario | None = None) -> None:
        if self.lam < 0:
            raise InfeasibleError("lam must be >= 0")
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise InfeasibleError("step sizes must be positive")
        if not (0 < self.armijo_shrink < 1):
            raise InfeasibleError("armijo_shrink must lie in (0, 1)")
        if not (0 <= self.armijo_slope < 1):
            raise InfeasibleError("armijo_slope must lie in [0, 1)")
        if self.max_outer_iters < 1 or self.max_reweight_iters < 1:
            raise InfeasibleError("iteration caps must be >= 1")
        if not (self.eps_bcga > 0 and self.dual_tol > 0 and self.tau_floor > 0):
            raise InfeasibleError("tolerances must be positive")
        if not (0 < self.tau_decay < 1) or not (self.tau0 > 0):
            raise InfeasibleError("tau schedule must be positive and decreasing")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if s is not None and w.shape != (s.num_bs,):
                raise InfeasibleError(f"weights must have shape ({s.num_bs},)")
            if np.any(w < 0) or np.any(np.isnan(w)):
                raise InfeasibleError("weights must be nonnegative")


@dataclass
class SolveResult:
    """Converged iterate plus the diagnostics needed to audit the run."""

    association: Association
    power: PowerMatrix
    objective_trace: list = field(default_factory=list)
    rates: np.ndarray | None = None
    active_bs: list = field(default_factory=list)
    iterations: int = 0
    status: str = ""
    meta: dict = field(default_factory=dict)


def snap_off_columns(s: Scenario, result: SolveResult, eps_off: float = EPS_OFF) -> SolveResult:
    """Replace below-threshold power columns with exact zeros.

    Stations whose column norm is at or below `eps_off` are reported as off,
    so their powers should read as exact zeros rather than denormal dust.
    The snap is skipped entirely if it would starve a user (a tiny column
    that is somehow load bearing stays put, and the station stays listed as
    off by the norm test either way).
    """
    p = result.power.p
    norms = np.linalg.norm(p, axis=0)
    drop = (norms > 0.0) & (norms <= eps_off)
    if not drop.any():
        return result
    p = p.copy()
    p[:, drop] = 0.0
    rates = user_rates(s, result.association.x, p)
    if np.any(rates <= 0.0):
        return result
    power = PowerMatrix(p)
    return SolveResult(
        association=result.association,
        power=power,
        objective_trace=result.objective_trace,
        rates=rates,
        active_bs=power.active_stations(eps_off),
        iterations=result.iterations,
        status=result.status,
        meta=dict(result.meta),
    )


def default_init(s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Feasible starting point: uniform airtime shares at full power.

    The share min(1/L, 1/K) keeps both row and column sums at or below one
    for any mix of user and station counts.
    """
    share = min(1.0 / s.num_bs, 1.0 / s.num_users)
    x = np.full((s.num_bands, s.num_users, s.num_bs), share)
    p = s.budget_by_band.copy()
    return x, p


def resolve_weights(s: Scenario, cfg: SolverConfig, weights: np.ndarray | None) -> np.ndarray:
    w = weights if weights is not None else cfg.weights
    if w is None:
        return np.ones(s.num_bs)
    w = np.asarray(w, dtype=float).copy()
    if w.shape != (s.num_bs,):
        raise InfeasibleError(f"weights must have shape ({s.num_bs},)")
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise InfeasibleError("weights must be nonnegative")
    return w


def _weighted_value(s, lam, weights, util, p):
    return util - lam * float(p.sum()) - group_penalty(p, weights, s.on_power_w, lam)


def solve_weighted(
    s: Scenario,
    cfg: SolverConfig | None = None,
    init: tuple | None = None,
    *,
    weights: np.ndarray | None = None,
    x_support: np.ndarray | None = None,
    off_bs=(),
) -> SolveResult:
    """Run the block ascent to a stationary point of the weighted objective.

    `init` is an (x, p) pair; omitted, it falls back to `default_init`.
    `x_support` restricts association updates to a boolean pattern, and
    `off_bs` pins whole power columns to zero; both default to unrestricted.
    The initial point must be feasible and give every user a positive rate.
    """
    cfg = cfg or SolverConfig()
    cfg.validate(s)
    w = resolve_weights(s, cfg, weights)

    off = frozenset(int(l) for l in off_bs)
    if off and (min(off) < 0 or max(off) >= s.num_bs):
        raise InfeasibleError("off_bs contains an unknown station index")
    active_mask = np.ones(s.num_bs, dtype=bool)
    if off:
        active_mask[sorted(off)] = False

    support = None
    if x_support is not None:
        support = np.asarray(x_support, dtype=bool).copy()
        if support.shape != (s.num_bands, s.num_users, s.num_bs):
            raise InfeasibleError("x_support shape must match the association tensor")
    if off:
        if support is None:
            support = np.ones((s.num_bands, s.num_users, s.num_bs), dtype=bool)
        support[:, :, ~active_mask] = False

    x, p = init if init is not None else default_init(s)
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    if support is not None:
        x = np.where(support, x, 0.0)
    p = p * active_mask[None, :]

    Association(x).validate(EPS_FEAS)
    PowerMatrix(p).validate(s.budget_by_band, EPS_FEAS)
    rates = user_rates(s, x, p)
    if np.any(rates <= 0.0):
        raise StarvedUserError(
            int(np.argmin(rates)), "initial point starves a user; pick a covering init"
        )

    util = float(np.log(rates).sum())
    trace = [_weighted_value(s, cfg.lam, w, util, p)]
    alpha_prev, beta_prev = cfg.alpha0, cfg.beta0
    duals = None
    status = "max_iters"
    iterations = 0

    for _ in range(cfg.max_outer_iters):
        iterations += 1
        round_start = trace[-1]

        xres = ascent_step_x(
            s,
            x,
            p,
            alpha0=min(cfg.alpha0, _STEP_REGROW * alpha_prev),
            shrink=cfg.armijo_shrink,
            slope=cfg.armijo_slope,
            max_halvings=cfg.max_halvings,
            dual_tol=cfg.dual_tol,
            dual_max_iters=cfg.dual_max_iters,
            warm_duals=duals,
            support=support,
        )
        x, duals = xres.x, xres.duals
        if xres.accepted:
            alpha_prev = xres.alpha
        trace.append(_weighted_value(s, cfg.lam, w, xres.utility, p))

        pres = ascent_step_p(
            s,
            x,
            p,
            cfg.lam,
            w,
            beta0=min(cfg.beta0, _STEP_REGROW * beta_prev),
            shrink=cfg.armijo_shrink,
            slope=cfg.armijo_slope,
            max_halvings=cfg.max_halvings,
            active_mask=active_mask if off else None,
        )
        p = pres.p
        if pres.accepted:
            beta_prev = pres.beta
        trace.append(pres.objective)

        rel_change = abs(trace[-1] - round_start) / max(1.0, abs(round_start))
        if rel_change < cfg.eps_bcga:
            status = "converged"
            break
        if not xres.accepted and not pres.accepted:
            status = "stalled"
            break

    power = PowerMatrix(p)
    return SolveResult(
        association=Association(x),
        power=power,
        objective_trace=trace,
        rates=user_rates(s, x, p),
        active_bs=power.active_stations(cfg.eps_off),
        iterations=iterations,
        status=status,
        meta={
            "lambda": cfg.lam,
            "weights": w,
            "off_bs": sorted(off),
            "alpha_last": alpha_prev,
            "beta_last": beta_prev,
        },
    )
