"""Proximal pieces of the power update.

The sparsity surrogate charges each station the weighted 2-norm of its
power column, so a gradient step on powers is followed by the group soft
threshold: shrink the whole column toward zero, and drop it to exactly zero
when the threshold exceeds the column norm.  A box clamp then restores the
per-band budget constraints.  Exact zeros matter; they are what lets a
station be declared off without any epsilon fuzz downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StarvedUserError
from .objective import grad_p, weighted_objective


def prox_threshold(lam: float, psi: float, weight: float, beta: float) -> float:
    """Shrink threshold for one station: lam * psi * weight * step.

    Any zero factor yields a zero threshold, even if another factor is
    infinite; an infinite weight with positive lam forces the column off.
    """
    factors = (lam, psi, weight, beta)
    if any(f == 0.0 for f in factors):
        return 0.0
    return lam * psi * weight * beta


def block_soft_threshold(ptilde: np.ndarray, t: float) -> np.ndarray:
    """Group soft threshold of one power column.

    Returns max(1 - t/||ptilde||, 0) * ptilde: the whole column scales by a
    common factor, and when t >= ||ptilde|| the result is exactly zero in
    every entry.
    """
    ptilde = np.asarray(ptilde, dtype=float)
    norm = float(np.linalg.norm(ptilde))
    if norm <= t or norm == 0.0:
        return np.zeros_like(ptilde)
    return (1.0 - t / norm) * ptilde


def clamp_power(phat: np.ndarray, budget: np.ndarray) -> np.ndarray:
    """Clip powers into [0, budget] elementwise; bounds are hit exactly."""
    return np.clip(phat, 0.0, budget)


def shrink_columns(ptilde: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Apply the group soft threshold to every station column at once.

    `ptilde` is (num_bands, num_bs) and `thresholds` has one entry per
    station.  Columns whose norm falls at or below their threshold come out
    exactly zero.
    """
    norms = np.linalg.norm(ptilde, axis=0)
    scale = np.zeros_like(norms)
    live = norms > thresholds
    scale[live] = 1.0 - thresholds[live] / norms[live]
    return ptilde * scale[None, :]


def column_thresholds(
    lam: float, psi: np.ndarray, weights: np.ndarray, beta: float
) -> np.ndarray:
    """Vector of shrink thresholds, one per station, with inf*0 read as 0."""
    t = np.zeros_like(np.asarray(psi, dtype=float))
    if lam == 0.0 or beta == 0.0:
        return t
    both = (psi > 0) & (weights > 0)
    t[both] = lam * beta * psi[both] * weights[both]
    return t


@dataclass
class PStepResult:
    """Outcome of one proximal gradient step on the powers."""

    p: np.ndarray
    accepted: bool
    beta: float
    objective: float  # weighted objective at the returned powers


def ascent_step_p(
    s,
    x: np.ndarray,
    p: np.ndarray,
    lam: float,
    weights: np.ndarray,
    *,
    beta0: float = 0.5,
    shrink: float = 0.5,
    slope: float = 1e-4,
    max_halvings: int = 40,
    active_mask: np.ndarray | None = None,
    grad: np.ndarray | None = None,
) -> PStepResult:
    """One gradient step on p, group soft threshold, then budget clamp.

    The shrink threshold scales with the trial step, so halving the step
    also halves how aggressively columns are pushed toward zero.  A trial is
    accepted when the weighted objective gains at least `slope/beta` times
    the squared move; a step that starves a user is always rejected.  When
    no trial is accepted the powers are returned unchanged.

    `active_mask` pins the columns of stations that must stay silent at
    exactly zero.
    """
    base = weighted_objective(s, x, p, lam, weights)
    g = grad_p(s, x, p, lam) if grad is None else np.asarray(grad, dtype=float)
    budget = s.budget_by_band
    psi = s.on_power_w

    beta = beta0
    for _ in range(max_halvings + 1):
        ptilde = p + beta * g
        if active_mask is not None:
            ptilde = ptilde * active_mask[None, :]
        p_new = clamp_power(shrink_columns(ptilde, column_thresholds(lam, psi, weights, beta)), budget)
        try:
            value = weighted_objective(s, x, p_new, lam, weights)
        except StarvedUserError:
            value = -np.inf
        delta = p_new - p
        if value >= base + slope * float(np.vdot(delta, delta)) / beta:
            return PStepResult(p=p_new, accepted=True, beta=beta, objective=value)
        beta *= shrink
    return PStepResult(p=p, accepted=False, beta=beta, objective=base)
