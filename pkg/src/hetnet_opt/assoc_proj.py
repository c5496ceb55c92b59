"""Euclidean projection onto the per-band airtime polytope.

Each band's association matrix must satisfy row sums <= 1 (a user cannot be
served more than full time), column sums <= 1 (a station cannot serve more
than full time), and nonnegativity.  The projection of an arbitrary matrix
onto that polytope is computed through its dual: with one multiplier per
row and per column, both constrained nonpositive, the candidate primal is

    primal_from_duals(xtilde, y, z) = max(xtilde + y 1' + 1 z', 0)

and the dual problem minimizes 0.5*||Theta||_F^2 - sum(y) - sum(z) over
y <= 0, z <= 0, whose gradient is (row sums - 1, column sums - 1) of Theta.
At the dual optimum the clipped matrix *is* the projection.  The dual is
smooth, convex, and separable per row once the column block is frozen (and
vice versa), so alternating exact block minimization - a vectorized
water-filling solve per row, then per column - descends monotonically at
any input scale; a semismooth Newton step on the settled support finishes
to tight tolerance in a handful of sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DualSolveError, StarvedUserError
from .objective import grad_x, utility

DUAL_TOL = 1e-9
DUAL_MAX_ITERS = 5000
_XTILDE_CAP = 1e3  # sup-norm cap on the first trial displacement in x steps


@dataclass
class DualPoint:
    """Multipliers for one band: y per user row, z per station column, both <= 0."""

    y: np.ndarray
    z: np.ndarray


def primal_from_duals(xtilde: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Clipped shift of the target matrix implied by the multipliers."""
    return np.maximum(xtilde + y[:, None] + z[None, :], 0.0)


def _dual_value_grad(xtilde, y, z):
    theta = primal_from_duals(xtilde, y, z)
    value = 0.5 * float(np.vdot(theta, theta)) - float(y.sum()) - float(z.sum())
    gy = theta.sum(axis=1) - 1.0
    gz = theta.sum(axis=0) - 1.0
    return value, gy, gz


def _dual_residual(y, z, gy, gz):
    """Projected-gradient residual for min over the nonpositive orthant."""
    ry = y - np.minimum(y - gy, 0.0)
    rz = z - np.minimum(z - gz, 0.0)
    return max(float(np.abs(ry).max(initial=0.0)), float(np.abs(rz).max(initial=0.0)))


def _newton_direction(xtilde, y, z, gy, gz):
    """Semismooth Newton direction for the dual, or None.

    The dual gradient is piecewise linear with generalized Jacobian built
    from the support of the clipped matrix.  The small ridge keeps the solve
    well posed while letting null directions of the Jacobian (valleys where
    the clipped matrix is constant) blow up into long escape moves; the
    caller tames them with a projected backtracking search on the value.
    Coordinates whose support row/column is empty decouple completely and
    see slope -1, so their natural move is a jump to the upper bound.
    """
    theta = primal_from_duals(xtilde, y, z)
    support = theta > 0.0
    row_cnt = support.sum(axis=1).astype(float)
    col_cnt = support.sum(axis=0).astype(float)
    dy = np.zeros_like(y)
    dz = np.zeros_like(z)
    buried_y = (row_cnt == 0) & (y < 0.0)
    buried_z = (col_cnt == 0) & (z < 0.0)
    dy[buried_y] = -y[buried_y]
    dz[buried_z] = -z[buried_z]
    free_y = np.flatnonzero((row_cnt > 0) & ((y < 0.0) | (gy > 0.0)))
    free_z = np.flatnonzero((col_cnt > 0) & ((z < 0.0) | (gz > 0.0)))
    ny, nz = len(free_y), len(free_z)
    if ny + nz == 0:
        if buried_y.any() or buried_z.any():
            return dy, dz
        return None
    h = np.zeros((ny + nz, ny + nz))
    h[:ny, :ny] = np.diag(row_cnt[free_y])
    h[ny:, ny:] = np.diag(col_cnt[free_z])
    cross = support[np.ix_(free_y, free_z)].astype(float)
    h[:ny, ny:] = cross
    h[ny:, :ny] = cross.T
    rhs = -np.concatenate([gy[free_y], gz[free_z]])
    try:
        delta = np.linalg.solve(h + 1e-10 * np.eye(ny + nz), rhs)
    except np.linalg.LinAlgError:
        return None
    dy[free_y] = delta[:ny]
    dz[free_z] = delta[ny:]
    return dy, dz


def _waterfill_rows(a: np.ndarray) -> np.ndarray:
    """Per-row multiplier v <= 0 minimizing 0.5*sum_l max(a_kl + v, 0)^2 - v.

    When the positive part of a row already sums to at most 1 the bound
    v = 0 is optimal; otherwise the minimizer solves
    sum_l max(a_kl + v, 0) = 1, found exactly by sorting the row and
    scanning candidate active counts (simplex-style water-filling).
    """
    num_rows, num_cols = a.shape
    v = np.zeros(num_rows)
    need = np.maximum(a, 0.0).sum(axis=1) > 1.0
    if not need.any():
        return v
    srt = -np.sort(-a[need], axis=1)  # each row descending
    prefix = np.cumsum(srt, axis=1)
    counts = np.arange(1, num_cols + 1, dtype=float)
    cand = (1.0 - prefix) / counts  # v if exactly the m largest entries stay positive
    nxt = np.concatenate([srt[:, 1:], np.full((srt.shape[0], 1), -np.inf)], axis=1)
    # Bracket test; boundary ties make adjacent counts share the same v, so
    # the first valid column is always present despite rounding.
    valid = (srt + cand > 0.0) & (nxt + cand <= 0.0)
    first = np.argmax(valid, axis=1)
    v[need] = cand[np.arange(srt.shape[0]), first]
    return np.minimum(v, 0.0)


def solve_dual(
    xtilde: np.ndarray,
    tol: float = DUAL_TOL,
    max_iters: int = DUAL_MAX_ITERS,
    warm: DualPoint | None = None,
) -> DualPoint:
    """Minimize the projection dual for one band.

    Alternates exact row/column block minimization (each a vectorized
    water-filling solve, monotone in the dual value at any input scale) with
    a semismooth Newton jump once the support has settled.  Returns
    multipliers whose projected-gradient residual (sup norm) is at most
    `tol`; raises DualSolveError with the last iterate attached if the sweep
    cap is hit first.  Feasible inputs converge immediately at (0, 0).
    """
    num_rows, num_cols = xtilde.shape
    z = np.zeros(num_cols)
    if warm is not None:
        # Only the column block seeds the sweep; y is recomputed exactly.
        z = np.minimum(np.asarray(warm.z, dtype=float).copy(), 0.0)
    y = np.zeros(num_rows)
    value, gy, gz = _dual_value_grad(xtilde, y, z)
    residual = _dual_residual(y, z, gy, gz)
    best_residual = residual
    iters_done = 0

    for iteration in range(max_iters):
        iters_done = iteration + 1
        if residual <= tol:
            return DualPoint(y=y, z=z)

        # Newton acceleration: value-monotone thanks to the projected
        # backtracking, superlinear once the support settles, and the ridge
        # blow-up along Jacobian null directions is what carries the iterate
        # across flat valleys in one move.  Near the optimum the value gap
        # drops below float resolution while the residual is still readable,
        # so the endgame accepts on a strict residual ratchet instead.
        direction = _newton_direction(xtilde, y, z, gy, gz)
        if direction is not None:
            dy, dz = direction
            endgame = residual <= 1e-6
            stride = 1.0
            for _ in range(30):
                cand_y = np.minimum(y + stride * dy, 0.0)
                cand_z = np.minimum(z + stride * dz, 0.0)
                cand_value, cgy, cgz = _dual_value_grad(xtilde, cand_y, cand_z)
                if cand_value < value:
                    y, z, value, gy, gz = cand_y, cand_z, cand_value, cgy, cgz
                    break
                if endgame:
                    cand_residual = _dual_residual(cand_y, cand_z, cgy, cgz)
                    if cand_residual <= tol:
                        return DualPoint(y=cand_y, z=cand_z)
                    if cand_residual < 0.5 * best_residual:
                        y, z, value, gy, gz = cand_y, cand_z, cand_value, cgy, cgz
                        best_residual = cand_residual
                        break
                stride *= 0.5

        # Exact block minimization: guaranteed descent from any point, and
        # the engine that makes the overall iteration globally convergent.
        y_prev, z_prev = y, z
        y = _waterfill_rows(xtilde + z[None, :])
        z = _waterfill_rows((xtilde + y[:, None]).T)
        value, gy, gz = _dual_value_grad(xtilde, y, z)

        # Straight shallow valleys: extrapolate the sweep displacement with
        # a projected doubling search (still value-monotone).
        dy, dz = y - y_prev, z - z_prev
        if dy.any() or dz.any():
            factor = 2.0
            while factor <= 2.0**60:
                cand_y = np.minimum(y_prev + factor * dy, 0.0)
                cand_z = np.minimum(z_prev + factor * dz, 0.0)
                cand_value, cgy, cgz = _dual_value_grad(xtilde, cand_y, cand_z)
                if cand_value >= value:
                    break
                y, z, value, gy, gz = cand_y, cand_z, cand_value, cgy, cgz
                factor *= 2.0

        residual = _dual_residual(y, z, gy, gz)
        best_residual = min(best_residual, residual)

    if residual <= tol:
        return DualPoint(y=y, z=z)
    raise DualSolveError(residual=residual, y=y, z=z, iterations=iters_done)


def project_association(
    xtilde: np.ndarray,
    tol: float = DUAL_TOL,
    max_iters: int = DUAL_MAX_ITERS,
    warm: list | None = None,
) -> tuple[np.ndarray, list]:
    """Project a stack of band matrices onto the airtime polytope.

    `xtilde` has shape (num_bands, num_users, num_bs); each band is an
    independent projection.  Returns the projected stack and the per-band
    dual points, which callers should feed back as `warm` on the next call.
    Dual failures are re-raised with the offending band attached.
    """
    xtilde = np.asarray(xtilde, dtype=float)
    num_bands = xtilde.shape[0]
    duals = []
    out = np.empty_like(xtilde)
    for n in range(num_bands):
        try:
            dual = solve_dual(
                xtilde[n],
                tol=tol,
                max_iters=max_iters,
                warm=warm[n] if warm is not None else None,
            )
        except DualSolveError as exc:
            raise DualSolveError(
                residual=exc.residual, y=exc.y, z=exc.z, iterations=exc.iterations, band=n
            ) from exc
        duals.append(dual)
        out[n] = primal_from_duals(xtilde[n], dual.y, dual.z)
    return out, duals


@dataclass
class XStepResult:
    """Outcome of one projected gradient step on the association."""

    x: np.ndarray
    accepted: bool
    alpha: float
    duals: list | None
    utility: float  # log-utility at the returned association


def ascent_step_x(
    s,
    x: np.ndarray,
    p: np.ndarray,
    *,
    alpha0: float = 1.0,
    shrink: float = 0.5,
    slope: float = 1e-4,
    max_halvings: int = 40,
    dual_tol: float = DUAL_TOL,
    dual_max_iters: int = DUAL_MAX_ITERS,
    warm_duals: list | None = None,
    grad: np.ndarray | None = None,
    support: np.ndarray | None = None,
) -> XStepResult:
    """One gradient step on x followed by projection onto the polytope.

    The step is accepted when the objective gains at least `slope` times
    the first-order model of the move; the step size halves until that
    holds.  Because the projection never moves the iterate against the
    gradient, accepted steps never decrease the objective.  If every trial
    fails the association is returned unchanged with `accepted=False`.

    `support`, when given, is a boolean mask; entries outside it stay
    exactly zero through gradient and projection alike, which restricts the
    update to a fixed association pattern.  A zero `grad` makes any feasible
    x a fixed point.

    Near-starved users blow the gradient up by their inverse rate; the first
    trial displacement is capped in sup norm because the projection saturates
    long before that while huge inputs sit above the precision floor of a
    1e-9 dual residual.
    """
    base = utility(s, x, p)
    g = grad_x(s, x, p) if grad is None else np.asarray(grad, dtype=float)
    if support is not None:
        g = np.where(support, g, 0.0)

    alpha = alpha0
    gmax = float(np.abs(g).max(initial=0.0))
    if gmax * alpha > _XTILDE_CAP:
        alpha = _XTILDE_CAP / gmax
    duals = warm_duals
    for _ in range(max_halvings + 1):
        x_new, duals = project_association(
            x + alpha * g, tol=dual_tol, max_iters=dual_max_iters, warm=duals
        )
        gain = float(np.vdot(g, x_new - x))
        try:
            value = utility(s, x_new, p)
        except StarvedUserError:
            value = -np.inf
        if value >= base + slope * max(gain, 0.0):
            return XStepResult(x=x_new, accepted=True, alpha=alpha, duals=duals, utility=value)
        alpha *= shrink
    return XStepResult(x=x, accepted=False, alpha=alpha, duals=duals, utility=base)
