"""Rates, objectives, and gradients for the association / power problem.

Conventions used throughout the solver:

* Spectral rates are in bit/s and use log base 2; the fairness utility is
  the natural log of each user's aggregate rate.
* `x` is the association tensor with shape (num_bands, num_users, num_bs);
  `x[n, k, l]` is the fraction of band n's airtime that station l spends
  serving user k.  Rows (per user) and columns (per station) of each band
  slice must sum to at most 1.
* `p` is the transmit power matrix with shape (num_bands, num_bs), watts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, StarvedUserError
from .scenario import Scenario

EPS_FEAS = 1e-9   # tolerance on the airtime constraints
EPS_OFF = 1e-8    # a station transmitting below this 2-norm counts as off

LN2 = np.log(2.0)


@dataclass
class Association:
    """Airtime shares, one K x L matrix per band."""

    x: np.ndarray  # (num_bands, num_users, num_bs)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 3:
            raise InfeasibleError("association tensor must be (bands, users, stations)")

    def feasibility_violation(self) -> float:
        """Largest constraint violation: negativity, row sums, column sums."""
        neg = max(0.0, float(-self.x.min(initial=0.0)))
        row = max(0.0, float(self.x.sum(axis=2).max(initial=0.0) - 1.0))
        col = max(0.0, float(self.x.sum(axis=1).max(initial=0.0) - 1.0))
        return max(neg, row, col)

    def validate(self, eps: float = EPS_FEAS) -> None:
        v = self.feasibility_violation()
        if v > eps:
            raise InfeasibleError(f"association violates airtime constraints by {v:.3e}")


@dataclass
class PowerMatrix:
    """Per-band transmit powers, column l belonging to station l."""

    p: np.ndarray  # (num_bands, num_bs)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.ndim != 2:
            raise InfeasibleError("power matrix must be (bands, stations)")

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.p, axis=0)

    def active_stations(self, eps_off: float = EPS_OFF) -> list:
        return [int(l) for l in np.flatnonzero(self.column_norms() > eps_off)]

    def validate(self, budget_by_band: np.ndarray, eps: float = EPS_FEAS) -> None:
        if self.p.min(initial=0.0) < -eps:
            raise InfeasibleError("negative transmit power")
        over = float((self.p - budget_by_band).max(initial=0.0))
        if over > eps:
            raise InfeasibleError(f"power budget exceeded by {over:.3e} W")


@dataclass
class RateTable:
    """Per-link spectral rates and their per-user totals, bit/s."""

    link_rate: np.ndarray  # (num_bands, num_users, num_bs)
    user_rate: np.ndarray  # (num_users,)


def spectral_rate(s: Scenario, p: np.ndarray, k: int, l: int, n: int) -> float:
    """Rate of the single link (user k, station l, band n) at powers `p`.

    Treats all other stations transmitting in band n as interference.
    """
    g = s.gains_by_band[n, k, :]
    signal = g[l] * p[n, l]
    interference = float(g @ p[n]) - signal
    return s.band_width_hz * np.log2(1.0 + signal / (s.noise_power_w + interference))


def link_rates(s: Scenario, p: np.ndarray) -> np.ndarray:
    """All spectral rates at once, shape (num_bands, num_users, num_bs)."""
    g = s.gains_by_band
    received = g * p[:, None, :]
    total = received.sum(axis=2) + s.noise_power_w  # (N, K)
    interference = total[:, :, None] - received
    return s.band_width_hz * np.log2(1.0 + received / interference)


def rate_table(s: Scenario, x: np.ndarray, p: np.ndarray) -> RateTable:
    """Link rates plus each user's airtime-weighted aggregate rate."""
    r = link_rates(s, p)
    return RateTable(link_rate=r, user_rate=np.einsum("nkl,nkl->k", x, r))


def user_rates(s: Scenario, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    return rate_table(s, x, p).user_rate


def bs_power(p_col: np.ndarray, psi: float) -> float:
    """Consumption of one station: transmit sum plus on-power if any band is live."""
    p_col = np.asarray(p_col, dtype=float)
    return float(p_col.sum() + (psi if np.any(p_col != 0.0) else 0.0))


def utility(s: Scenario, x: np.ndarray, p: np.ndarray) -> float:
    """Proportional-fairness utility, sum of ln of user rates."""
    rates = user_rates(s, x, p)
    if np.any(rates <= 0.0):
        raise StarvedUserError(int(np.argmin(rates)))
    return float(np.log(rates).sum())


def smooth_objective(s: Scenario, x: np.ndarray, p: np.ndarray, lam: float) -> float:
    """Utility minus the price of total transmit power (no on-power term)."""
    return utility(s, x, p) - lam * float(p.sum())


def full_objective(
    s: Scenario, x: np.ndarray, p: np.ndarray, lam: float, eps_off: float = EPS_OFF
) -> float:
    """Utility minus the price of full consumption, on-power included.

    A station is charged its on-power when its power column's 2-norm exceeds
    `eps_off`; exact-zero columns cost nothing.
    """
    norms = np.linalg.norm(p, axis=0)
    consumption = float(p.sum() + s.on_power_w[norms > eps_off].sum())
    return utility(s, x, p) - lam * consumption


def grad_x(s: Scenario, x: np.ndarray, p: np.ndarray, rates: RateTable | None = None) -> np.ndarray:
    """Gradient of the smooth objective in the association tensor.

    Entry (n, k, l) is that link's spectral rate divided by user k's
    aggregate rate; the power price does not depend on x.
    """
    rates = rates or rate_table(s, x, p)
    if np.any(rates.user_rate <= 0.0):
        raise StarvedUserError(int(np.argmin(rates.user_rate)))
    return rates.link_rate / rates.user_rate[None, :, None]


def grad_p(s: Scenario, x: np.ndarray, p: np.ndarray, lam: float) -> np.ndarray:
    """Gradient of the smooth objective in the power matrix, shape (N, L).

    Each band's entry for station j collects the direct gain to the users j
    serves and the interference it inflicts on links served by others, all
    weighted by the inverse aggregate rates, minus the power price lam.
    """
    g = s.gains_by_band
    received = g * p[:, None, :]
    total = received.sum(axis=2) + s.noise_power_w          # (N, K)
    interference = total[:, :, None] - received             # (N, K, L)
    r = s.band_width_hz / LN2 * np.log1p(received / interference)
    total_rate = np.einsum("nkl,nkl->k", x, r)
    if np.any(total_rate <= 0.0):
        raise StarvedUserError(int(np.argmin(total_rate)))

    x_over_i = x / interference                             # (N, K, L)
    row_share = x.sum(axis=2)                               # (N, K)
    # d r(k,l) / d p(j) summed over l with weights x(k,l):
    #   coef * g(k,j) * (row_share/total - sum_l x/I + x(k,j)/I(k,j))
    inner = row_share[:, :, None] / total[:, :, None] - x_over_i.sum(axis=2)[:, :, None] + x_over_i
    coef = s.band_width_hz / LN2
    grad = coef * np.einsum("nkl,nkl,k->nl", g, inner, 1.0 / total_rate)
    return grad - lam


def group_penalty(p: np.ndarray, weights: np.ndarray, psi: np.ndarray, lam: float) -> float:
    """Weighted 2-norm surrogate for the on-power cost, lam * sum psi*w*||p_l||."""
    norms = np.linalg.norm(p, axis=0)
    live = norms > 0.0
    return lam * float((psi[live] * weights[live] * norms[live]).sum())


def weighted_objective(
    s: Scenario, x: np.ndarray, p: np.ndarray, lam: float, weights: np.ndarray
) -> float:
    """Smooth objective minus the weighted group penalty; the solver's ascent target."""
    return smooth_objective(s, x, p, lam) - group_penalty(p, weights, s.on_power_w, lam)
