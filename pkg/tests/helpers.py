"""Shared builders and assertions for the test suite."""

import numpy as np

from hetnet_opt.objective import EPS_FEAS, EPS_OFF, user_rates
from hetnet_opt.scenario import Scenario


def tiny_scenario(K=3, L=2, N=2, seed=0, macros=1, w_hz=10e6):
    """Random small scenario with realistic-ish scales.

    Gains sit around 1e-10 (urban pathloss territory), budgets around
    1 W per band for the macro tier, noise near thermal for a ~600 kHz
    band.
    """
    rng = np.random.default_rng(seed)
    gains = rng.lognormal(mean=0.0, sigma=1.0, size=(K, L, N)) * 1e-10
    pbar = np.full((L, N), 1.0)
    if L > macros:
        pbar[macros:, :] = 0.1
    psi = np.full(L, 50.0)
    psi[:macros] = 600.0
    kinds = ["macro"] * macros + ["pico"] * (L - macros)
    return Scenario(
        num_users=K,
        num_bs=L,
        num_bands=N,
        bandwidth_hz=w_hz,
        noise_power_w=1e-13,
        gains=gains,
        power_budget_w=pbar,
        on_power_w=psi,
        bs_kind=kinds,
    )


def unit_scenario(K=2, L=2, N=1, gains=None, sigma2=1.0, pbar=1.0, psi=1.0):
    """Dimensionless scenario: bandwidth equals the band count so each band
    is 1 Hz wide and rates stay O(1), which keeps finite differences and
    brute-force grids well conditioned."""
    if gains is None:
        gains = np.ones((K, L, N))
    gains = np.asarray(gains, dtype=float)
    pbar_arr = np.full((L, N), float(pbar))
    return Scenario(
        num_users=K,
        num_bs=L,
        num_bands=N,
        bandwidth_hz=float(N),
        noise_power_w=float(sigma2),
        gains=gains,
        power_budget_w=pbar_arr,
        on_power_w=np.full(L, float(psi)),
        bs_kind=["macro"] * L,
    )


def random_interior_point(s, rng, x_high_frac=0.9):
    """Feasible (x, p) strictly inside the constraint set, all rates positive."""
    K, L, N = s.num_users, s.num_bs, s.num_bands
    hi = x_high_frac / max(K, L)
    lo = min(0.05, 0.5 * hi)
    x = rng.uniform(lo, hi, size=(N, K, L))
    p = rng.uniform(0.2, 0.9, size=(N, L)) * s.budget_by_band
    return x, p


def assert_result_feasible(s, result, eps=EPS_FEAS, eps_off=EPS_OFF):
    """Constraint block for a solve result: simplex rows/cols, box on power,
    and exact zeros on columns reported off."""
    x = result.association.x
    p = result.power.p
    assert x.shape == (s.num_bands, s.num_users, s.num_bs)
    assert p.shape == (s.num_bands, s.num_bs)
    assert np.all(x >= -eps), f"negative share {x.min()}"
    row = x.sum(axis=2)
    col = x.sum(axis=1)
    assert np.all(row <= 1.0 + eps), f"user row sum {row.max()}"
    assert np.all(col <= 1.0 + eps), f"bs column sum {col.max()}"
    assert np.all(p >= -eps), f"negative power {p.min()}"
    assert np.all(p <= s.budget_by_band + eps), "budget exceeded"
    norms = np.linalg.norm(p, axis=0)
    active = set(int(l) for l in result.active_bs)
    for l in range(s.num_bs):
        if l in active:
            assert norms[l] > eps_off
        else:
            assert np.all(p[:, l] == 0.0), f"station {l} reported off but transmits"
    r = user_rates(s, x, p)
    assert np.all(r > 0)
    assert np.allclose(r, result.rates, rtol=1e-12, atol=0)


def total_power_with_overhead(s, result, eps_off=EPS_OFF):
    """Transmit power plus the on-power of every active station."""
    norms = np.linalg.norm(result.power.p, axis=0)
    on = norms > eps_off
    return float(result.power.p.sum() + s.on_power_w[on].sum())
