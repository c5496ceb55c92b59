"""Construction and serialization of network instances.

A scenario is a two-tier downlink cellular network: macro base stations on a
hexagonal grid with wrap-around at the layout boundary, pico base stations
scattered inside the cells, and users dropped uniformly over the covered
area.  Link gains combine log-distance pathloss with lognormal shadowing and
are flat across frequency bands.

All stored quantities are linear: powers in watts, gains as dimensionless
power ratios, bandwidth in Hz.  dB and dBm figures appear only in
`TopologyConfig` and are converted once at generation time.

Randomness uses `numpy.random.default_rng` (PCG64).  For a fixed seed the
draw order is: user cell labels, user positions (one rejection loop per
user), pico positions, then the user-by-station shadowing matrix.  That
order is part of the reproducibility contract; do not reorder the draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from functools import cached_property

import numpy as np

from .errors import ScenarioFormatError

BS_KINDS = ("macro", "pico")


def dbm_per_hz_to_watts(psd_dbm_hz: float, bandwidth_hz: float) -> float:
    """Integrate a power spectral density in dBm/Hz over a bandwidth, in watts."""
    return 10.0 ** ((psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz


@dataclass
class TopologyConfig:
    """Generator knobs for the two-tier hexagonal layout.

    Defaults reproduce the evaluation setup used throughout the package:
    7 wrap-around macro cells, 3 picos per cell, 63 users, 10 MHz split
    into 16 bands.
    """

    cell_radius_km: float = 0.5        # hexagon corner radius; site spacing is sqrt(3)*R
    cells: int = 7                     # only 1 or 7 supported (wrap-around layouts)
    picos_per_cell: int = 3
    users_total: int = 63
    pathloss_offset_db: float = 128.1  # pathloss at 1 km
    pathloss_slope_db: float = 37.6    # dB per decade of distance
    shadowing_std_db: float = 8.0
    macro_psd_dbm_hz: float = -27.0    # per-band budget = PSD * band width
    pico_psd_dbm_hz: float = -47.0
    noise_psd_dbm_hz: float = -169.0
    macro_on_power_w: float = 1450.0   # fixed cost charged while the station transmits
    pico_on_power_w: float = 21.32
    total_bandwidth_hz: float = 10e6
    num_bands: int = 16
    min_distance_km: float = 0.01      # pathloss model breaks down below this range
    pico_placement: str = "uniform"    # "uniform" in cell, or "ring" at half radius
    rng_seed: int = 0

    def validate(self) -> None:
        if self.cells not in (1, 7):
            raise ScenarioFormatError("cells", "cells must be 1 or 7 (wrap-around layouts)")
        if self.users_total < 1:
            raise ScenarioFormatError("users_total", "need at least one user")
        if self.picos_per_cell < 0:
            raise ScenarioFormatError("picos_per_cell", "picos_per_cell must be >= 0")
        if self.num_bands < 1:
            raise ScenarioFormatError("num_bands", "need at least one band")
        if not (self.cell_radius_km > 0):
            raise ScenarioFormatError("cell_radius_km", "cell radius must be positive")
        if not (0 < self.min_distance_km < self.cell_radius_km):
            raise ScenarioFormatError("min_distance_km", "clamp must sit inside the cell")
        if not (self.total_bandwidth_hz > 0):
            raise ScenarioFormatError("total_bandwidth_hz", "bandwidth must be positive")
        if self.pico_placement not in ("uniform", "ring"):
            raise ScenarioFormatError("pico_placement", "placement must be uniform or ring")
        if self.shadowing_std_db < 0:
            raise ScenarioFormatError("shadowing_std_db", "shadowing std must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "TopologyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioFormatError(sorted(unknown)[0], f"unknown config field {sorted(unknown)[0]!r}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


@dataclass(eq=False)
class Scenario:
    """Immutable problem instance.

    Array layout: `gains[k, l, n]` indexes user k, station l, band n;
    `power_budget_w[l, n]` is station l's per-band transmit cap.  Solver code
    works band-major through the cached `gains_by_band` / `budget_by_band`
    views.  Treat instances as frozen after construction.
    """

    num_users: int
    num_bs: int
    num_bands: int
    bandwidth_hz: float
    noise_power_w: float                  # per band
    gains: np.ndarray                     # (num_users, num_bs, num_bands)
    power_budget_w: np.ndarray            # (num_bs, num_bands)
    on_power_w: np.ndarray                # (num_bs,)
    bs_kind: list = field(default_factory=list)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.power_budget_w = np.asarray(self.power_budget_w, dtype=float)
        self.on_power_w = np.asarray(self.on_power_w, dtype=float)
        self.validate()

    def validate(self) -> None:
        k, l, n = self.num_users, self.num_bs, self.num_bands
        if k < 1:
            raise ScenarioFormatError("K", "need at least one user")
        if l < 1:
            raise ScenarioFormatError("L", "need at least one base station")
        if n < 1:
            raise ScenarioFormatError("N", "need at least one band")
        if self.gains.shape != (k, l, n):
            raise ScenarioFormatError("gains", f"gains must have shape {(k, l, n)}")
        if self.power_budget_w.shape != (l, n):
            raise ScenarioFormatError("pbar_w", f"pbar_w must have shape {(l, n)}")
        if self.on_power_w.shape != (l,):
            raise ScenarioFormatError("psi_w", f"psi_w must have shape {(l,)}")
        if len(self.bs_kind) != l:
            raise ScenarioFormatError("bs_kind", f"bs_kind must list {l} entries")
        for kind in self.bs_kind:
            if kind not in BS_KINDS:
                raise ScenarioFormatError("bs_kind", f"unknown bs kind {kind!r}")
        if not (self.bandwidth_hz > 0):
            raise ScenarioFormatError("W_hz", "bandwidth must be positive")
        if not (self.noise_power_w > 0):
            raise ScenarioFormatError("sigma2_w", "noise power must be positive")
        if np.any(self.gains < 0) or not np.all(np.isfinite(self.gains)):
            raise ScenarioFormatError("gains", "gains must be finite and nonnegative")
        if np.any(self.power_budget_w < 0) or not np.all(np.isfinite(self.power_budget_w)):
            raise ScenarioFormatError("pbar_w", "budgets must be finite and nonnegative")
        if np.all(self.power_budget_w.sum(axis=1) == 0):
            raise ScenarioFormatError("pbar_w", "all power budgets are zero")
        if np.any(self.on_power_w < 0) or not np.all(np.isfinite(self.on_power_w)):
            raise ScenarioFormatError("psi_w", "on-powers must be finite and nonnegative")
        served = self.gains.max(axis=(1, 2))
        if np.any(served <= 0):
            bad = int(np.argmin(served))
            raise ScenarioFormatError("gains", f"user {bad} has no positive gain to any station")

    # Band-major views used by the solver hot path.  Derived, not serialized.

    @cached_property
    def gains_by_band(self) -> np.ndarray:
        """Gains reshaped to (num_bands, num_users, num_bs), contiguous."""
        return np.ascontiguousarray(np.moveaxis(self.gains, 2, 0))

    @cached_property
    def budget_by_band(self) -> np.ndarray:
        """Budgets reshaped to (num_bands, num_bs), contiguous."""
        return np.ascontiguousarray(self.power_budget_w.T)

    @property
    def band_width_hz(self) -> float:
        return self.bandwidth_hz / self.num_bands

    @property
    def macro_indices(self) -> np.ndarray:
        return np.flatnonzero([kind == "macro" for kind in self.bs_kind])

    @property
    def pico_indices(self) -> np.ndarray:
        return np.flatnonzero([kind == "pico" for kind in self.bs_kind])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.num_users == other.num_users
            and self.num_bs == other.num_bs
            and self.num_bands == other.num_bands
            and self.bandwidth_hz == other.bandwidth_hz
            and self.noise_power_w == other.noise_power_w
            and np.array_equal(self.gains, other.gains)
            and np.array_equal(self.power_budget_w, other.power_budget_w)
            and np.array_equal(self.on_power_w, other.on_power_w)
            and list(self.bs_kind) == list(other.bs_kind)
        )


# ----------------------------------------------------------------------------
# Hexagonal layout with wrap-around
# ----------------------------------------------------------------------------

SQRT3 = np.sqrt(3.0)


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _cell_centers(radius_km: float, cells: int) -> np.ndarray:
    """Centers of the hexagonal cells, pointy-top orientation."""
    d = SQRT3 * radius_km  # site-to-site spacing
    if cells == 1:
        return np.zeros((1, 2))
    angles = np.deg2rad(60.0 * np.arange(6))
    ring = d * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return np.vstack([np.zeros((1, 2)), ring])


def _wrap_shifts(radius_km: float, cells: int) -> np.ndarray:
    """Translations that replicate the layout around itself.

    Distances are measured to the nearest replica, which removes the edge
    effects of a finite drop area.  The zero shift is always included.
    """
    d = SQRT3 * radius_km
    if cells == 1:
        angles = np.deg2rad(60.0 * np.arange(6))
        ring = d * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return np.vstack([np.zeros((1, 2)), ring])
    # 7-cell cluster: the replica lattice is generated by rotating the vector
    # 2*a1 + a2 (length sqrt(7)*d) through multiples of 60 degrees.
    a1 = np.array([d, 0.0])
    a2 = d * np.array([0.5, SQRT3 / 2.0])
    u = 2.0 * a1 + a2
    shifts = [np.zeros(2)]
    for k in range(6):
        shifts.append(_rot(np.deg2rad(60.0 * k)) @ u)
    return np.array(shifts)


def _in_hexagon(points: np.ndarray, center: np.ndarray, radius_km: float) -> np.ndarray:
    """Membership test for a pointy-top hexagon with the given corner radius."""
    dx = np.abs(points[..., 0] - center[0])
    dy = np.abs(points[..., 1] - center[1])
    return (dx <= SQRT3 * radius_km / 2.0 + 1e-12) & (dx / SQRT3 + dy <= radius_km + 1e-12)


def _sample_in_hexagon(rng: np.random.Generator, center: np.ndarray, radius_km: float) -> np.ndarray:
    """Uniform point in one hexagon via rejection from its bounding box."""
    half_w = SQRT3 * radius_km / 2.0
    while True:
        pt = center + rng.uniform([-half_w, -radius_km], [half_w, radius_km])
        if _in_hexagon(pt[None, :], center, radius_km)[0]:
            return pt


def network_layout(cfg: TopologyConfig) -> dict:
    """Sample station and user coordinates for a config.

    Returns a dict with `bs_pos` (L, 2), `bs_kind` (list of L), `user_pos`
    (K, 2), `cell_centers`, and `wrap_shifts`, all in km.  Macro stations
    come first in index order, then picos; this ordering is relied on by
    shutdown heuristics that sweep macros before picos.
    """
    cfg.validate()
    return _layout_with_rng(cfg, np.random.default_rng(cfg.rng_seed))


def wrap_distances(user_pos: np.ndarray, bs_pos: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Distance from each user to the nearest replica of each station, (K, L)."""
    # (K, 1, 1, 2) - (1, L, S, 2) -> (K, L, S)
    delta = user_pos[:, None, None, :] - (bs_pos[None, :, None, :] + shifts[None, None, :, :])
    return np.sqrt((delta**2).sum(axis=-1)).min(axis=-1)


def generate_scenario(cfg: TopologyConfig) -> Scenario:
    """Draw a full problem instance from a topology config.

    The same seed always yields the same scenario, bit for bit.  Shadowing
    is drawn per user-station pair and shared by all bands, so gains are
    frequency flat.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    layout = _layout_with_rng(cfg, rng)

    dist_km = wrap_distances(layout["user_pos"], layout["bs_pos"], layout["wrap_shifts"])
    dist_km = np.maximum(dist_km, cfg.min_distance_km)
    num_bs = dist_km.shape[1]

    pathloss_db = cfg.pathloss_offset_db + cfg.pathloss_slope_db * np.log10(dist_km)
    shadow_db = rng.normal(0.0, cfg.shadowing_std_db, size=dist_km.shape)
    gain = 10.0 ** (-(pathloss_db + shadow_db) / 10.0)
    gains = np.repeat(gain[:, :, None], cfg.num_bands, axis=2)

    band_hz = cfg.total_bandwidth_hz / cfg.num_bands
    psd = {"macro": cfg.macro_psd_dbm_hz, "pico": cfg.pico_psd_dbm_hz}
    budget = np.array(
        [[dbm_per_hz_to_watts(psd[kind], band_hz)] * cfg.num_bands for kind in layout["bs_kind"]]
    )
    on_power = np.array(
        [cfg.macro_on_power_w if kind == "macro" else cfg.pico_on_power_w for kind in layout["bs_kind"]]
    )

    return Scenario(
        num_users=cfg.users_total,
        num_bs=num_bs,
        num_bands=cfg.num_bands,
        bandwidth_hz=cfg.total_bandwidth_hz,
        noise_power_w=dbm_per_hz_to_watts(cfg.noise_psd_dbm_hz, band_hz),
        gains=gains,
        power_budget_w=budget,
        on_power_w=on_power,
        bs_kind=list(layout["bs_kind"]),
    )


def _layout_with_rng(cfg: TopologyConfig, rng: np.random.Generator) -> dict:
    """Layout sampling against a caller-provided stream; see network_layout."""
    centers = _cell_centers(cfg.cell_radius_km, cfg.cells)
    shifts = _wrap_shifts(cfg.cell_radius_km, cfg.cells)
    cell_of_user = rng.integers(0, cfg.cells, size=cfg.users_total)
    user_pos = np.array(
        [_sample_in_hexagon(rng, centers[c], cfg.cell_radius_km) for c in cell_of_user]
    )
    pico_pos = []
    if cfg.picos_per_cell > 0:
        if cfg.pico_placement == "uniform":
            for c in range(cfg.cells):
                for _ in range(cfg.picos_per_cell):
                    pico_pos.append(_sample_in_hexagon(rng, centers[c], cfg.cell_radius_km))
        else:
            angles = np.deg2rad(90.0 + 360.0 * np.arange(cfg.picos_per_cell) / cfg.picos_per_cell)
            for c in range(cfg.cells):
                for ang in angles:
                    offset = 0.5 * cfg.cell_radius_km * np.array([np.cos(ang), np.sin(ang)])
                    pico_pos.append(centers[c] + offset)
    pico_pos = np.array(pico_pos).reshape(-1, 2)
    bs_pos = np.vstack([centers, pico_pos])
    bs_kind = ["macro"] * len(centers) + ["pico"] * len(pico_pos)
    return {
        "bs_pos": bs_pos,
        "bs_kind": bs_kind,
        "user_pos": user_pos,
        "cell_centers": centers,
        "wrap_shifts": shifts,
        "cell_of_user": cell_of_user,
    }


# ----------------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------------

_SCHEMA_FIELDS = ("K", "L", "N", "W_hz", "sigma2_w", "gains", "pbar_w", "psi_w", "bs_kind")


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "K": s.num_users,
        "L": s.num_bs,
        "N": s.num_bands,
        "W_hz": s.bandwidth_hz,
        "sigma2_w": s.noise_power_w,
        "gains": s.gains.tolist(),
        "pbar_w": s.power_budget_w.tolist(),
        "psi_w": s.on_power_w.tolist(),
        "bs_kind": list(s.bs_kind),
    }


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioFormatError("root", "scenario file must hold a JSON object")
    for name in _SCHEMA_FIELDS:
        if name not in data:
            raise ScenarioFormatError(name)
    try:
        return Scenario(
            num_users=int(data["K"]),
            num_bs=int(data["L"]),
            num_bands=int(data["N"]),
            bandwidth_hz=float(data["W_hz"]),
            noise_power_w=float(data["sigma2_w"]),
            gains=np.asarray(data["gains"], dtype=float),
            power_budget_w=np.asarray(data["pbar_w"], dtype=float),
            on_power_w=np.asarray(data["psi_w"], dtype=float),
            bs_kind=list(data["bs_kind"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError("root", f"malformed scenario data: {exc}") from exc


def save_scenario(s: Scenario, path) -> None:
    """Write a scenario as JSON.  Round-trips exactly through load_scenario."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, separators=(",", ":"))
        fh.write("\n")


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError("root", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(data)
