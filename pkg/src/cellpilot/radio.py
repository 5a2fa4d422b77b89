"""Deterministic propagation model: free-space path loss, a sectorized
antenna main lobe, per-wall penetration loss, thermal noise, and the
SNR -> spectral-efficiency lookup used by the scheduler.

No fading. Received power is a pure function of geometry, so identical
inputs give bit-identical outputs across runs and platforms.
"""

from __future__ import annotations

import math

import numpy as np

from .topology import Topology, wall_crossings_to_cells

SPEED_OF_LIGHT = 2.998e8        # m/s
MIN_DISTANCE_M = 1.0            # FSPL distance clamp (near-field guard)
MAIN_LOBE_GAIN_DB = 10.0
WALL_LOSS_DB = 6.0              # per wall crossing
NOISE_DENSITY_DBM_HZ = -174.0   # thermal noise density
SE_MAX = 7.8                    # bit/s/Hz cap (256-QAM region)


def fspl_db(distance_m, frequency_hz):
    """Free-space path loss, 20*log10(4*pi*d*f/c); d clamped to >= 1 m."""
    d = np.maximum(np.asarray(distance_m, dtype=float), MIN_DISTANCE_M)
    return 20.0 * np.log10(4.0 * math.pi * d * np.asarray(frequency_hz, dtype=float)
                           / SPEED_OF_LIGHT)


def antenna_gain_db(bearing_deg, azimuth_deg, beamwidth_deg):
    """Sector antenna: +10 dB inside the main lobe, 0 dB outside.

    The lobe spans azimuth +/- beamwidth/2, boundary inclusive; angles
    compare on the circle, so 359 deg is 2 deg away from 1 deg.
    """
    diff = np.abs((np.asarray(bearing_deg, dtype=float)
                   - np.asarray(azimuth_deg, dtype=float) + 180.0) % 360.0 - 180.0)
    return np.where(diff <= np.asarray(beamwidth_deg, dtype=float) / 2.0,
                    MAIN_LOBE_GAIN_DB, 0.0)


def noise_floor_dbm(bandwidth_hz):
    """Thermal noise power over `bandwidth_hz`: -174 + 10*log10(BW)."""
    return NOISE_DENSITY_DBM_HZ + 10.0 * np.log10(np.asarray(bandwidth_hz, dtype=float))


def received_power_matrix(ue_xy: np.ndarray, topo: Topology, *,
                          indoor: np.ndarray | None = None,
                          obstruction_enabled: bool = True) -> np.ndarray:
    """RSRP-like received power in dBm for every (UE, cell) pair; shape (N, C).

    rx = tx + antenna_gain - fspl - walls * 6 dB. Wall counts come from the
    segment UE->cell against building polygons; `indoor` is accepted for
    interface symmetry but does not add loss beyond the walls the segment
    actually crosses. With `obstruction_enabled`=False the wall term is 0.
    """
    ue_xy = np.asarray(ue_xy, dtype=float).reshape(-1, 2)
    n = len(ue_xy)
    dx = ue_xy[:, 0:1] - topo.cell_xy[None, :, 0]   # (N, C)
    dy = ue_xy[:, 1:2] - topo.cell_xy[None, :, 1]
    dist = np.hypot(dx, dy)
    # bearing from cell to UE, degrees clockwise from +y (compass convention)
    bearing = np.degrees(np.arctan2(dx, dy)) % 360.0
    loss = fspl_db(dist, topo.cell_frequency[None, :])
    gain = antenna_gain_db(bearing, topo.cell_azimuth[None, :],
                           topo.cell_beamwidth[None, :])
    rx = topo.cell_tx_power[None, :] + gain - loss
    if obstruction_enabled and len(topo.buildings) > 0 and n > 0:
        walls = wall_crossings_to_cells(ue_xy, topo)
        rx = rx - WALL_LOSS_DB * walls
    return rx


def snr_db(rx_dbm, bandwidth_hz):
    """SNR = received power minus the thermal noise floor of the channel."""
    return np.asarray(rx_dbm, dtype=float) - noise_floor_dbm(bandwidth_hz)


# ---------------------------------------------------------------------------
# Spectral-efficiency lookup
# ---------------------------------------------------------------------------

def default_se_table() -> tuple[np.ndarray, np.ndarray]:
    """Bundled table: SNR -10..19 dB in 1 dB steps, Shannon capped at 7.8."""
    snr = np.arange(-10.0, 20.0, 1.0)
    se = np.minimum(np.log2(1.0 + 10.0 ** (snr / 10.0)), SE_MAX)
    return snr, se


def load_se_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column TSV (snr_db, se_bit_per_hz), sorted ascending by SNR."""
    rows = np.loadtxt(path, dtype=float, ndmin=2)
    if rows.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (snr_db, se)")
    snr, se = rows[:, 0], rows[:, 1]
    if np.any(np.diff(snr) <= 0):
        raise ValueError(f"{path}: snr column must be strictly increasing")
    return snr, se


def save_se_table(snr: np.ndarray, se: np.ndarray, path) -> None:
    np.savetxt(path, np.column_stack([snr, se]), fmt="%.17g", delimiter="\t")


def spectral_efficiency(snr, table: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Nearest-neighbor lookup in the SE table.

    Clamps below the first and above the last entry; an SNR exactly midway
    between two entries resolves to the lower-SNR entry.
    """
    snr_col, se_col = table
    q = np.asarray(snr, dtype=float)
    # insertion points of q among midpoints give nearest entries with the
    # required "ties to lower" behavior (midpoint itself goes left)
    mid = (snr_col[:-1] + snr_col[1:]) / 2.0
    idx = np.searchsorted(mid, q, side="left")
    return se_col[idx]
