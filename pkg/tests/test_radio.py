"""Propagation and spectral-efficiency lookup.

Reference values were computed independently at 30-digit precision from the
closed-form definitions and are asserted here as frozen constants.
"""

import numpy as np
import pytest

from cellpilot.radio import (
    MAIN_LOBE_GAIN_DB,
    SE_MAX,
    WALL_LOSS_DB,
    antenna_gain_db,
    default_se_table,
    fspl_db,
    load_se_table,
    noise_floor_dbm,
    received_power_matrix,
    save_se_table,
    snr_db,
    spectral_efficiency,
)
from cellpilot.topology import Cell, Topology, Tower


# --- free-space path loss ---------------------------------------------------

def test_fspl_frozen_values():
    assert fspl_db(1000.0, 1.0e9) == pytest.approx(92.4475647101967116, rel=1e-14)
    assert fspl_db(100.0, 3.5e9) == pytest.approx(83.3289255972022244, rel=1e-14)
    assert fspl_db(1.0, 7.0e8) == pytest.approx(29.3495255104818483, rel=1e-14)
    assert fspl_db(1.0, 1.8e9) == pytest.approx(37.5530148122628331, rel=1e-14)


def test_fspl_distance_clamped_below_one_meter():
    assert fspl_db(0.05, 2.0e9) == fspl_db(1.0, 2.0e9)
    assert fspl_db(0.0, 2.0e9) == fspl_db(1.0, 2.0e9)


def test_fspl_slope_20db_per_decade():
    assert fspl_db(1000.0, 1e9) - fspl_db(100.0, 1e9) == pytest.approx(20.0)
    assert fspl_db(100.0, 1e9) - fspl_db(100.0, 1e8) == pytest.approx(20.0)


def test_fspl_broadcasts():
    d = np.array([10.0, 100.0, 1000.0])
    out = fspl_db(d, 1e9)
    assert out.shape == (3,)
    assert np.all(np.diff(out) > 0)


# --- antenna ------------------------------------------------------------------

def test_antenna_gain_lobe_and_boundary():
    assert antenna_gain_db(0.0, 0.0, 120.0) == MAIN_LOBE_GAIN_DB
    assert antenna_gain_db(60.0, 0.0, 120.0) == MAIN_LOBE_GAIN_DB   # inclusive
    assert antenna_gain_db(60.001, 0.0, 120.0) == 0.0
    assert antenna_gain_db(180.0, 0.0, 120.0) == 0.0


def test_antenna_gain_wraps_around_circle():
    # 359 deg is 2 deg from 1 deg, not 358
    assert antenna_gain_db(359.0, 1.0, 120.0) == MAIN_LOBE_GAIN_DB
    assert antenna_gain_db(181.0, 359.0, 120.0) == 0.0
    assert antenna_gain_db(300.0, 350.0, 120.0) == MAIN_LOBE_GAIN_DB


# --- noise --------------------------------------------------------------------

def test_noise_floor_frozen_values():
    assert noise_floor_dbm(10e6) == pytest.approx(-104.0, abs=1e-12)
    assert noise_floor_dbm(80e6) == pytest.approx(-94.9691001300805641, rel=1e-14)


def test_snr_is_rx_minus_noise():
    assert snr_db(-60.0, 10e6) == pytest.approx(44.0)


# --- received power matrix ------------------------------------------------------

def one_cell_topo(buildings=()):
    tower = Tower("T1", 0.0, 0.0)
    cell = Cell(id="C1", tower_id="T1", position=(0.0, 0.0), azimuth=0.0,
                beamwidth=120.0, frequency=1.0e9, bandwidth=10e6, priority=1,
                tx_power=30.0)
    return Topology((-50.0, -50.0, 1200.0, 1200.0), [tower], [cell],
                    [np.asarray(b, dtype=float) for b in buildings], [])


def test_rx_in_lobe_matches_hand_computation():
    topo = one_cell_topo()
    rx = received_power_matrix(np.array([[0.0, 1000.0]]), topo)
    # tx 30 + lobe 10 - fspl(1000 m, 1 GHz)
    assert rx[0, 0] == pytest.approx(40.0 - 92.4475647101967116, rel=1e-14)


def test_rx_off_lobe_drops_gain():
    topo = one_cell_topo()
    on = received_power_matrix(np.array([[0.0, 1000.0]]), topo)[0, 0]
    off = received_power_matrix(np.array([[1000.0, 0.0]]), topo)[0, 0]
    assert on - off == pytest.approx(MAIN_LOBE_GAIN_DB, rel=1e-12)


def test_rx_wall_losses_accumulate():
    box = [[-15.0, 400.0], [15.0, 400.0], [15.0, 430.0], [-15.0, 430.0]]
    topo = one_cell_topo(buildings=[box])
    clear = received_power_matrix(np.array([[0.0, 300.0]]), topo)[0, 0]
    behind = received_power_matrix(np.array([[0.0, 1000.0]]), topo)[0, 0]
    through = fspl_db(300.0, 1e9) - fspl_db(1000.0, 1e9)
    assert behind - clear == pytest.approx(through - 2 * WALL_LOSS_DB, rel=1e-12)


def test_rx_obstruction_toggle():
    box = [[-15.0, 400.0], [15.0, 400.0], [15.0, 430.0], [-15.0, 430.0]]
    topo = one_cell_topo(buildings=[box])
    ue = np.array([[0.0, 1000.0]])
    loss_on = received_power_matrix(ue, topo, obstruction_enabled=True)[0, 0]
    loss_off = received_power_matrix(ue, topo, obstruction_enabled=False)[0, 0]
    assert loss_off - loss_on == pytest.approx(2 * WALL_LOSS_DB)


def test_rx_indoor_flag_changes_nothing():
    topo = one_cell_topo()
    ue = np.array([[50.0, 80.0]])
    a = received_power_matrix(ue, topo, indoor=np.array([True]))
    b = received_power_matrix(ue, topo, indoor=np.array([False]))
    assert a[0, 0] == b[0, 0]


def test_rx_deterministic_bytes():
    topo = one_cell_topo()
    pts = np.random.default_rng(3).uniform(0, 1000, size=(64, 2))
    a = received_power_matrix(pts, topo)
    b = received_power_matrix(pts, topo)
    assert a.tobytes() == b.tobytes()


# --- SE table -------------------------------------------------------------------

def test_default_table_frozen_entries():
    snr, se = default_se_table()
    assert snr[0] == -10.0 and snr[-1] == 19.0 and len(snr) == 30
    lut = dict(zip(snr, se))
    assert lut[-10.0] == pytest.approx(0.1375035237499349, rel=1e-14)
    assert lut[0.0] == pytest.approx(1.0, rel=1e-14)
    assert lut[13.0] == pytest.approx(4.3890589673630449, rel=1e-14)
    assert lut[19.0] == pytest.approx(6.3297124594419096, rel=1e-14)
    assert np.all(se <= SE_MAX)


def test_lookup_nearest_with_ties_to_lower():
    table = default_se_table()
    snr, se = table
    assert spectral_efficiency(3.2, table) == se[13]      # nearest is 3.0
    assert spectral_efficiency(3.6, table) == se[14]      # nearest is 4.0
    assert spectral_efficiency(3.5, table) == se[13]      # midpoint -> lower
    assert spectral_efficiency(-9.5, table) == se[0]      # midpoint -> lower
    assert spectral_efficiency(-50.0, table) == se[0]     # clamp below
    assert spectral_efficiency(50.0, table) == se[-1]     # clamp above


def test_lookup_vectorized():
    table = default_se_table()
    out = spectral_efficiency(np.array([-50.0, 0.0, 50.0]), table)
    assert out.tolist() == [table[1][0], 1.0, table[1][-1]]


def test_se_table_roundtrip_exact(tmp_path):
    snr, se = default_se_table()
    p = tmp_path / "se.tsv"
    save_se_table(snr, se, p)
    snr2, se2 = load_se_table(p)
    assert snr2.tobytes() == snr.tobytes()   # %.17g preserves float64 exactly
    assert se2.tobytes() == se.tobytes()


def test_se_table_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("1.0\t2.0\t3.0\n")
    with pytest.raises(ValueError, match="two columns"):
        load_se_table(p)
    p.write_text("1.0\t2.0\n1.0\t2.5\n")
    with pytest.raises(ValueError, match="increasing"):
        load_se_table(p)


def test_bundled_table_matches_default():
    from importlib import resources
    with resources.as_file(resources.files("cellpilot.data") / "se_default.tsv") as p:
        snr, se = load_se_table(p)
    dsnr, dse = default_se_table()
    assert snr.tobytes() == dsnr.tobytes()
    assert se.tobytes() == dse.tobytes()
