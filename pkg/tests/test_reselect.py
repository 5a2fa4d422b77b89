import json

import numpy as np
import pytest

from cellpilot.reselect import (
    CONFIG_A,
    CONFIG_B,
    PARAM_ORDER,
    PARAM_RANGES,
    ReselectionParams,
    brute_force_oracle,
    clamp_params,
    initial_select,
    is_suitable,
    load_presets,
    new_timers,
    run_ue_trace,
    step_reselection,
)


def make_params(**over):
    base = dict(t_xhigh=-56.0, t_xlow=-58.0, t_slow=-54.0,
                q_hyst=3.0, q_offset=14.0, q_rxlevmin=-60.0)
    base.update(over)
    return ReselectionParams(**base)


def test_param_vector_round_trip():
    p = make_params()
    v = p.to_vector()
    assert v.shape == (6,)
    assert list(v) == [getattr(p, f) for f in PARAM_ORDER]
    q = ReselectionParams.from_vector(v)
    assert q == p


def test_validate_and_clamp():
    make_params().validate()
    bad = make_params(q_hyst=31.0)
    with pytest.raises(ValueError):
        bad.validate()
    fixed, moved = clamp_params(bad)
    assert moved == ["q_hyst"]
    assert fixed.q_hyst == 30.0
    fixed.validate()
    # already-in-range params come back untouched
    same, moved = clamp_params(make_params())
    assert moved == [] and same == make_params()
    lo = ReselectionParams.from_vector([-200, -200, -200, -5, -5, -200])
    fixed, moved = clamp_params(lo)
    assert set(moved) == set(PARAM_ORDER)
    assert all(fixed.to_vector() == [PARAM_RANGES[f][0] for f in PARAM_ORDER])


def test_preset_values():
    assert CONFIG_B.to_vector().tolist() == [-56.0, -58.0, -54.0, 3.0, 14.0, -60.0]
    assert CONFIG_A.to_vector().tolist() == [-58.0, -60.0, -58.0, 3.0, 20.0, -60.0]
    assert CONFIG_B.t_resel == 1.0
    assert CONFIG_B.s_intra == 4.0 and CONFIG_B.s_inter == 6.0


def test_load_presets(tmp_path):
    doc = {"mine": {f: v for f, v in zip(PARAM_ORDER, [-50, -55, -52, 2, 10, -65])}}
    path = tmp_path / "presets.json"
    path.write_text(json.dumps(doc))
    loaded = load_presets(path)
    assert loaded["mine"] == ReselectionParams(-50, -55, -52, 2, 10, -65)
    doc["mine"]["q_hyst"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_presets(path)


def test_suitability_is_strict():
    p = make_params(q_rxlevmin=-60.0)
    suit = is_suitable([-60.0, -59.999, -60.001], p)
    assert suit.tolist() == [False, True, False]


def test_initial_select_priority_then_rx_then_id():
    p = make_params(q_rxlevmin=-60.0)
    prio = np.array([1, 2, 2, 2])
    # cell 0 strongest but lower priority; among priority 2 cells pick max rx
    rx = np.array([-40.0, -50.0, -45.0, -45.0])
    assert initial_select(rx, prio, p) == 2
    # exact rx tie inside the top layer -> lowest id
    rx = np.array([-40.0, -45.0, -45.0, -45.0])
    assert initial_select(rx, prio, p) == 1
    # nothing suitable
    assert initial_select(np.full(4, -61.0), prio, p) is None
    # unsuitable cells are ignored even when strongest
    rx = np.array([-40.0, -61.0, -59.0, -61.0])
    assert initial_select(rx, prio, p) == 2


def one_step(serving, rx, prio, freq, params, dt=1.0, timers=None):
    if timers is None:
        timers = new_timers(len(rx))
    return step_reselection(serving, timers, np.asarray(rx, float),
                            np.asarray(prio), np.asarray(freq, float), params, dt)


def test_high_priority_criterion():
    p = make_params(t_xhigh=-56.0, q_rxlevmin=-60.0)
    prio = [1, 2]
    freq = [1e9, 2e9]
    # target above t_xhigh and suitable -> fires on the first step at dt=1
    new, _, crit = one_step(0, [-50.0, -55.0], prio, freq, p)
    assert (new, crit) == (1, "high")
    # at the threshold exactly: strict comparison, no move
    new, _, crit = one_step(0, [-50.0, -56.0], prio, freq, p)
    assert (new, crit) == (0, None)
    # above threshold but unsuitable -> no move
    new, _, crit = one_step(0, [-50.0, -60.5], prio, freq, p,
                            timers=None)
    assert crit is None


def test_equal_priority_needs_strict_margin():
    p = make_params(q_hyst=3.0, q_offset=14.0, q_rxlevmin=-90.0)
    prio = [2, 2]
    freq = [1e9, 1e9]
    # rx_t - q_offset must strictly beat rx_s + q_hyst: boundary stays put
    rx_s = -60.0
    boundary = rx_s + 3.0 + 14.0
    new, _, crit = one_step(0, [rx_s, boundary], prio, freq, p)
    assert crit is None
    new, _, crit = one_step(0, [rx_s, boundary + 1e-9], prio, freq, p)
    assert (new, crit) == (1, "equal")


def test_low_priority_gates():
    # s_lev = rx_s - q_rxlevmin; measurement gate s_intra=4 on the serving
    # frequency, s_inter=6 off it
    p = make_params(t_slow=-54.0, t_xlow=-58.0, q_rxlevmin=-60.0)
    prio = [2, 1]
    rx = [-55.0, -50.0]      # s_lev = 5, rx_s < t_slow holds
    new, _, crit = one_step(0, rx, prio, [1e9, 1e9], p)
    assert crit is None      # 5 < 4 fails on same frequency
    new, _, crit = one_step(0, rx, prio, [1e9, 2e9], p)
    assert (new, crit) == (1, "low")   # 5 < 6 passes across frequencies
    # serving above t_slow blocks the path even when measured
    new, _, crit = one_step(0, [-53.9, -50.0], prio, [1e9, 2e9], p)
    assert crit is None
    # target at/below t_xlow is not admitted
    new, _, crit = one_step(0, [-55.0, -58.0], prio, [1e9, 2e9], p)
    assert crit is None


def test_criterion_order_high_beats_equal_beats_low():
    # s_lev = -60 - (-64) = 4 < s_inter keeps the low path measured
    p = make_params(t_xhigh=-56.0, t_slow=-40.0, t_xlow=-58.0,
                    q_hyst=1.0, q_offset=1.0, q_rxlevmin=-64.0)
    prio = [2, 3, 2, 1]
    freq = [1e9, 2e9, 2e9, 3e9]
    rx = [-60.0, -50.0, -40.0, -45.0]  # all three criteria fire together
    new, _, crit = one_step(0, rx, prio, freq, p)
    assert (new, crit) == (1, "high")
    rx[1] = -91.0                      # drop the high candidate
    new, _, crit = one_step(0, rx, prio, freq, p)
    assert (new, crit) == (2, "equal")
    rx[2] = -91.0
    new, _, crit = one_step(0, rx, prio, freq, p)
    assert (new, crit) == (3, "low")


def test_tie_breaks_within_a_criterion():
    p = make_params(t_xhigh=-70.0, q_rxlevmin=-90.0)
    freq = [1e9, 2e9, 3e9, 4e9]
    # two high-priority layers: higher priority wins even at lower rx
    prio = [1, 2, 3, 3]
    new, _, crit = one_step(0, [-50.0, -55.0, -60.0, -60.0], prio, freq, p)
    assert (new, crit) == (2, "high")
    # same priority, same rx -> lowest cell index
    prio = [1, 3, 3, 3]
    new, _, crit = one_step(0, [-50.0, -60.0, -60.0, -60.0], prio, freq, p)
    assert (new, crit) == (1, "high")


def test_dt_half_needs_two_sustained_steps():
    p = make_params(t_xhigh=-56.0, q_rxlevmin=-60.0)
    prio = np.array([1, 2])
    freq = np.array([1e9, 2e9])
    rx = np.array([-50.0, -55.0])
    timers = new_timers(2)
    new, timers, crit = step_reselection(0, timers, rx, prio, freq, p, 0.5)
    assert crit is None and timers[0, 1] == 0.5
    new, timers, crit = step_reselection(0, timers, rx, prio, freq, p, 0.5)
    assert (new, crit) == (1, "high")
    assert np.all(timers == 0.0)       # timers zeroed after the move


def test_timer_resets_when_condition_breaks():
    p = make_params(t_xhigh=-56.0, q_rxlevmin=-60.0)
    prio = np.array([1, 2])
    freq = np.array([1e9, 2e9])
    good = np.array([-50.0, -55.0])
    bad = np.array([-50.0, -57.0])
    timers = new_timers(2)
    _, timers, crit = step_reselection(0, timers, good, prio, freq, p, 0.5)
    assert timers[0, 1] == 0.5
    _, timers, crit = step_reselection(0, timers, bad, prio, freq, p, 0.5)
    assert timers[0, 1] == 0.0         # one bad step clears the credit
    _, timers, crit = step_reselection(0, timers, good, prio, freq, p, 0.5)
    assert crit is None and timers[0, 1] == 0.5


def test_trace_select_outage_reacquire():
    p = make_params(q_rxlevmin=-60.0)
    prio = np.array([1, 1])
    freq = np.array([1e9, 1e9])
    trace = np.array([
        [-50.0, -70.0],   # step 0: select cell 0
        [-50.0, -70.0],
        [-65.0, -70.0],   # step 2: serving unsuitable -> outage
        [-65.0, -55.0],   # step 3: reacquire on cell 1
        [-65.0, -55.0],
    ])
    events = run_ue_trace(trace, prio, freq, p)
    assert events == [(0, "select", None, 0),
                      (2, "outage", 0, None),
                      (3, "select", None, 1)]


def test_trace_event_kinds_and_shapes():
    p = make_params(t_xhigh=-56.0, q_rxlevmin=-60.0)
    prio = np.array([1, 2])
    freq = np.array([1e9, 2e9])
    trace = np.tile([-50.0, -55.0], (3, 1))
    events = run_ue_trace(trace, prio, freq, p)
    # initial selection is priority-first (cell 1 despite the weaker rx);
    # serving -55 < t_slow with s_lev 5 < s_inter opens the low path down,
    # then the high criterion climbs straight back: a ping-pong
    assert events == [(0, "select", None, 1), (1, "low", 1, 0), (2, "high", 0, 1)]
    for ev in events:
        assert len(ev) == 4 and ev[1] in {"select", "outage", "high", "equal", "low"}


def random_instance(rng):
    n_cells = int(rng.integers(2, 7))
    t_steps = int(rng.integers(5, 41))
    prio = rng.integers(0, 4, size=n_cells)
    freq = rng.choice([7e8, 1.8e9, 2.6e9], size=n_cells)
    base = rng.uniform(-75.0, -45.0, size=n_cells)
    walk = rng.normal(0.0, 2.5, size=(t_steps, n_cells)).cumsum(axis=0)
    trace = base + walk
    params = ReselectionParams(
        t_xhigh=float(rng.uniform(-65, -45)),
        t_xlow=float(rng.uniform(-70, -50)),
        t_slow=float(rng.uniform(-65, -45)),
        q_hyst=float(rng.uniform(0, 6)),
        q_offset=float(rng.uniform(0, 18)),
        q_rxlevmin=float(rng.uniform(-75, -50)),
    )
    return trace, prio, freq, params


def test_fuzz_against_brute_force_oracle():
    rng = np.random.default_rng(1234)
    total_events = 0
    for trial in range(300):
        trace, prio, freq, params = random_instance(rng)
        dt = 1.0 if trial % 3 else 0.5
        got = run_ue_trace(trace, prio, freq, params, dt=dt)
        want = brute_force_oracle(trace, prio, freq, params, dt=dt)
        assert got == want, f"trial {trial}: {got} != {want}"
        total_events += len(want)
    # the corpus must actually exercise every event kind
    assert total_events > 500


def test_fuzz_covers_all_kinds():
    rng = np.random.default_rng(77)
    kinds = set()
    for _ in range(200):
        trace, prio, freq, params = random_instance(rng)
        for ev in run_ue_trace(trace, prio, freq, params):
            kinds.add(ev[1])
    assert kinds == {"select", "outage", "high", "equal", "low"}
