"""Idle-mode cell (re)selection: suitability, hierarchical priority-based
reselection, equal-priority ranking, and the per-criterion dwell timers.

Three criteria are evaluated for a camped UE each step, each per target
cell, each gated on target suitability:

* high  — target priority above serving: rx_target > t_xhigh
* equal — same priority: rx_target - q_offset > rx_serving + q_hyst
* low   — target priority below serving, measured only while the serving
          level s_rxlev = rx_serving - q_rxlevmin is under the search
          threshold (s_intra on the serving frequency, s_inter off it):
          rx_serving < t_slow and rx_target > t_xlow

A criterion's timer advances while its condition holds and resets to zero
the step it fails; the UE reselects once elapsed time reaches t_resel.
When several targets fire in one step the order high > equal > low
applies, then (priority desc,) metric desc, cell id asc.

`brute_force_oracle` re-implements the whole protocol with plain Python
loops and dictionaries as an independent cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

# criterion rows in the (3, C) timer array
HIGH, EQUAL, LOW = 0, 1, 2
CRITERION_NAMES = ("high", "equal", "low")

PARAM_ORDER = ("t_xhigh", "t_xlow", "t_slow", "q_hyst", "q_offset", "q_rxlevmin")
PARAM_RANGES = {
    "t_xhigh": (-100.0, 0.0),
    "t_xlow": (-100.0, 0.0),
    "t_slow": (-100.0, 0.0),
    "q_hyst": (0.0, 30.0),
    "q_offset": (0.0, 30.0),
    "q_rxlevmin": (-100.0, 0.0),
}

T_RESEL_DEFAULT = 1.0    # s; one simulation step
S_INTRA_DEFAULT = 4.0    # dB, search threshold on s_rxlev, serving frequency
S_INTER_DEFAULT = 6.0    # dB, other frequencies


@dataclass(frozen=True)
class ReselectionParams:
    """The six broadcast tunables plus the fixed timing/search constants."""

    t_xhigh: float      # dBm, admit threshold toward higher-priority layers
    t_xlow: float       # dBm, target floor for lower-priority reselection
    t_slow: float       # dBm, serving level that opens the low path
    q_hyst: float       # dB, serving-rank hysteresis
    q_offset: float     # dB, neighbor-rank penalty
    q_rxlevmin: float   # dBm, suitability floor
    t_resel: float = T_RESEL_DEFAULT
    s_intra: float = S_INTRA_DEFAULT
    s_inter: float = S_INTER_DEFAULT

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in PARAM_ORDER], dtype=float)

    @classmethod
    def from_vector(cls, vec, **fixed) -> "ReselectionParams":
        vals = {f: float(v) for f, v in zip(PARAM_ORDER, vec)}
        return cls(**vals, **fixed)

    def validate(self) -> None:
        for f in PARAM_ORDER:
            lo, hi = PARAM_RANGES[f]
            v = getattr(self, f)
            if not (lo <= v <= hi):
                raise ValueError(f"{f}={v} outside [{lo}, {hi}]")


def clamp_params(p: ReselectionParams) -> tuple[ReselectionParams, list[str]]:
    """Clamp each tunable into its range; returns the fields that moved."""
    moved = []
    updates = {}
    for f in PARAM_ORDER:
        lo, hi = PARAM_RANGES[f]
        v = getattr(p, f)
        c = min(max(v, lo), hi)
        if c != v:
            moved.append(f)
            updates[f] = c
    return (replace(p, **updates) if updates else p), moved


CONFIG_B = ReselectionParams(
    t_xhigh=-56.0, t_xlow=-58.0, t_slow=-54.0,
    q_hyst=3.0, q_offset=14.0, q_rxlevmin=-60.0,
)
CONFIG_A = ReselectionParams(
    t_xhigh=-58.0, t_xlow=-60.0, t_slow=-58.0,
    q_hyst=3.0, q_offset=20.0, q_rxlevmin=-60.0,
)
PRESETS = {"config_a": CONFIG_A, "config_b": CONFIG_B}


def load_presets(path) -> dict[str, ReselectionParams]:
    """JSON file {name: {t_xhigh: ..., ...}} -> validated presets."""
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for name, fields in doc.items():
        p = ReselectionParams(**{k: float(v) for k, v in fields.items()})
        p.validate()
        out[name] = p
    return out


# ---------------------------------------------------------------------------
# State machine
# ---------------------------------------------------------------------------

def is_suitable(rx, params: ReselectionParams):
    """Minimum-level condition: rx - q_rxlevmin > 0, strict."""
    return np.asarray(rx, dtype=float) - params.q_rxlevmin > 0.0


def initial_select(rx: np.ndarray, priorities: np.ndarray,
                   params: ReselectionParams,
                   id_rank: np.ndarray | None = None) -> int | None:
    """Best suitable cell: highest priority layer, then max rx, then id."""
    suit = is_suitable(rx, params)
    if not suit.any():
        return None
    idx = np.flatnonzero(suit)
    pr = priorities[idx]
    idx = idx[pr == pr.max()]
    rank = id_rank[idx] if id_rank is not None else idx
    order = np.lexsort((rank, -rx[idx]))
    return int(idx[order[0]])


def new_timers(n_cells: int) -> np.ndarray:
    return np.zeros((3, n_cells), dtype=float)


def _conditions(serving: int, rx: np.ndarray, priorities: np.ndarray,
                frequencies: np.ndarray, params: ReselectionParams) -> np.ndarray:
    suitable = rx - params.q_rxlevmin > 0.0
    pr_s = priorities[serving]
    rx_s = rx[serving]
    s_lev = rx_s - params.q_rxlevmin
    cond = np.zeros((3, rx.shape[0]), dtype=bool)
    cond[HIGH] = (priorities > pr_s) & (rx > params.t_xhigh) & suitable
    eq = (priorities == pr_s) & suitable & (rx - params.q_offset > rx_s + params.q_hyst)
    eq[serving] = False
    cond[EQUAL] = eq
    same_freq = frequencies == frequencies[serving]
    measured = np.where(same_freq, s_lev < params.s_intra, s_lev < params.s_inter)
    cond[LOW] = ((priorities < pr_s) & measured & (rx_s < params.t_slow)
                 & (rx > params.t_xlow) & suitable)
    return cond


def step_reselection(serving: int, timers: np.ndarray, rx: np.ndarray,
                     priorities: np.ndarray, frequencies: np.ndarray,
                     params: ReselectionParams, dt: float,
                     id_rank: np.ndarray | None = None
                     ) -> tuple[int, np.ndarray, str | None]:
    """One dwell-timer step for a camped UE with a suitable serving cell.

    Returns (new serving index, timers, fired criterion or None). Timers
    are mutated in place and zeroed wholesale after a reselection (every
    criterion is relative to the serving cell, which just changed).
    """
    cond = _conditions(serving, rx, priorities, frequencies, params)
    np.minimum(timers + dt, params.t_resel, out=timers, where=cond)
    timers[~cond] = 0.0
    fired = cond & (timers >= params.t_resel)
    rank = id_rank if id_rank is not None else np.arange(rx.shape[0])
    if fired[HIGH].any():
        idx = np.flatnonzero(fired[HIGH])
        order = np.lexsort((rank[idx], -rx[idx], -priorities[idx].astype(float)))
        target, crit = int(idx[order[0]]), "high"
    elif fired[EQUAL].any():
        idx = np.flatnonzero(fired[EQUAL])
        order = np.lexsort((rank[idx], -(rx[idx] - params.q_offset)))
        target, crit = int(idx[order[0]]), "equal"
    elif fired[LOW].any():
        idx = np.flatnonzero(fired[LOW])
        order = np.lexsort((rank[idx], -rx[idx]))
        target, crit = int(idx[order[0]]), "low"
    else:
        return serving, timers, None
    timers[:] = 0.0
    return target, timers, crit


def run_ue_trace(rx_trace: np.ndarray, priorities: np.ndarray,
                 frequencies: np.ndarray, params: ReselectionParams,
                 dt: float = 1.0) -> list[tuple[int, str, int | None, int | None]]:
    """Full idle-UE protocol over a (T, C) rx trace; returns the event list.

    Events are (step, kind, from, to) with kind in {select, outage, high,
    equal, low}: `select` when an out-of-service UE acquires a cell (this
    includes step 0), `outage` when the serving cell loses suitability
    (initial selection then re-runs on the next step).
    """
    rx_trace = np.asarray(rx_trace, dtype=float)
    t_steps, n_cells = rx_trace.shape
    timers = new_timers(n_cells)
    serving: int | None = None
    events: list[tuple[int, str, int | None, int | None]] = []
    for t in range(t_steps):
        rx = rx_trace[t]
        if serving is None:
            serving = initial_select(rx, priorities, params)
            if serving is not None:
                events.append((t, "select", None, serving))
            timers[:] = 0.0
            continue
        if not (rx[serving] - params.q_rxlevmin > 0.0):
            events.append((t, "outage", serving, None))
            serving = None
            timers[:] = 0.0
            continue
        new_serving, timers, crit = step_reselection(
            serving, timers, rx, priorities, frequencies, params, dt)
        if crit is not None:
            events.append((t, crit, serving, new_serving))
            serving = new_serving
    return events


# ---------------------------------------------------------------------------
# Independent oracle (plain Python, no shared logic with the above)
# ---------------------------------------------------------------------------

def brute_force_oracle(rx_trace, priorities, frequencies, params: ReselectionParams,
                       dt: float = 1.0) -> list[tuple[int, str, int | None, int | None]]:
    """Exhaustive per-step re-evaluation of the reselection protocol.

    Same event contract as :func:`run_ue_trace`, computed with explicit
    loops and dict timer bookkeeping. Exists to cross-check the vectorized
    implementation, so it deliberately shares no code with it.
    """
    trace = [[float(v) for v in row] for row in np.asarray(rx_trace, dtype=float)]
    prio = [int(p) for p in priorities]
    freq = [float(f) for f in frequencies]
    n = len(prio)
    timers: dict[tuple[str, int], float] = {}
    serving = None
    events = []
    for t, rx in enumerate(trace):
        if serving is None:
            best = None
            for c in range(n):
                if rx[c] - params.q_rxlevmin > 0.0:
                    key = (prio[c], rx[c], -c)
                    if best is None or key > best[0]:
                        best = (key, c)
            if best is not None:
                serving = best[1]
                events.append((t, "select", None, serving))
            timers.clear()
            continue
        if not (rx[serving] - params.q_rxlevmin > 0.0):
            events.append((t, "outage", serving, None))
            serving = None
            timers.clear()
            continue
        s_lev = rx[serving] - params.q_rxlevmin
        fired: dict[str, list[int]] = {"high": [], "equal": [], "low": []}
        for c in range(n):
            if c == serving:
                ok = {"high": False, "equal": False, "low": False}
            else:
                suit = rx[c] - params.q_rxlevmin > 0.0
                ok = {
                    "high": suit and prio[c] > prio[serving] and rx[c] > params.t_xhigh,
                    "equal": (suit and prio[c] == prio[serving]
                              and rx[c] - params.q_offset > rx[serving] + params.q_hyst),
                    "low": (suit and prio[c] < prio[serving]
                            and s_lev < (params.s_intra if freq[c] == freq[serving]
                                         else params.s_inter)
                            and rx[serving] < params.t_slow
                            and rx[c] > params.t_xlow),
                }
            for crit in ("high", "equal", "low"):
                if ok[crit]:
                    elapsed = min(timers.get((crit, c), 0.0) + dt, params.t_resel)
                    timers[(crit, c)] = elapsed
                    if elapsed >= params.t_resel:
                        fired[crit].append(c)
                else:
                    timers.pop((crit, c), None)
        target = crit_name = None
        if fired["high"]:
            target = sorted(fired["high"],
                            key=lambda c: (-prio[c], -rx[c], c))[0]
            crit_name = "high"
        elif fired["equal"]:
            target = sorted(fired["equal"],
                            key=lambda c: (-(rx[c] - params.q_offset), c))[0]
            crit_name = "equal"
        elif fired["low"]:
            target = sorted(fired["low"], key=lambda c: (-rx[c], c))[0]
            crit_name = "low"
        if target is not None:
            events.append((t, crit_name, serving, target))
            serving = target
            timers.clear()
    return events
