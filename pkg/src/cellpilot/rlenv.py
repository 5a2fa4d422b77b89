"""Simulator <-> learner bridge: history-stacked scale-invariant
observations, the [0,1] action <-> physical-parameter maps, per-seed
per-interval moving-average baselines, and the composite reward.

All reward terms are ratios against the baseline table, so an agent that
exactly reproduces its baseline trajectory earns exactly zero at every
interval, and rescaling bandwidths/throughputs leaves rewards unchanged
once baselines are regenerated under the same scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reselect import PARAM_ORDER, PARAM_RANGES, ReselectionParams

EPS_SIGMA = 1.0      # bit/s guard for the balance ratio
REWARD_CLIP = 1.0    # per-component clip; see compute_reward
BASELINE_METRICS = ("tput", "sigma", "ue")


class RlenvError(Exception):
    pass


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------

def observation_dim(n_cells: int, k: int) -> int:
    return k * (2 * n_cells + 5)


def build_observation(frames, cell_bw: np.ndarray, n_ues: int, k: int) -> np.ndarray:
    """Stack the last k step-metric frames, oldest first, zero-padded at
    episode start. Per frame: per-cell [avail_bw ratio, active ratio]
    pairs, then five global summaries (mean/std of each ratio, idle ratio).
    """
    if k < 1:
        raise RlenvError("history length k must be >= 1")
    cell_bw = np.asarray(cell_bw, dtype=float)
    n_cells = len(cell_bw)
    frame_len = 2 * n_cells + 5
    out = np.zeros(k * frame_len)
    take = list(frames)[-k:]
    offset = k - len(take)
    for j, m in enumerate(take):
        avail = np.asarray(m.per_cell_avail_bw, dtype=float) / cell_bw
        active = np.asarray(m.per_cell_active, dtype=float) / n_ues
        f = np.empty(frame_len)
        f[0:2 * n_cells:2] = avail
        f[1:2 * n_cells:2] = active
        f[2 * n_cells + 0] = avail.mean()
        f[2 * n_cells + 1] = avail.std()
        f[2 * n_cells + 2] = active.mean()
        f[2 * n_cells + 3] = active.std()
        f[2 * n_cells + 4] = m.idle_count / n_ues
        start = (offset + j) * frame_len
        out[start:start + frame_len] = f
    return out


# ---------------------------------------------------------------------------
# Action mapping
# ---------------------------------------------------------------------------

def map_action(raw, **fixed) -> ReselectionParams:
    """First six raw values (clipped to [0,1]) linearly mapped to the
    physical parameter ranges in canonical order."""
    raw = np.asarray(raw, dtype=float).ravel()
    u = np.clip(raw[:6], 0.0, 1.0)
    vals = []
    for ui, name in zip(u, PARAM_ORDER):
        lo, hi = PARAM_RANGES[name]
        vals.append(lo + ui * (hi - lo))
    return ReselectionParams.from_vector(vals, **fixed)


def normalize_params(params: ReselectionParams) -> np.ndarray:
    """Inverse of map_action on the six tunables; values in [0,1]."""
    out = np.empty(6)
    for i, name in enumerate(PARAM_ORDER):
        lo, hi = PARAM_RANGES[name]
        out[i] = (getattr(params, name) - lo) / (hi - lo)
    return out


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalAggregate:
    """Reward inputs for one update interval (means over its steps)."""
    interval: int
    tput: float        # mean network throughput, bit/s
    sigma: float       # mean per-step population std of per-cell throughput
    ue: float          # mean per-step per-UE mean throughput
    avg_active: float  # mean ACTIVE count


def interval_aggregates(steps, pri: int) -> list[IntervalAggregate]:
    """Group a step trajectory into PRI-sized intervals (last may be short)."""
    out = []
    for t in range(0, (len(steps) + pri - 1) // pri):
        chunk = steps[t * pri:(t + 1) * pri]
        out.append(IntervalAggregate(
            interval=t,
            tput=float(np.mean([m.total_tput for m in chunk])),
            sigma=float(np.mean([np.asarray(m.per_cell_tput).std() for m in chunk])),
            ue=float(np.mean([m.per_ue_mean_tput for m in chunk])),
            avg_active=float(np.mean([m.active_count for m in chunk])),
        ))
    return out


@dataclass
class BaselineTable:
    """Per (seed, interval) ring buffers of the last `window` episode values
    for each reward metric; the baseline is the buffer's arithmetic mean."""

    window: int = 2
    data: dict = field(default_factory=dict)  # seed -> interval -> metric -> list

    def has(self, seed: int, interval: int) -> bool:
        return interval in self.data.get(seed, {})

    def _slot(self, seed: int, interval: int) -> dict:
        return self.data.setdefault(seed, {}).setdefault(
            interval, {m: [] for m in BASELINE_METRICS})

    def seed_reference(self, seed: int, aggs: list[IntervalAggregate]) -> None:
        """First-touch initialization from a heuristic reference trajectory;
        existing entries are left alone."""
        for a in aggs:
            if not self.has(seed, a.interval):
                slot = self._slot(seed, a.interval)
                slot["tput"].append(a.tput)
                slot["sigma"].append(a.sigma)
                slot["ue"].append(a.ue)

    def push(self, seed: int, aggs: list[IntervalAggregate]) -> None:
        for a in aggs:
            slot = self._slot(seed, a.interval)
            for name, v in (("tput", a.tput), ("sigma", a.sigma), ("ue", a.ue)):
                ring = slot[name]
                ring.append(v)
                del ring[:-self.window]

    def means(self, seed: int, interval: int) -> tuple[float, float, float]:
        try:
            slot = self.data[seed][interval]
        except KeyError:
            raise RlenvError(
                f"baseline missing for seed {seed}, interval {interval}; "
                "initialize it from the heuristic reference first") from None
        return tuple(float(np.mean(slot[m])) for m in BASELINE_METRICS)

    # --- checkpoint serialization -------------------------------------
    def to_arrays(self) -> dict[str, np.ndarray]:
        seeds = sorted(self.data)
        t_max = 0
        for s in seeds:
            if self.data[s]:
                t_max = max(t_max, max(self.data[s]) + 1)
        fill = np.zeros((len(seeds), t_max, 3), dtype=np.int64)
        vals = np.zeros((len(seeds), t_max, 3, self.window), dtype=float)
        for si, s in enumerate(seeds):
            for t, slot in self.data[s].items():
                for mi, m in enumerate(BASELINE_METRICS):
                    ring = slot[m]
                    fill[si, t, mi] = len(ring)
                    vals[si, t, mi, :len(ring)] = ring
        return {
            "bl_seeds": np.array(seeds, dtype=np.int64),
            "bl_fill": fill,
            "bl_vals": vals,
        }

    @classmethod
    def from_arrays(cls, window: int, arrays: dict) -> "BaselineTable":
        table = cls(window=window)
        seeds = arrays["bl_seeds"]
        fill = arrays["bl_fill"]
        vals = arrays["bl_vals"]
        for si, s in enumerate(seeds):
            for t in range(fill.shape[1]):
                if fill[si, t].max() == 0:
                    continue
                slot = table._slot(int(s), int(t))
                for mi, m in enumerate(BASELINE_METRICS):
                    n = int(fill[si, t, mi])
                    slot[m] = [float(v) for v in vals[si, t, mi, :n]]
        return table


# ---------------------------------------------------------------------------
# Reward
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RewardBreakdown:
    r_tput: float
    r_bal: float
    r_ue_eff: float
    r_total: float
    weights: tuple[float, float, float]


def compute_reward(agg: IntervalAggregate, baselines: BaselineTable, seed: int,
                   weights: tuple[float, float, float],
                   ue_max: int) -> RewardBreakdown:
    """Composite interval reward against the (seed, interval) baselines.

    r_tput = T/B - 1; r_bal = B_sigma/sigma - 1 (both sides floored at
    1 bit/s); r_ue_eff = (ue/B_ue - 1) * min(1, avg_active/ue_max). A zero
    throughput or per-UE baseline silences its term for the interval.

    Each component is clipped into [-REWARD_CLIP, +REWARD_CLIP]. The ratio
    forms are unbounded above, and the balance ratio in particular explodes
    when a parameter excursion drops every cell to zero throughput in one
    step (sigma -> 0 reads as "perfectly balanced"). Clipping keeps a
    blackout interval strictly net-negative while leaving ordinary signal
    (well inside +-1) untouched.
    """
    w1, w2, w3 = weights
    if abs(w1 + w2 + w3 - 1.0) > 1e-9:
        raise RlenvError(f"reward weights must sum to 1, got {weights}")
    b_tput, b_sigma, b_ue = baselines.means(seed, agg.interval)
    r_tput = agg.tput / b_tput - 1.0 if b_tput > 0.0 else 0.0
    r_bal = max(b_sigma, EPS_SIGMA) / max(agg.sigma, EPS_SIGMA) - 1.0
    if b_ue > 0.0:
        r_ue = (agg.ue / b_ue - 1.0) * min(1.0, agg.avg_active / ue_max)
    else:
        r_ue = 0.0
    r_tput = float(np.clip(r_tput, -REWARD_CLIP, REWARD_CLIP))
    r_bal = float(np.clip(r_bal, -REWARD_CLIP, REWARD_CLIP))
    r_ue = float(np.clip(r_ue, -REWARD_CLIP, REWARD_CLIP))
    total = w1 * r_tput + w2 * r_bal + w3 * r_ue
    return RewardBreakdown(r_tput, r_bal, r_ue, total, (w1, w2, w3))


def update_baselines(table: BaselineTable, seed: int,
                     aggs: list[IntervalAggregate]) -> BaselineTable:
    table.push(seed, aggs)
    return table
