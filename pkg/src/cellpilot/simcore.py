"""The discrete-time engine (dt = 1 s).

Per step, in fixed order: mobility (from step 1 on) -> frozen rx snapshot
-> parameter update at PRI boundaries -> mode switching -> (re)selection
-> scheduling -> metrics. All reads during (re)selection come from the
step's frozen snapshot, so UE iteration order cannot change results.

Episodes are pure functions of (config, controller outputs). Constant-
parameter reference episodes are cached on disk, keyed by a fingerprint
of everything that shapes the trajectory.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import radio, reselect, scheduler, traffic
from .container import load_container, save_container
from .reselect import ReselectionParams
from .rlenv import build_observation
from .topology import Topology, topology_fingerprint
from .traffic import TrafficConfig

DT = 1.0  # s per step

CACHE_ENV_VAR = "CELLPILOT_CACHE"
DEFAULT_CACHE_DIR = "~/.cache/cellpilot"


class SimError(Exception):
    pass


@dataclass
class EpisodeConfig:
    topology: Topology
    episode_seed: int
    n_ues: int = 50
    length: float = 50.0          # s
    pri: int = 1                  # steps between parameter updates
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    obstruction_enabled: bool = False
    se_table: tuple[np.ndarray, np.ndarray] | None = None
    history_k: int = 10           # observation frames

    def validate(self) -> None:
        if self.length <= 0:
            raise ValueError("episode length must be > 0")
        if self.pri < 1:
            raise ValueError("pri must be >= 1")
        if self.n_ues < 1:
            raise ValueError("n_ues must be >= 1")
        self.traffic.validate()

    @property
    def udr(self) -> float:
        """Update-to-dwell ratio pri*dt / SDT for this configuration."""
        return self.pri * DT / self.traffic.mean_dwell_s


@dataclass
class StepMetrics:
    time: float
    total_tput: float
    per_cell_tput: np.ndarray
    per_cell_avail_bw: np.ndarray
    per_cell_active: np.ndarray   # ACTIVE UEs scheduled per cell
    active_count: int
    idle_count: int
    per_ue_mean_tput: float
    reselection_events: int


@dataclass
class UpdateRecord:
    interval: int
    step: int
    params: ReselectionParams
    clamped: list[str]


@dataclass
class EpisodeResult:
    steps: list[StepMetrics]
    updates: list[UpdateRecord]
    n_cells: int
    n_ues: int
    pri: int
    udr: float

    def arrays(self) -> dict[str, np.ndarray]:
        s = self.steps
        return {
            "time": np.array([m.time for m in s]),
            "total_tput": np.array([m.total_tput for m in s]),
            "per_cell_tput": np.array([m.per_cell_tput for m in s]),
            "per_cell_avail_bw": np.array([m.per_cell_avail_bw for m in s]),
            "per_cell_active": np.array([m.per_cell_active for m in s], dtype=float),
            "active_count": np.array([m.active_count for m in s], dtype=float),
            "idle_count": np.array([m.idle_count for m in s], dtype=float),
            "per_ue_mean_tput": np.array([m.per_ue_mean_tput for m in s]),
            "reselection_events": np.array([m.reselection_events for m in s], dtype=float),
        }


def _cell_id_rank(topo: Topology) -> np.ndarray:
    """rank[i] = position of cell i when ids are sorted (tie-break key)."""
    order = sorted(range(topo.n_cells), key=lambda i: topo.cells[i].id)
    rank = np.empty(topo.n_cells, dtype=int)
    for pos, idx in enumerate(order):
        rank[idx] = pos
    return rank


def run_episode(cfg: EpisodeConfig, controller) -> EpisodeResult:
    """Run one seeded episode; `controller(obs, interval) -> ReselectionParams`
    is invoked at every PRI boundary and its output applied network-wide
    (clamped into range if needed, with the clamp recorded)."""
    cfg.validate()
    topo = cfg.topology
    n_cells = topo.n_cells
    se_table = cfg.se_table if cfg.se_table is not None else radio.default_se_table()
    noise_floor = radio.noise_floor_dbm(topo.cell_bandwidth)
    id_rank = _cell_id_rank(topo)
    ues = traffic.init_population(cfg.n_ues, topo, cfg.episode_seed, cfg.traffic)
    n_steps = int(round(cfg.length / DT))
    history: deque[StepMetrics] = deque(maxlen=cfg.history_k)
    steps: list[StepMetrics] = []
    updates: list[UpdateRecord] = []
    params: ReselectionParams | None = None
    rx: np.ndarray | None = None

    for s in range(n_steps):
        t = s * DT
        if s > 0:
            traffic.step_mobility(ues, topo, DT, cfg.traffic)
        if rx is None or (cfg.traffic.mobility_enabled and s > 0):
            pos = np.array([ue.position for ue in ues])
            rx = radio.received_power_matrix(
                pos, topo, obstruction_enabled=cfg.obstruction_enabled)
        if s % cfg.pri == 0:
            obs = build_observation(list(history), topo.cell_bandwidth,
                                    cfg.n_ues, cfg.history_k)
            proposed = controller(obs, s // cfg.pri)
            params, clamped = reselect.clamp_params(proposed)
            updates.append(UpdateRecord(s // cfg.pri, s, params, clamped))
        traffic.step_modes(ues, t, DT, cfg.traffic)

        resel_events = 0
        for ue in ues:
            rxu = rx[ue.id]
            if ue.serving is None:
                sel = reselect.initial_select(rxu, topo.cell_priority, params, id_rank)
                if sel is not None:
                    ue.serving = sel
                    ue.timers[:] = 0.0
                    if s > 0:
                        resel_events += 1  # service recovery counts, t=0 camp-on does not
                continue
            if not (rxu[ue.serving] - params.q_rxlevmin > 0.0):
                ue.serving = None   # outage; initial selection re-runs next step
                ue.timers[:] = 0.0
                continue
            if ue.mode == traffic.IDLE:
                new_serving, _, crit = reselect.step_reselection(
                    ue.serving, ue.timers, rxu, topo.cell_priority,
                    topo.cell_frequency, params, DT, id_rank)
                if crit is not None:
                    ue.serving = new_serving
                    resel_events += 1

        cell_ues: list[list[int]] = [[] for _ in range(n_cells)]
        for ue in ues:
            if ue.mode == traffic.ACTIVE and ue.serving is not None:
                cell_ues[ue.serving].append(ue.id)
        allocs = []
        for c in range(n_cells):
            ids = cell_ues[c]
            if ids:
                se = radio.spectral_efficiency(rx[ids, c] - noise_floor[c], se_table)
                allocs.append(scheduler.allocate(topo.cell_bandwidth[c], ids, se))
            else:
                allocs.append(scheduler.Allocation.empty(topo.cell_bandwidth[c]))
        total, per_cell, ue_mean, _ = scheduler.network_throughput(allocs)
        active_count = sum(1 for ue in ues if ue.mode == traffic.ACTIVE)
        metrics = StepMetrics(
            time=t,
            total_tput=total,
            per_cell_tput=per_cell,
            per_cell_avail_bw=np.array([a.available_bw for a in allocs]),
            per_cell_active=np.array([len(ids) for ids in cell_ues]),
            active_count=active_count,
            idle_count=cfg.n_ues - active_count,
            per_ue_mean_tput=ue_mean,
            reselection_events=resel_events,
        )
        steps.append(metrics)
        history.append(metrics)

    return EpisodeResult(steps, updates, n_cells, cfg.n_ues, cfg.pri, cfg.udr)


def constant_controller(params: ReselectionParams):
    return lambda obs, interval: params


# ---------------------------------------------------------------------------
# Heuristic reference cache
# ---------------------------------------------------------------------------

def cache_dir(override: str | os.PathLike | None = None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(CACHE_ENV_VAR, DEFAULT_CACHE_DIR)).expanduser()


def reference_fingerprint(cfg: EpisodeConfig, params: ReselectionParams) -> str:
    """Everything that shapes a constant-parameter trajectory (PRI excluded:
    with a constant controller it cannot change the dynamics)."""
    se = cfg.se_table if cfg.se_table is not None else radio.default_se_table()
    doc = {
        "topology": topology_fingerprint(cfg.topology),
        "episode_seed": cfg.episode_seed,
        "n_ues": cfg.n_ues,
        "length": cfg.length,
        "dt": DT,
        "obstruction": cfg.obstruction_enabled,
        "traffic": [cfg.traffic.lambda_idle, cfg.traffic.lambda_active,
                    cfg.traffic.mobility_enabled, cfg.traffic.speed_kmh,
                    cfg.traffic.speed_spread, cfg.traffic.building_weight],
        "se_table": hashlib.sha256(np.ascontiguousarray(se[0]).tobytes()
                                   + np.ascontiguousarray(se[1]).tobytes()).hexdigest(),
        "params": list(params.to_vector()) + [params.t_resel, params.s_intra,
                                              params.s_inter],
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _result_from_arrays(arr: dict[str, np.ndarray], n_ues: int, pri: int,
                        udr: float) -> EpisodeResult:
    steps = []
    for i in range(len(arr["time"])):
        steps.append(StepMetrics(
            time=float(arr["time"][i]),
            total_tput=float(arr["total_tput"][i]),
            per_cell_tput=arr["per_cell_tput"][i],
            per_cell_avail_bw=arr["per_cell_avail_bw"][i],
            per_cell_active=arr["per_cell_active"][i],
            active_count=int(arr["active_count"][i]),
            idle_count=int(arr["idle_count"][i]),
            per_ue_mean_tput=float(arr["per_ue_mean_tput"][i]),
            reselection_events=int(arr["reselection_events"][i]),
        ))
    n_cells = arr["per_cell_tput"].shape[1]
    return EpisodeResult(steps, [], n_cells, n_ues, pri, udr)


def run_heuristic_reference(cfg: EpisodeConfig, params: ReselectionParams,
                            cache: str | os.PathLike | None = None,
                            preset_name: str = "") -> EpisodeResult:
    """Constant-parameter episode, cached on disk per content fingerprint."""
    fp = reference_fingerprint(cfg, params)
    cdir = cache_dir(cache)
    path = cdir / f"ref_{fp}.bin"
    if path.exists():
        try:
            meta, arrays = load_container(path)
        except Exception as exc:
            raise SimError(f"corrupt reference cache {path}: {exc}") from exc
        return _result_from_arrays(arrays, meta["n_ues"], cfg.pri, cfg.udr)
    result = run_episode(cfg, constant_controller(params))
    try:
        cdir.mkdir(parents=True, exist_ok=True)
        meta = {"fingerprint": fp, "n_ues": cfg.n_ues, "preset": preset_name,
                "length": cfg.length}
        save_container(path, meta, result.arrays())
    except OSError as exc:
        raise SimError(f"cannot write reference cache {path}: {exc}") from exc
    return result


def reference_for_length(cfg: EpisodeConfig, params: ReselectionParams,
                         length: float,
                         cache: str | os.PathLike | None = None) -> EpisodeResult:
    """Reference trajectory truncated to `length`.

    A constant-parameter episode's prefix does not depend on the configured
    length (per-UE streams are consumed identically), so one cached run at
    the longest length serves every shorter curriculum round.
    """
    base = run_heuristic_reference(replace(cfg, length=max(length, cfg.length)),
                                   params, cache)
    n = int(round(length / DT))
    if n >= len(base.steps):
        return base
    return EpisodeResult(base.steps[:n], [], base.n_cells, base.n_ues,
                         base.pri, base.udr)


# ---------------------------------------------------------------------------
# CSV dumps
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_trajectory_csv(result: EpisodeResult, path, cell_ids: list[str]) -> None:
    """Per-step trajectory; one wide row per step, cells in id order."""
    cols = ["step", "time", "total_tput", "per_ue_mean_tput", "active",
            "idle", "reselections"]
    cols += [f"tput_{cid}" for cid in cell_ids]
    cols += [f"avail_bw_{cid}" for cid in cell_ids]
    cols += [f"active_{cid}" for cid in cell_ids]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i, m in enumerate(result.steps):
            row = [str(i), _fmt(m.time), _fmt(m.total_tput),
                   _fmt(m.per_ue_mean_tput), str(m.active_count),
                   str(m.idle_count), str(m.reselection_events)]
            row += [_fmt(v) for v in m.per_cell_tput]
            row += [_fmt(v) for v in m.per_cell_avail_bw]
            row += [str(int(v)) for v in m.per_cell_active]
            fh.write(",".join(row) + "\n")


def write_updates_csv(result: EpisodeResult, path,
                      rewards: list | None = None) -> None:
    """Per-update record: parameters applied, clamped fields, and (when
    provided by the caller) the reward breakdown per interval."""
    cols = ["interval", "step", *reselect.PARAM_ORDER, "clamped"]
    if rewards is not None:
        cols += ["r_tput", "r_bal", "r_ue_eff", "r_total"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i, u in enumerate(result.updates):
            row = [str(u.interval), str(u.step)]
            row += [_fmt(getattr(u.params, f)) for f in reselect.PARAM_ORDER]
            row.append("|".join(u.clamped))
            if rewards is not None:
                r = rewards[i]
                row += [_fmt(r.r_tput), _fmt(r.r_bal), _fmt(r.r_ue_eff),
                        _fmt(r.r_total)]
            fh.write(",".join(row) + "\n")
