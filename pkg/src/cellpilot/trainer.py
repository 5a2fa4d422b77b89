"""Training orchestration: seed derivation and shuffling, the episode-length
curriculum with learning-rate halving, REINFORCE updates against per-seed
baselines, convergence monitoring, periodic + best checkpointing, and
deterministic evaluation against the heuristic reference.

All randomness flows from run_seed through fixed SeedSequence streams
(train/eval/validation seed sets and the trainer's own sampling RNG), so
a checkpoint restores enough state to reproduce the remaining training
trajectory bit-exactly.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import policy as pol
from . import rlenv, simcore
from .reselect import PRESETS, ReselectionParams
from .rlenv import BaselineTable, compute_reward, interval_aggregates, map_action
from .simcore import EpisodeConfig
from .topology import Topology
from .traffic import TrafficConfig

SEED_STREAM_TRAIN = 0
SEED_STREAM_EVAL = 1
SEED_STREAM_VALIDATION = 2
SEED_STREAM_TRAINER = 3

ABLATION_VARIANTS = ("no_curriculum", "seeds_500", "mobility_eval",
                     "stress_test", "slow_updates", "synchronous_updates")

EVAL_EPS = 1.0  # bit/s guard in gain ratios


class TrainerError(Exception):
    pass


def derive_seeds(run_seed: int, stream: int, count: int,
                 exclude=()) -> list[int]:
    """Deterministic seed set i -> SeedSequence([run_seed, stream, i]),
    skipping any seed already used elsewhere (keeps sets disjoint)."""
    seeds: list[int] = []
    seen = set(exclude)
    i = 0
    while len(seeds) < count:
        s = int(np.random.SeedSequence([run_seed, stream, i]).generate_state(1)[0])
        i += 1
        if s in seen:
            continue
        seen.add(s)
        seeds.append(s)
    return seeds


@dataclass(frozen=True)
class CurriculumSchedule:
    initial_length: float = 30.0   # s
    increment: float = 10.0        # s added per round
    passes_per_round: int = 3      # shuffled passes over the seed set
    rounds: int = 3
    lr_halving: bool = True

    def lengths(self) -> list[float]:
        return [self.initial_length + self.increment * r for r in range(self.rounds)]

    @property
    def final_length(self) -> float:
        return self.lengths()[-1]

    def validate(self) -> None:
        if self.rounds < 1 or self.passes_per_round < 1:
            raise ValueError("rounds and passes_per_round must be >= 1")
        if self.initial_length <= 0 or self.increment < 0:
            raise ValueError("episode lengths must be positive and non-decreasing")


@dataclass
class TrainRunConfig:
    topology: Topology
    run_seed: int = 0
    seed_count: int = 100
    eval_seed_count: int = 20
    validation_seed_count: int = 3
    n_ues: int = 500
    pri: int = 1
    weights: tuple[float, float, float] = (0.4, 0.4, 0.2)
    baseline_window: int = 2
    hidden: int = 1024
    history_k: int = 10
    lr: float = 1e-4
    weight_decay: float = 1e-4
    clip: float = 10.0
    checkpoint_every: int = 50
    convergence_eps: float = 5e-3
    convergence_std: float = 7e-3
    convergence_window: int = 100
    obstruction_train: bool = False   # obstruction loss disabled while training
    obstruction_eval: bool = True
    mobility_train: bool = False
    mobility_eval: bool = False
    preset: str = "config_b"
    return_mode: str = "immediate"    # or "return_to_go"
    stop_on_convergence: bool = False
    episode_cap: int | None = None
    eval_length: float | None = None  # None -> curriculum final length
    jobs: int = 1

    def validate(self) -> None:
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"reward weights must sum to 1, got {self.weights}")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset '{self.preset}'")
        if self.return_mode not in ("immediate", "return_to_go"):
            raise ValueError(f"unknown return_mode '{self.return_mode}'")
        if self.pri < 1:
            raise ValueError("pri must be >= 1")

    def episode_cfg(self, seed: int, length: float, *, train: bool,
                    pri: int | None = None, n_ues: int | None = None,
                    mobility: bool | None = None) -> EpisodeConfig:
        if mobility is None:
            mobility = self.mobility_train if train else self.mobility_eval
        return EpisodeConfig(
            topology=self.topology,
            episode_seed=seed,
            n_ues=n_ues if n_ues is not None else self.n_ues,
            length=length,
            pri=pri if pri is not None else self.pri,
            traffic=TrafficConfig(mobility_enabled=mobility),
            obstruction_enabled=self.obstruction_train if train else self.obstruction_eval,
            history_k=self.history_k,
        )


@dataclass
class ConvergenceMonitor:
    """EWMA of the normalized episode reward plus a rolling std window."""
    alpha: float = 0.2
    window: int = 100
    eps: float = 5e-3
    std_threshold: float = 7e-3
    ewma: float | None = None
    recent: deque = field(default_factory=deque)

    def update(self, value: float) -> tuple[float, float]:
        self.ewma = value if self.ewma is None else \
            self.alpha * value + (1.0 - self.alpha) * self.ewma
        self.recent.append(value)
        while len(self.recent) > self.window:
            self.recent.popleft()
        return self.ewma, self.rolling_std()

    def rolling_std(self) -> float:
        if len(self.recent) < 2:
            return float("inf")
        return float(np.std(np.array(self.recent)))

    def converged(self) -> bool:
        return (self.ewma is not None and abs(self.ewma) < self.eps
                and len(self.recent) >= self.window
                and self.rolling_std() < self.std_threshold)

    def state(self) -> dict:
        return {"ewma": self.ewma, "recent": [float(v) for v in self.recent]}

    def restore(self, st: dict) -> None:
        self.ewma = st["ewma"]
        self.recent = deque(st["recent"])


@dataclass
class TrainLogRow:
    episode: int
    seed: int
    round: int
    pass_index: int
    lr: float
    length: float
    r_total: float
    r_tput: float
    r_bal: float
    r_ue_eff: float
    grad_norm: float
    clamped: int
    ewma: float
    rolling_std: float


LOG_COLUMNS = ("episode", "seed", "round", "pass_index", "lr", "length",
               "r_total", "r_tput", "r_bal", "r_ue_eff", "grad_norm",
               "clamped", "ewma", "rolling_std")


def write_training_log(rows: list[TrainLogRow], path, append: bool = False) -> None:
    mode = "a" if append and Path(path).exists() else "w"
    with open(path, mode, newline="") as fh:
        if mode == "w":
            fh.write(",".join(LOG_COLUMNS) + "\n")
        for r in rows:
            vals = [getattr(r, c) for c in LOG_COLUMNS]
            fh.write(",".join(
                str(v) if isinstance(v, int) else f"{v:.17g}" for v in vals) + "\n")


@dataclass
class TrainResult:
    out_dir: Path
    final_checkpoint: Path
    best_checkpoint: Path | None
    log_rows: list[TrainLogRow]
    converged_episode: int | None
    train_seeds: list[int]
    validation_seeds: list[int]


def _mean_action_controller(net: pol.PolicyNet):
    def controller(obs, interval):
        mu, sigma_raw, _ = pol.forward(net, obs)
        return map_action(np.concatenate([mu, sigma_raw]))
    return controller


def _reference(ep: EpisodeConfig, params: ReselectionParams, length: float,
               max_length: float, cache) -> simcore.EpisodeResult:
    return simcore.reference_for_length(
        replace(ep, length=max(max_length, length)), params, length, cache)


def _train_episode(net, opt, baselines, cfg: TrainRunConfig, seed: int,
                   length: float, max_length: float, rng, cache,
                   preset_params: ReselectionParams):
    ep = cfg.episode_cfg(seed=seed, length=length, train=True)
    ref = _reference(ep, preset_params, length, max_length, cache)
    baselines.seed_reference(seed, interval_aggregates(ref.steps, ep.pri))

    records: list[tuple[np.ndarray, np.ndarray, int]] = []

    def controller(obs, interval):
        mu, sigma_raw, _ = pol.forward(net, obs)
        action, _ = pol.sample_action(mu, sigma_raw, rng)
        records.append((obs, action, interval))
        return map_action(action)

    result = simcore.run_episode(ep, controller)
    aggs = interval_aggregates(result.steps, ep.pri)
    rewards = [compute_reward(a, baselines, seed, cfg.weights, ep.n_ues)
               for a in aggs]
    totals = [r.r_total for r in rewards]
    if cfg.return_mode == "return_to_go":
        credit = list(np.cumsum(totals[::-1])[::-1])
    else:
        credit = totals
    grad_records = [(obs, action, credit[interval])
                    for obs, action, interval in records]
    grads = pol.reinforce_backward(net, grad_records)
    grad_norm = pol.apply_update(net, opt, grads)
    rlenv.update_baselines(baselines, seed, aggs)
    clamped = sum(len(u.clamped) for u in result.updates)
    return {
        "r_total": float(np.mean(totals)),
        "r_tput": float(np.mean([r.r_tput for r in rewards])),
        "r_bal": float(np.mean([r.r_bal for r in rewards])),
        "r_ue_eff": float(np.mean([r.r_ue_eff for r in rewards])),
        "grad_norm": grad_norm,
        "clamped": clamped,
    }


def _save_state(path, net, opt, baselines, rng, cfg: TrainRunConfig,
                schedule: CurriculumSchedule, loop: dict) -> None:
    extra = {
        "loop": loop,
        "schedule": {"initial_length": schedule.initial_length,
                     "increment": schedule.increment,
                     "passes_per_round": schedule.passes_per_round,
                     "rounds": schedule.rounds,
                     "lr_halving": schedule.lr_halving},
        "config": {"run_seed": cfg.run_seed, "seed_count": cfg.seed_count,
                   "n_ues": cfg.n_ues, "pri": cfg.pri,
                   "weights": list(cfg.weights),
                   "baseline_window": cfg.baseline_window,
                   "hidden": cfg.hidden, "history_k": cfg.history_k,
                   "lr": cfg.lr, "preset": cfg.preset,
                   "return_mode": cfg.return_mode},
    }
    pol.save_checkpoint(path, net, opt, baselines, rng.bit_generator.state, extra)


def train(cfg: TrainRunConfig, schedule: CurriculumSchedule,
          out_dir, cache=None, resume_from=None) -> TrainResult:
    cfg.validate()
    schedule.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    topo = cfg.topology
    obs_dim = rlenv.observation_dim(topo.n_cells, cfg.history_k)
    preset_params = PRESETS[cfg.preset]
    train_seeds = derive_seeds(cfg.run_seed, SEED_STREAM_TRAIN, cfg.seed_count)
    val_seeds = derive_seeds(cfg.run_seed, SEED_STREAM_VALIDATION,
                             cfg.validation_seed_count, exclude=train_seeds)
    lengths = schedule.lengths()
    eval_length = cfg.eval_length if cfg.eval_length is not None else schedule.final_length
    max_length = max(max(lengths), eval_length)
    monitor = ConvergenceMonitor(window=cfg.convergence_window,
                                 eps=cfg.convergence_eps,
                                 std_threshold=cfg.convergence_std)

    if resume_from is not None:
        ck = pol.load_checkpoint(resume_from)
        net, opt, baselines = ck.net, ck.opt, ck.baselines
        if net.obs_dim != obs_dim or net.hidden != cfg.hidden:
            raise TrainerError(
                f"checkpoint network ({net.obs_dim}x{net.hidden}) does not match "
                f"config ({obs_dim}x{cfg.hidden})")
        rng = np.random.default_rng()
        rng.bit_generator.state = ck.rng_state
        loop = ck.meta["loop"]
        monitor.restore(loop["monitor"])
        round_idx = loop["round"]
        pass_idx = loop["pass"]
        pos = loop["pos"]
        seed_order = list(loop["seed_order"]) if loop["seed_order"] is not None else None
        episode = loop["episode"]
        best_score = loop["best_score"]
        converged_at = loop["converged_at"]
        # normalize a boundary checkpoint to the next pass/round
        if seed_order is not None and pos >= len(seed_order):
            seed_order = None
            pos = 0
            pass_idx += 1
            if pass_idx >= schedule.passes_per_round:
                pass_idx = 0
                round_idx += 1
    else:
        net = pol.init_policy(obs_dim, cfg.hidden, seed=cfg.run_seed)
        pol.warm_start(net, preset_params)
        opt = pol.init_optimizer(net, cfg.lr, cfg.weight_decay, cfg.clip)
        baselines = BaselineTable(cfg.baseline_window)
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.run_seed, SEED_STREAM_TRAINER]))
        round_idx = pass_idx = pos = 0
        seed_order = None
        episode = 0
        best_score = None
        converged_at = None

    rows: list[TrainLogRow] = []
    best_path = out_dir / "ckpt_best.bin"
    have_best = best_path.exists() and best_score is not None
    last_good = str(resume_from) if resume_from else None
    stop = False

    def loop_state() -> dict:
        return {"round": round_idx, "pass": pass_idx, "pos": pos + 1,
                "seed_order": seed_order, "episode": episode,
                "monitor": monitor.state(), "best_score": best_score,
                "converged_at": converged_at,
                "train_seeds": train_seeds, "val_seeds": val_seeds}

    while round_idx < schedule.rounds and not stop:
        length = lengths[round_idx]
        opt.lr = cfg.lr / (2 ** round_idx) if schedule.lr_halving else cfg.lr
        while pass_idx < schedule.passes_per_round and not stop:
            if seed_order is None:
                seed_order = [int(s) for s in rng.permutation(train_seeds)]
                pos = 0
            while pos < len(seed_order) and not stop:
                seed = seed_order[pos]
                try:
                    stats = _train_episode(net, opt, baselines, cfg, seed,
                                           length, max_length, rng, cache,
                                           preset_params)
                except pol.PolicyError as exc:
                    raise TrainerError(
                        f"aborting at episode {episode + 1}: {exc}; "
                        f"last good checkpoint: {last_good}") from exc
                episode += 1
                ewma, rstd = monitor.update(stats["r_total"])
                if converged_at is None and monitor.converged():
                    converged_at = episode
                rows.append(TrainLogRow(
                    episode=episode, seed=seed, round=round_idx,
                    pass_index=pass_idx, lr=opt.lr, length=length,
                    r_total=stats["r_total"], r_tput=stats["r_tput"],
                    r_bal=stats["r_bal"], r_ue_eff=stats["r_ue_eff"],
                    grad_norm=stats["grad_norm"], clamped=stats["clamped"],
                    ewma=ewma, rolling_std=rstd))
                if episode % cfg.checkpoint_every == 0:
                    ck_path = out_dir / f"ckpt_ep{episode:06d}.bin"
                    _save_state(ck_path, net, opt, baselines, rng, cfg,
                                schedule, loop_state())
                    last_good = str(ck_path)
                    score = validation_score(net, cfg, val_seeds, eval_length,
                                             max_length, cache, preset_params)
                    if best_score is None or score > best_score:
                        best_score = score
                        _save_state(best_path, net, opt, baselines, rng, cfg,
                                    schedule, loop_state())
                        have_best = True
                if cfg.episode_cap is not None and episode >= cfg.episode_cap:
                    stop = True
                if cfg.stop_on_convergence and converged_at is not None:
                    stop = True
                pos += 1
            if pos >= len(seed_order):
                seed_order = None
                pass_idx += 1
        if pass_idx >= schedule.passes_per_round:
            pass_idx = 0
            round_idx += 1

    pos = max(pos - 1, 0)  # loop_state stores the next position
    final_path = out_dir / "ckpt_final.bin"
    _save_state(final_path, net, opt, baselines, rng, cfg, schedule,
                {"round": round_idx, "pass": pass_idx, "pos": pos + 1,
                 "seed_order": seed_order, "episode": episode,
                 "monitor": monitor.state(), "best_score": best_score,
                 "converged_at": converged_at,
                 "train_seeds": train_seeds, "val_seeds": val_seeds})
    score = validation_score(net, cfg, val_seeds, eval_length, max_length,
                             cache, preset_params)
    if best_score is None or score > best_score:
        best_score = score
        _save_state(best_path, net, opt, baselines, rng, cfg, schedule,
                    {"round": round_idx, "pass": pass_idx, "pos": pos + 1,
                     "seed_order": seed_order, "episode": episode,
                     "monitor": monitor.state(), "best_score": best_score,
                     "converged_at": converged_at,
                     "train_seeds": train_seeds, "val_seeds": val_seeds})
        have_best = True
    write_training_log(rows, out_dir / "training_log.csv",
                       append=resume_from is not None)
    return TrainResult(out_dir, final_path, best_path if have_best else None,
                       rows, converged_at, train_seeds, val_seeds)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    seed: int
    tput_gain: float
    bal_gain: float
    ue_gain: float


@dataclass
class EvalReport:
    rows: list[EvalRow]
    medians: dict[str, float]
    p25: dict[str, float]
    p75: dict[str, float]
    n_ues: int
    pri: int
    length: float

    @classmethod
    def from_rows(cls, rows, n_ues, pri, length) -> "EvalReport":
        def stats(key):
            vals = np.array([getattr(r, key) for r in rows])
            return (float(np.median(vals)), float(np.percentile(vals, 25)),
                    float(np.percentile(vals, 75)))
        med, p25, p75 = {}, {}, {}
        for key in ("tput_gain", "bal_gain", "ue_gain"):
            med[key], p25[key], p75[key] = stats(key)
        return cls(list(rows), med, p25, p75, n_ues, pri, length)


def _gain_ratio(agent: float, ref: float) -> float:
    return max(agent, EVAL_EPS) / max(ref, EVAL_EPS) - 1.0


def _eval_one(args) -> EvalRow:
    (net_or_params, ep, baseline_params, max_length, cache) = args
    ref = _reference(ep, baseline_params, ep.length, max_length, cache)
    if isinstance(net_or_params, ReselectionParams):
        controller = simcore.constant_controller(net_or_params)
    else:
        controller = _mean_action_controller(net_or_params)
    agent = simcore.run_episode(ep, controller)
    a = agent.arrays()
    r = ref.arrays()
    tput_gain = _gain_ratio(float(a["total_tput"].mean()),
                            float(r["total_tput"].mean()))
    sig_a = float(a["per_cell_tput"].std(axis=1).mean())
    sig_r = float(r["per_cell_tput"].std(axis=1).mean())
    bal_gain = _gain_ratio(sig_r, sig_a)  # lower spread is better
    ue_gain = _gain_ratio(float(a["per_ue_mean_tput"].mean()),
                          float(r["per_ue_mean_tput"].mean()))
    return EvalRow(ep.episode_seed, tput_gain, bal_gain, ue_gain)


def evaluate(net_or_params, cfg: TrainRunConfig, eval_seeds: list[int],
             train_seeds: list[int], *, length: float | None = None,
             pri: int | None = None, n_ues: int | None = None,
             mobility: bool | None = None, cache=None, jobs: int = 1,
             baseline_preset: str = "config_b") -> EvalReport:
    """Deterministic mean-action rollouts on unseen seeds; per-seed relative
    gains against the heuristic reference. Refuses seeds seen in training."""
    overlap = sorted(set(eval_seeds) & set(train_seeds))
    if overlap:
        raise TrainerError(
            f"evaluation seeds overlap training seeds: {overlap[:5]}"
            + ("..." if len(overlap) > 5 else ""))
    schedule_final = length if length is not None else \
        (cfg.eval_length if cfg.eval_length is not None else 50.0)
    baseline_params = PRESETS[baseline_preset]
    eps = [cfg.episode_cfg(seed=s, length=schedule_final, train=False, pri=pri,
                           n_ues=n_ues, mobility=mobility) for s in eval_seeds]
    max_length = max(schedule_final, 50.0)
    args = [(net_or_params, ep, baseline_params, max_length, cache) for ep in eps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_eval_one, args))
    else:
        rows = [_eval_one(a) for a in args]
    first = eps[0]
    return EvalReport.from_rows(rows, first.n_ues, first.pri, first.length)


def validation_score(net, cfg: TrainRunConfig, val_seeds: list[int],
                     length: float, max_length: float, cache,
                     preset_params: ReselectionParams) -> float:
    """Mean weighted gain on the held-out validation seeds (no mutation)."""
    total = 0.0
    for s in val_seeds:
        ep = cfg.episode_cfg(seed=s, length=length, train=False)
        row = _eval_one((net, ep, preset_params, max_length, cache))
        w1, w2, w3 = cfg.weights
        total += w1 * row.tput_gain + w2 * row.bal_gain + w3 * row.ue_gain
    return total / len(val_seeds)


def write_eval_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("seed,tput_gain,bal_gain,ue_gain\n")
        for r in report.rows:
            fh.write(f"{r.seed},{r.tput_gain:.17g},{r.bal_gain:.17g},"
                     f"{r.ue_gain:.17g}\n")
        for name, d in (("median", report.medians), ("p25", report.p25),
                        ("p75", report.p75)):
            fh.write(f"{name},{d['tput_gain']:.17g},{d['bal_gain']:.17g},"
                     f"{d['ue_gain']:.17g}\n")


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------

def ablation_config(cfg: TrainRunConfig, schedule: CurriculumSchedule,
                    variant: str):
    """(variant cfg, variant schedule, eval overrides) with exactly one
    deviation from the base configuration."""
    eval_overrides: dict = {}
    cfg2, schedule2 = cfg, schedule
    if variant == "no_curriculum":
        schedule2 = replace(schedule, initial_length=schedule.final_length,
                            increment=0.0)
    elif variant == "seeds_500":
        cfg2 = replace(cfg, seed_count=500)
    elif variant == "mobility_eval":
        cfg2 = replace(cfg, mobility_eval=True)
    elif variant == "stress_test":
        eval_overrides["pri"] = 10
    elif variant == "slow_updates":
        cfg2 = replace(cfg, pri=10)
    elif variant == "synchronous_updates":
        cfg2 = replace(cfg, pri=5, weights=(0.025, 0.95, 0.025),
                       baseline_window=10)
    else:
        raise TrainerError(
            f"unknown ablation variant '{variant}' (choose from "
            f"{', '.join(ABLATION_VARIANTS)})")
    return cfg2, schedule2, eval_overrides


@dataclass
class AblationResult:
    variant: str
    train: TrainResult
    report: EvalReport
    base_report: EvalReport | None


def ablate(cfg: TrainRunConfig, schedule: CurriculumSchedule, variant: str,
           out_dir, cache=None,
           base_report: EvalReport | None = None) -> AblationResult:
    cfg2, schedule2, eval_overrides = ablation_config(cfg, schedule, variant)
    result = train(cfg2, schedule2, out_dir, cache=cache)
    ck = pol.load_checkpoint(result.final_checkpoint)
    eval_seeds = derive_seeds(cfg2.run_seed, SEED_STREAM_EVAL,
                              cfg2.eval_seed_count, exclude=result.train_seeds)
    report = evaluate(ck.net, cfg2, eval_seeds, result.train_seeds,
                      cache=cache, jobs=cfg2.jobs, **eval_overrides)
    return AblationResult(variant, result, report, base_report)


def write_ablation_csv(result: AblationResult, path) -> None:
    base = {r.seed: r for r in result.base_report.rows} if result.base_report else {}
    with open(path, "w", newline="") as fh:
        fh.write("seed,variant_tput_gain,variant_bal_gain,variant_ue_gain,"
                 "base_tput_gain,base_bal_gain,base_ue_gain\n")
        for r in result.report.rows:
            b = base.get(r.seed)
            bvals = (f"{b.tput_gain:.17g},{b.bal_gain:.17g},{b.ue_gain:.17g}"
                     if b else ",,")
            fh.write(f"{r.seed},{r.tput_gain:.17g},{r.bal_gain:.17g},"
                     f"{r.ue_gain:.17g},{bvals}\n")
