"""Command-line front end.

Subcommands: gen-topology, train, eval, ablate, compare, report.
Exit codes: 0 success, 1 runtime failure, 2 invalid arguments/config,
3 comparison thresholds not met.

Every run that produces files also writes a manifest.json describing the
inputs (no timestamps, so reruns produce identical manifests).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import policy as pol
from . import simcore, trainer
from .container import ContainerError
from .reselect import PRESETS
from .simcore import SimError
from .topology import (TopologyError, generate_topology, load_topology,
                       save_topology, topology_fingerprint)
from .trainer import (ABLATION_VARIANTS, CurriculumSchedule, TrainRunConfig,
                      TrainerError, derive_seeds, evaluate)

BUNDLED = ("desk", "baseline", "alt", "large")


class CliError(Exception):
    """Bad arguments or configuration (exit code 2)."""


def resolve_topology(arg: str):
    """A bundled name (desk/baseline/alt/large) or a .topo file path."""
    if arg in BUNDLED:
        ref = resources.files("cellpilot.data") / f"{arg}.topo"
        with resources.as_file(ref) as path:
            return load_topology(path)
    path = Path(arg)
    if not path.exists():
        raise CliError(f"topology '{arg}' is neither a bundled preset "
                       f"({', '.join(BUNDLED)}) nor an existing file")
    return load_topology(path)


def parse_weights(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--weights expects three comma-separated values, got '{text}'")
    w = tuple(float(p) for p in parts)
    if abs(sum(w) - 1.0) > 1e-9:
        raise CliError(f"--weights must sum to 1, got {w}")
    return w


def parse_pair(text: str, flag: str) -> tuple[float, float]:
    for sep in ("x", ","):
        if sep in text:
            a, b = text.split(sep, 1)
            return float(a), float(b)
    raise CliError(f"{flag} expects WxH (e.g. 320x240), got '{text}'")


def cache_from_args(args) -> str | None:
    if getattr(args, "cache", None):
        return args.cache
    return os.environ.get(simcore.CACHE_ENV_VAR) or None


def write_manifest(path: Path, command: str, payload: dict) -> None:
    doc = {"tool": "cellpilot", "version": __version__, "command": command}
    doc.update(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_topology(args) -> int:
    overrides = {}
    if args.towers is not None:
        overrides["towers"] = args.towers
    if args.cells is not None:
        overrides["cells"] = args.cells
    if args.area is not None:
        overrides["area"] = parse_pair(args.area, "--area")
    if args.buildings is not None:
        overrides["buildings"] = args.buildings
    if args.streets is not None:
        sx, sy = parse_pair(args.streets, "--streets")
        overrides["streets"] = (int(sx), int(sy))
    topo = generate_topology(args.preset, args.seed, **overrides)
    save_topology(topo, args.output)
    fp = topology_fingerprint(topo)
    print(f"wrote {args.output}: {len(topo.towers)} towers, "
          f"{topo.n_cells} cells, fingerprint {fp[:16]}")
    return 0


def build_train_config(args) -> tuple[TrainRunConfig, CurriculumSchedule]:
    topo = resolve_topology(args.topology)
    cfg = TrainRunConfig(
        topology=topo,
        run_seed=args.run_seed,
        seed_count=args.seeds,
        n_ues=args.ues,
        pri=args.pri,
        weights=parse_weights(args.weights),
        hidden=args.hidden,
        lr=args.lr,
        checkpoint_every=args.checkpoint_every,
        episode_cap=args.episodes,
        jobs=args.jobs,
    )
    schedule = CurriculumSchedule(
        initial_length=args.initial_length,
        increment=args.increment,
        passes_per_round=args.passes,
        rounds=args.rounds,
        lr_halving=not args.no_lr_halving,
    )
    return cfg, schedule


def cmd_train(args) -> int:
    cfg, schedule = build_train_config(args)
    out_dir = Path(args.out)
    cache = cache_from_args(args)
    result = trainer.train(cfg, schedule, out_dir, cache=cache,
                           resume_from=args.resume)
    write_manifest(out_dir / "manifest.json", "train", {
        "topology_fingerprint": topology_fingerprint(cfg.topology),
        "run_seed": cfg.run_seed,
        "seed_count": cfg.seed_count,
        "n_ues": cfg.n_ues,
        "pri": cfg.pri,
        "weights": list(cfg.weights),
        "schedule": {"initial_length": schedule.initial_length,
                     "increment": schedule.increment,
                     "passes_per_round": schedule.passes_per_round,
                     "rounds": schedule.rounds,
                     "lr_halving": schedule.lr_halving},
        "episodes": len(result.log_rows),
        "final_checkpoint": result.final_checkpoint.name,
        "best_checkpoint": result.best_checkpoint.name
        if result.best_checkpoint else None,
        "converged_episode": result.converged_episode,
    })
    last = result.log_rows[-1] if result.log_rows else None
    conv = (f"converged at episode {result.converged_episode}"
            if result.converged_episode else "did not converge")
    if last is not None:
        print(f"trained {last.episode} episodes, final ewma "
              f"{last.ewma:+.4f}, {conv}")
    print(f"final checkpoint: {result.final_checkpoint}")
    if result.best_checkpoint:
        print(f"best checkpoint:  {result.best_checkpoint}")
    return 0


def load_candidate(args):
    """--checkpoint path or --params preset name -> policy net or params."""
    if getattr(args, "checkpoint", None):
        ck = pol.load_checkpoint(args.checkpoint)
        train_seeds = ck.meta.get("loop", {}).get("train_seeds", [])
        return ck.net, [int(s) for s in train_seeds]
    name = getattr(args, "params", None)
    if name is None:
        raise CliError("provide --checkpoint or --params")
    if name not in PRESETS:
        raise CliError(f"unknown preset '{name}' (choose from "
                       f"{', '.join(sorted(PRESETS))})")
    return PRESETS[name], []


def eval_config(args) -> TrainRunConfig:
    topo = resolve_topology(args.topology)
    return TrainRunConfig(topology=topo, run_seed=args.run_seed,
                          n_ues=args.ues, pri=args.pri,
                          mobility_eval=args.mobility,
                          eval_length=args.length, jobs=args.jobs)


def cmd_eval(args) -> int:
    candidate, train_seeds = load_candidate(args)
    cfg = eval_config(args)
    eval_seeds = derive_seeds(cfg.run_seed, trainer.SEED_STREAM_EVAL,
                              args.seeds, exclude=train_seeds)
    report = evaluate(candidate, cfg, eval_seeds, train_seeds,
                      cache=cache_from_args(args), jobs=args.jobs,
                      baseline_preset=args.baseline)
    med = report.medians
    print(f"evaluated {len(report.rows)} seeds "
          f"(n_ues={report.n_ues}, pri={report.pri}, length={report.length:g}s)")
    print(f"median gains vs {args.baseline}: throughput {med['tput_gain']:+.4f}, "
          f"balance {med['bal_gain']:+.4f}, per-UE {med['ue_gain']:+.4f}")
    if args.out:
        trainer.write_eval_csv(report, args.out)
        write_manifest(Path(args.out).with_suffix(".manifest.json"), "eval", {
            "topology_fingerprint": topology_fingerprint(cfg.topology),
            "baseline": args.baseline,
            "seeds": [r.seed for r in report.rows],
            "n_ues": report.n_ues, "pri": report.pri,
            "length": report.length,
            "medians": med,
        })
        print(f"wrote {args.out}")
    return 0


def cmd_ablate(args) -> int:
    cfg, schedule = build_train_config(args)
    out_dir = Path(args.out)
    cache = cache_from_args(args)
    result = trainer.ablate(cfg, schedule, args.variant, out_dir, cache=cache)
    csv_path = out_dir / f"ablation_{args.variant}.csv"
    trainer.write_ablation_csv(result, csv_path)
    med = result.report.medians
    write_manifest(out_dir / "manifest.json", "ablate", {
        "variant": args.variant,
        "topology_fingerprint": topology_fingerprint(cfg.topology),
        "run_seed": cfg.run_seed,
        "medians": med,
    })
    print(f"variant {args.variant}: median gains throughput "
          f"{med['tput_gain']:+.4f}, balance {med['bal_gain']:+.4f}, "
          f"per-UE {med['ue_gain']:+.4f}")
    print(f"wrote {csv_path}")
    return 0


def cmd_compare(args) -> int:
    candidate, train_seeds = load_candidate(args)
    cfg = eval_config(args)
    eval_seeds = derive_seeds(cfg.run_seed, trainer.SEED_STREAM_EVAL,
                              args.seeds, exclude=train_seeds)
    report = evaluate(candidate, cfg, eval_seeds, train_seeds,
                      cache=cache_from_args(args), jobs=args.jobs,
                      baseline_preset=args.baseline)
    med = report.medians
    name = args.checkpoint or args.params
    print(f"{name} vs {args.baseline} on {len(report.rows)} seeds:")
    for r in report.rows:
        print(f"  seed {r.seed}: throughput {r.tput_gain:+.4f}, "
              f"balance {r.bal_gain:+.4f}, per-UE {r.ue_gain:+.4f}")
    print(f"medians: throughput {med['tput_gain']:+.4f}, "
          f"balance {med['bal_gain']:+.4f}, per-UE {med['ue_gain']:+.4f}")
    if args.out:
        trainer.write_eval_csv(report, args.out)
        print(f"wrote {args.out}")
    ok = (med["tput_gain"] >= args.min_tput_gain
          and med["bal_gain"] >= args.min_bal_gain)
    if not ok:
        print(f"FAIL: thresholds not met (need throughput >= "
              f"{args.min_tput_gain:+g}, balance >= {args.min_bal_gain:+g})")
        return 3
    print("PASS: thresholds met")
    return 0


def cmd_report(args) -> int:
    with open(args.input, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if header[:2] == ["episode", "seed"]:
        return _report_training(header, rows)
    if header[0] == "seed":
        return _report_eval(header, rows)
    raise CliError(f"unrecognized report input (header: {','.join(header)})")


def _report_training(header, rows) -> int:
    col = {name: i for i, name in enumerate(header)}
    if not rows:
        print("empty training log")
        return 0
    ewma = [float(r[col["ewma"]]) for r in rows]
    rstd = [float(r[col["rolling_std"]]) for r in rows]
    grad = [float(r[col["grad_norm"]]) for r in rows]
    clamped = sum(int(r[col["clamped"]]) for r in rows)
    conv = None
    for i, (e, s) in enumerate(zip(ewma, rstd)):
        if i + 1 >= 100 and abs(e) < 5e-3 and s < 7e-3:
            conv = i + 1
            break
    print(f"episodes: {len(rows)}")
    print(f"rounds: {sorted(set(int(r[col['round']]) for r in rows))}")
    print(f"final ewma: {ewma[-1]:+.5f} (rolling std {rstd[-1]:.5f})")
    print(f"converged: {'episode %d' % conv if conv else 'no'}")
    print(f"mean grad norm: {float(np.mean(grad)):.4f} "
          f"(max {float(np.max(grad)):.4f})")
    print(f"clamped parameter updates: {clamped}")
    return 0


def _report_eval(header, rows) -> int:
    seeds = [r for r in rows if r[0] not in ("median", "p25", "p75")]
    stats = {r[0]: r[1:] for r in rows if r[0] in ("median", "p25", "p75")}
    print(f"seeds evaluated: {len(seeds)}")
    for name in ("median", "p25", "p75"):
        if name in stats:
            t, b, u = (float(v) for v in stats[name])
            print(f"{name}: throughput {t:+.4f}, balance {b:+.4f}, per-UE {u:+.4f}")
    positive = sum(1 for r in seeds if float(r[1]) > 0)
    print(f"seeds with positive throughput gain: {positive}/{len(seeds)}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def add_train_args(p, include_variant=False):
    p.add_argument("--topology", required=True,
                   help="bundled preset name or .topo file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--run-seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=100,
                   help="training seed count")
    p.add_argument("--ues", type=int, default=500)
    p.add_argument("--pri", type=int, default=1)
    p.add_argument("--weights", default="0.4,0.4,0.2")
    p.add_argument("--hidden", type=int, default=1024)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--episodes", type=int, default=None,
                   help="hard episode cap")
    p.add_argument("--passes", type=int, default=3)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--initial-length", type=float, default=30.0)
    p.add_argument("--increment", type=float, default=10.0)
    p.add_argument("--no-lr-halving", action="store_true")
    p.add_argument("--checkpoint-every", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--cache", default=None,
                   help=f"reference cache dir (or ${simcore.CACHE_ENV_VAR})")
    if include_variant:
        p.add_argument("--variant", required=True, choices=ABLATION_VARIANTS)
    else:
        p.add_argument("--resume", default=None,
                       help="checkpoint to resume from")


def add_eval_args(p):
    p.add_argument("--topology", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--params", default=None,
                   help="preset name to evaluate instead of a checkpoint")
    p.add_argument("--baseline", default="config_b")
    p.add_argument("--run-seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--ues", type=int, default=500)
    p.add_argument("--pri", type=int, default=1)
    p.add_argument("--length", type=float, default=50.0)
    p.add_argument("--mobility", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None, help="per-seed CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellpilot",
        description="Idle-mode reselection simulator and parameter tuner")
    parser.add_argument("--version", action="version",
                        version=f"cellpilot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-topology", help="generate a .topo file")
    p.add_argument("--preset", default="baseline",
                   choices=sorted(BUNDLED))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--towers", type=int, default=None)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--area", default=None, help="WxH in metres")
    p.add_argument("--buildings", type=int, default=None)
    p.add_argument("--streets", default=None, help="NXxNY street counts")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_topology)

    p = sub.add_parser("train", help="train a policy")
    add_train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or preset")
    add_eval_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train + evaluate an ablation variant")
    add_train_args(p, include_variant=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("compare", help="evaluate and check gain thresholds")
    add_eval_args(p)
    p.add_argument("--min-tput-gain", type=float, default=0.0)
    p.add_argument("--min-bal-gain", type=float, default=0.0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarize a training or eval CSV")
    p.add_argument("input")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimError, TrainerError, pol.PolicyError, ContainerError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
