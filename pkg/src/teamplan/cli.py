"""Command-line entry points.

One JSON configuration file feeds every subcommand (sections: world, policy,
run, ablation, serve); command-line flags override file values. Commands
validate their inputs before any side effect and refuse to overwrite existing
outputs unless --force is given. Exit codes: 0 success, 1 runtime failure
(e.g. training did not converge), 2 usage or missing inputs.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("teamplan")

DEFAULT_CONFIG: dict = {
    "world": None,  # path to a world JSON; null uses the packaged fetch world
    "policy": {
        "artifact": "policy.tpz",
        "demos_per_task": 120,
        "max_val_loss": 0.1,
        "config": {},  # DiffusionConfig overrides
    },
    "run": {},          # RunConfig overrides
    "ablation": {
        "trials": 20,
        "archetypes": None,  # null = all four
        "levels": None,      # null = all four
        "workers": None,     # null = one per cpu
    },
    "serve": {
        "host": "127.0.0.1",
        "port": 8766,
        "static_dir": None,
        "cycles": 8,
    },
}


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return merge(DEFAULT_CONFIG, json.loads(p.read_text()))


def _out_path(out_dir: Path, name: str, force: bool) -> Path:
    p = out_dir / name
    if p.exists() and not force:
        raise FileExistsError(f"{p} exists; pass --force to overwrite")
    return p


def _load_world(cfg):
    from .env import WorldSpec
    path = cfg.get("world")
    if path is not None and not Path(path).exists():
        raise FileNotFoundError(f"world file not found: {path}")
    return WorldSpec.load(path)


def _run_config(cfg, seed, out_dir):
    from .loop import RunConfig
    rc = dict(cfg.get("run", {}))
    if seed is not None:
        rc["seed"] = seed
    rc.setdefault("world_path", cfg.get("world"))
    rc.setdefault("policy_path", str(Path(cfg["policy"]["artifact"])))
    return RunConfig.from_jsonable(rc)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_train_policy(cfg, args) -> int:
    from .env import generate_demonstrations
    from .motion import DiffusionConfig, train

    world = _load_world(cfg)
    out_dir = Path(args.out)
    artifact = Path(cfg["policy"]["artifact"])
    if not artifact.is_absolute():
        artifact = out_dir / artifact
    if artifact.exists() and not args.force:
        raise FileExistsError(f"{artifact} exists; pass --force to overwrite")
    metrics_path = _out_path(out_dir, "train_metrics.json", args.force)

    mcfg = DiffusionConfig.from_jsonable(
        {**cfg["policy"].get("config", {}),
         **({"seed": args.seed} if args.seed is not None else {})})
    rng = np.random.default_rng(mcfg.seed)
    demos = generate_demonstrations(world, int(cfg["policy"]["demos_per_task"]), rng)
    log.info("training diffusion policy (%d demos/task)",
             cfg["policy"]["demos_per_task"])
    policy = train(demos, mcfg, goals=np.asarray(world.objects),
                   walls=world.wall_array(), bounds=world.bounds)

    out_dir.mkdir(parents=True, exist_ok=True)
    policy.save(artifact)
    metrics_path.write_text(json.dumps(
        {"final_val_loss": policy.final_val_loss, "loss_log": policy.loss_log},
        indent=2, sort_keys=True))
    print(f"policy -> {artifact} (val loss {policy.final_val_loss:.4f})")
    if policy.final_val_loss > float(cfg["policy"]["max_val_loss"]):
        print(f"training did not converge "
              f"(val {policy.final_val_loss:.4f} > {cfg['policy']['max_val_loss']})",
              file=sys.stderr)
        return 1
    return 0


def _require_artifact(cfg) -> Path:
    artifact = Path(cfg["policy"]["artifact"])
    if not artifact.exists():
        raise FileNotFoundError(
            f"policy artifact not found: {artifact} (run train-policy first)")
    return artifact


def cmd_run(cfg, args) -> int:
    from . import plots
    from .loop import run

    _require_artifact(cfg)
    world = _load_world(cfg)
    out_dir = Path(args.out)
    log_path = _out_path(out_dir, "run.jsonl", args.force)

    config = _run_config(cfg, args.seed, out_dir)
    run_log = run(config, world=world)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path.write_text(run_log.to_jsonl())
    plots.run_cost_chart(run_log, out_dir / "run_cost")
    for t, fj in run_log.final_models.get("spatial", {}).items():
        plots.field_heatmap(fj, out_dir / f"field_task{t}")
    costs = run_log.realized_costs()
    print(f"run -> {log_path} ({len(run_log.cycles)} cycles, "
          f"final realized cost {costs[-1] if costs else 'n/a'})")
    return 0


def cmd_ablation(cfg, args) -> int:
    from . import plots
    from .loop import ADAPTATION_LEVELS, run_ablation_suite

    _require_artifact(cfg)
    _load_world(cfg)
    out_dir = Path(args.out)
    summary_path = _out_path(out_dir, "ablation.json", args.force)

    config = _run_config(cfg, args.seed, out_dir)
    ab = cfg["ablation"]
    results = run_ablation_suite(
        config, trials=int(ab["trials"]),
        archetypes=ab.get("archetypes"),
        levels=ab.get("levels") or ADAPTATION_LEVELS,
        workers=ab.get("workers"))
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path.write_text(json.dumps(results, indent=1, sort_keys=True))
    for cell, data in results["cells"].items():
        arch, level = cell.split("|")
        name = f"cell_{arch}_{level.replace('+', '_')}.json"
        (out_dir / name).write_text(json.dumps(
            {"archetype": arch, "level": level, **data}, sort_keys=True))
    plots.ablation_chart(results, out_dir / "ablation")
    print(f"ablation -> {summary_path} "
          f"({len(results['cells'])} cells, {ab['trials']} trials each)")
    return 0


def cmd_plot(cfg, args) -> int:
    from . import plots
    from .loop import RunLog

    src = Path(args.input)
    if not src.exists():
        raise FileNotFoundError(f"input not found: {src}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if src.suffix == ".jsonl":
        run_log = RunLog.from_jsonl(src.read_text())
        paths = plots.run_cost_chart(run_log, out_dir / f"{src.stem}_cost")
        for t, fj in run_log.final_models.get("spatial", {}).items():
            paths += plots.field_heatmap(fj, out_dir / f"{src.stem}_field{t}")
    else:
        results = json.loads(src.read_text())
        paths = plots.ablation_chart(results, out_dir / f"{src.stem}_chart")
    print("\n".join(str(p) for p in paths))
    return 0


def cmd_replay(cfg, args) -> int:
    from . import plots
    from .loop import RunLog
    from .env import WorldSpec

    src = Path(args.run)
    if not src.exists():
        raise FileNotFoundError(f"run log not found: {src}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_log = RunLog.from_jsonl(src.read_text())
    world = WorldSpec.from_dict(run_log.meta["world"])
    paths = []
    for rec in run_log.cycles:
        paths += plots.replay_cycle(world, rec,
                                    out_dir / f"cycle_{rec['cycle']:03d}")
    paths += plots.run_cost_chart(run_log, out_dir / "cost")
    print(f"replay -> {len(paths)} files in {out_dir}")
    return 0


def cmd_serve(cfg, args) -> int:
    from .serve import serve_forever

    _require_artifact(cfg)
    world = _load_world(cfg)
    config = _run_config(cfg, args.seed, Path(args.out))
    sv = cfg["serve"]
    port = args.port if args.port is not None else int(sv["port"])
    return serve_forever(config, world, host=sv["host"], port=port,
                         static_dir=sv.get("static_dir"),
                         cycles=int(sv.get("cycles", 8)),
                         out_dir=Path(args.out))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teamplan",
        description="Adaptive human-robot team scheduling on the fetch world")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
        p.add_argument("--verbose", action="store_true")

    common(sub.add_parser("train-policy", help="generate demos and fit the policy"))
    common(sub.add_parser("run", help="one multi-cycle adaptation run"))
    common(sub.add_parser("ablation", help="archetypes x adaptation levels suite"))
    p = sub.add_parser("plot", help="charts from a run log or ablation summary")
    common(p)
    p.add_argument("--input", required=True)
    p = sub.add_parser("replay", help="render each cycle of a run log")
    common(p)
    p.add_argument("--run", required=True)
    p = sub.add_parser("serve", help="live play session service")
    common(p)
    p.add_argument("--port", type=int, default=None)
    return parser


COMMANDS = {
    "train-policy": cmd_train_policy,
    "run": cmd_run,
    "ablation": cmd_ablation,
    "plot": cmd_plot,
    "replay": cmd_replay,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (FileNotFoundError, FileExistsError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
