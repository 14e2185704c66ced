"""Multi-cycle adaptation: plan, deploy, update models, repeat.

Each cycle resets the trajectory memory, optimizes a schedule under the
current models (with the diversity weight active only for the first half of
the cycles), deploys it against the human, then updates the temporal and/or
spatial models from the observations according to the configured adaptation
level.

Reported per-cycle cost: the model-predicted cost depends on which variant's
beliefs produced it, so adaptation levels cannot be compared on it (a frozen,
optimistic model yields flattering numbers). The ablation therefore aggregates
the *realized* cost of each deployed plan: realized makespan plus gamma times
the realized proximity cost measured against the human paths actually walked
that cycle, diversity excluded. Both quantities are logged.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .domain import Agent, AllocationHistory, PlanResult
from .env import (ARCHETYPES, CycleAborted, CycleObservation, WorldSpec, deploy,
                  nominal_human_durations, prior_human_paths)
from .motion import DiffusionPolicy
from .scheduler import GAConfig, TrajectoryMemory, initial_robot_durations, optimize
from .spatial import (DEFAULT_BETA, DEFAULT_RHO, DEFAULT_RHO0, GridSpec,
                      SpatialCostField, bayes_update, init_from_priors,
                      trajectory_point_cost)
from .temporal import TemporalModel, prior_from_nominal

ADAPTATION_LEVELS = ("space+time", "space", "time", "none")


@dataclass
class RunConfig:
    cycles: int = 16
    adaptation: str = "space+time"
    ga: GAConfig = field(default_factory=GAConfig)
    lam: float = 15.0
    lam_cutoff: int | None = None     # cycle index where lambda drops to 0
    archetype: str = "slow_middle"    # name from env.ARCHETYPES, or "live"
    seed: int = 0
    prior_paths: int = 4              # population-level paths per task for field init
    grid_nx: int = 40
    grid_ny: int = 40
    beta_s: float = DEFAULT_BETA
    rho: float = DEFAULT_RHO
    rho0: float = DEFAULT_RHO0
    temporal_rel_sd: float = 0.25
    world_path: str | None = None
    policy_path: str | None = None

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.adaptation not in ADAPTATION_LEVELS:
            raise ValueError(f"adaptation must be one of {ADAPTATION_LEVELS}")
        cut = self.cutoff
        if not (0 <= cut <= self.cycles):
            raise ValueError("lam_cutoff must lie within the run")
        if self.archetype != "live" and self.archetype not in ARCHETYPES:
            raise ValueError(f"unknown archetype {self.archetype!r}")

    @property
    def cutoff(self) -> int:
        return self.cycles // 2 if self.lam_cutoff is None else self.lam_cutoff

    def to_jsonable(self) -> dict:
        d = dataclasses.asdict(self)
        d["ga"] = self.ga.to_jsonable()
        return d

    @staticmethod
    def from_jsonable(d: Mapping) -> "RunConfig":
        d = dict(d)
        if "ga" in d:
            d["ga"] = GAConfig.from_jsonable(d["ga"])
        return RunConfig(**d)


@dataclass
class RunLog:
    meta: dict
    cycles: list[dict]
    final_models: dict

    def to_jsonl(self, include_timings: bool = True) -> str:
        lines = [json.dumps({"meta": self.meta}, sort_keys=True)]
        for rec in self.cycles:
            rec = dict(rec)
            if not include_timings:
                rec.pop("timings", None)
            lines.append(json.dumps(rec, sort_keys=True))
        lines.append(json.dumps({"final_models": self.final_models},
                                sort_keys=True))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "RunLog":
        lines = [json.loads(l) for l in text.strip().splitlines()]
        meta = lines[0]["meta"]
        final = lines[-1].get("final_models", {})
        return RunLog(meta=meta, cycles=lines[1:-1], final_models=final)

    def realized_costs(self) -> list[float]:
        return [rec["realized"]["cost"] for rec in self.cycles]


def realized_proximity_cost(obs: CycleObservation, beta: float) -> float:
    """Ground-truth analogue of the spatial objective: per robot task, the max
    point cost of its executed path against the human trajectories it actually
    ran concurrently with (half-open intervals), summed over robot tasks."""
    total = 0.0
    for j, rtraj in obs.robot_trajectories.items():
        concurrent = [i for i in obs.human_trajectories
                      if max(obs.start[i], obs.start[j])
                      < min(obs.finish[i], obs.finish[j])]
        if not concurrent:
            continue
        total += max(
            max(trajectory_point_cost(x, obs.human_trajectories[i], beta)
                for x in rtraj.points)
            for i in concurrent)
    return total


def _models_snapshot(temporal: TemporalModel,
                     fields: Mapping[int, SpatialCostField]) -> dict:
    return {
        "temporal": temporal.state_hash(),
        "spatial": {str(t): fields[t].state_hash() for t in sorted(fields)},
    }


def build_initial_models(config: RunConfig, world: WorldSpec,
                         rng: np.random.Generator):
    """Spatial fields from population-level prior paths; temporal priors from
    scripted nominal walk-times."""
    task_set = world.task_set()
    spec = GridSpec(nx=config.grid_nx, ny=config.grid_ny, bounds=world.bounds)
    priors = prior_human_paths(world, config.prior_paths, rng) \
        if config.prior_paths > 0 else {t: [] for t in task_set.tasks}
    fields = {t: init_from_priors(t, priors[t], spec, beta=config.beta_s,
                                  rho=config.rho, rho0=config.rho0)
              for t in task_set.tasks}
    noms = nominal_human_durations(world)
    temporal = TemporalModel({t: prior_from_nominal(noms[t], config.temporal_rel_sd)
                              for t in task_set.tasks})
    return temporal, fields


def run(config: RunConfig, policy: DiffusionPolicy | None = None,
        world: WorldSpec | None = None, human_source=None,
        on_cycle=None) -> RunLog:
    """Execute the full multi-cycle loop and return the log.

    on_cycle(record, temporal, fields) fires after each cycle's models are
    updated (the live service uses it to push fresh model views to the client).
    """
    world = world or WorldSpec.load(config.world_path)
    if policy is None:
        if not config.policy_path:
            raise FileNotFoundError("no policy artifact configured")
        policy = DiffusionPolicy.load(config.policy_path)
    if human_source is None:
        if config.archetype == "live":
            raise ValueError("live runs need an explicit human source")
        human_source = ARCHETYPES[config.archetype]

    task_set = world.task_set()
    init_rng = np.random.default_rng([config.seed, 10_001])
    temporal, fields = build_initial_models(config, world, init_rng)
    d_init = initial_robot_durations(policy, task_set, init_rng,
                                     draws=config.ga.init_duration_draws)
    history = AllocationHistory.empty(task_set.n_tasks)

    meta = {
        "config": config.to_jsonable(),
        "world": world.to_jsonable(),
        "initial_models": _models_snapshot(temporal, fields),
        "robot_durations_init": {str(t): round(v, 6) for t, v in
                                 sorted(d_init.items())},
    }
    records = []
    for cycle in range(config.cycles):
        lam = config.lam if cycle < config.cutoff else 0.0
        ga = dataclasses.replace(config.ga, lam=lam)
        opt_rng = np.random.default_rng([config.seed, cycle, 0])
        dep_rng = np.random.default_rng([config.seed, cycle, 1])

        t0 = time.perf_counter()
        trace: list = []
        plan = optimize(task_set, temporal, fields, policy, history, ga,
                        opt_rng, robot_durations_init=d_init,
                        memory=TrajectoryMemory(), trace=trace)
        t_opt = time.perf_counter() - t0

        t0 = time.perf_counter()
        try:
            obs = deploy(plan, human_source, world, dep_rng)
        except CycleAborted as e:
            records.append({"cycle": cycle, "lam": lam, "aborted": str(e),
                            "plan": plan.summary(),
                            "models": _models_snapshot(temporal, fields),
                            "timings": {"optimize_s": round(t_opt, 3)}})
            if on_cycle is not None:
                on_cycle(records[-1], temporal, fields)
            continue
        t_dep = time.perf_counter() - t0

        for agent in (Agent.HUMAN, Agent.ROBOT):
            for t in plan.genome.do_tasks(agent):
                history.record(t, agent)

        if config.adaptation in ("space+time", "time"):
            for t, d in obs.human_durations.items():
                temporal = temporal.update(t, d)
        if config.adaptation in ("space+time", "space"):
            for t, traj in obs.human_trajectories.items():
                fields[t] = bayes_update(fields[t], traj)

        realized_zs = realized_proximity_cost(obs, config.beta_s)
        records.append({
            "cycle": cycle,
            "lam": lam,
            "plan": plan.summary(),
            "planned_cost_lam0": _round(plan.z_t + ga.gamma * plan.z_s),
            "observation": obs.summary(),
            "realized": {
                "makespan": _round(obs.makespan),
                "z_s": _round(realized_zs),
                "cost": _round(obs.makespan + ga.gamma * realized_zs),
            },
            "human_paths": {str(t): np.round(tr.points, 4).tolist()
                            for t, tr in sorted(obs.human_trajectories.items())},
            "robot_paths": {str(t): np.round(tr.points, 4).tolist()
                            for t, tr in sorted(obs.robot_trajectories.items())},
            "models": _models_snapshot(temporal, fields),
            "ga_trace": trace,
            "timings": {"optimize_s": round(t_opt, 3),
                        "deploy_s": round(t_dep, 3)},
        })
        if on_cycle is not None:
            on_cycle(records[-1], temporal, fields)

    final_models = {
        "temporal": temporal.to_jsonable(),
        "spatial": {str(t): fields[t].to_jsonable() for t in sorted(fields)},
        "history": history.to_jsonable(),
    }
    return RunLog(meta=meta, cycles=records, final_models=final_models)


def _round(x: float):
    return "inf" if math.isinf(x) else round(float(x), 6)


# ---------------------------------------------------------------------------
# Ablation suite
# ---------------------------------------------------------------------------

_WORKER_POLICY: dict[str, DiffusionPolicy] = {}


def _trial_seed(base_seed: int, archetype: str, level: str, trial: int) -> int:
    key = f"{base_seed}|{archetype}|{level}|{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "big")


def _run_trial(args) -> tuple[str, str, int, list[float]]:
    base_cfg, archetype, level, trial = args
    config = RunConfig.from_jsonable(base_cfg)
    config = dataclasses.replace(
        config, archetype=archetype, adaptation=level,
        seed=_trial_seed(config.seed, archetype, level, trial))
    policy = _WORKER_POLICY.get(config.policy_path)
    if policy is None:
        policy = DiffusionPolicy.load(config.policy_path)
        _WORKER_POLICY[config.policy_path] = policy
    log = run(config, policy=policy)
    return archetype, level, trial, log.realized_costs()


def run_ablation_suite(base_config: RunConfig, trials: int,
                       archetypes: Sequence[str] | None = None,
                       levels: Sequence[str] = ADAPTATION_LEVELS,
                       workers: int | None = None) -> dict:
    """Archetypes x adaptation levels x trials; per-cycle median/IQR of the
    realized plan cost, plus the pooled median over each trial's final three
    cycles (the headline comparison number)."""
    archetypes = list(archetypes or ARCHETYPES)
    jobs = [(base_config.to_jsonable(), a, l, k)
            for a in archetypes for l in levels for k in range(trials)]
    results: dict[tuple[str, str], dict[int, list[float]]] = {
        (a, l): {} for a in archetypes for l in levels}
    if workers is None or workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for a, l, k, costs in pool.map(_run_trial, jobs, chunksize=1):
                results[(a, l)][k] = costs
    else:
        for job in jobs:
            a, l, k, costs = _run_trial(job)
            results[(a, l)][k] = costs

    cells = {}
    for (a, l), per_trial in results.items():
        mat = np.array([per_trial[k] for k in sorted(per_trial)])  # trials x cycles
        cells[f"{a}|{l}"] = {
            "median": np.median(mat, axis=0).round(6).tolist(),
            "q1": np.quantile(mat, 0.25, axis=0).round(6).tolist(),
            "q3": np.quantile(mat, 0.75, axis=0).round(6).tolist(),
            "final3_median": float(np.median(mat[:, -3:])),
            "trials": mat.round(6).tolist(),
        }
    return {
        "protocol": {"archetypes": archetypes, "levels": list(levels),
                     "trials": trials, "cycles": base_config.cycles,
                     "metric": "realized makespan + gamma * realized proximity",
                     "lam_cutoff": base_config.cutoff,
                     "gamma": base_config.ga.gamma,
                     "lam": base_config.lam,
                     "seed": base_config.seed},
        "cells": cells,
    }
