"""Genetic schedule optimization.

Each candidate genome is scored by: infeasible schedules get infinite cost;
otherwise expected-overlap sets are computed from mean durations, robot
trajectories are fetched from the per-cycle memory or sampled steered against
the overlapping tasks' spatial fields, the makespan is averaged over K
Monte-Carlo draws of human durations, and overlaps are recomputed from realized
trajectory durations until the overlap sets reach a fixed point (or the
iteration cap). The genetic loop seeds with earliest-deadline-first schedules
and evolves them with five mutation operators under elitism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .domain import (Agent, AllocationHistory, PlanResult, ScheduleGenome, Step,
                     StepKind, TaskSet, Trajectory, do, wait)
from .timeline import (check_feasible, diversity_cost, encode_genome,
                       merge_durations)


class MutationOp(Enum):
    SWAP_AGENT = "swap_agent"
    REORDER = "reorder"
    CROSSOVER = "crossover"
    ADD_WAIT = "add_wait"
    REMOVE_WAIT = "remove_wait"


ALL_OPS = tuple(MutationOp)


@dataclass
class GAConfig:
    population: int = 40
    generations: int = 25
    mc_draws: int = 200          # K
    elite_frac: float = 0.25
    mutation_probs: tuple[float, float, float, float, float] = (0.2, 0.2, 0.2, 0.2, 0.2)
    gamma: float = 1.75
    lam: float = 15.0
    fixed_point_cap: int = 5
    init_duration_draws: int = 10

    def __post_init__(self):
        if self.population < 2 or self.generations < 0 or self.mc_draws < 1:
            raise ValueError("population >= 2, generations >= 0, mc_draws >= 1")
        if not (0 < self.elite_frac < 1):
            raise ValueError("elite_frac must be in (0, 1)")
        if len(self.mutation_probs) != len(ALL_OPS) or \
                any(p < 0 or p > 1 for p in self.mutation_probs):
            raise ValueError("need 5 mutation probabilities in [0, 1]")

    def to_jsonable(self) -> dict:
        return {
            "population": self.population, "generations": self.generations,
            "mc_draws": self.mc_draws, "elite_frac": self.elite_frac,
            "mutation_probs": list(self.mutation_probs), "gamma": self.gamma,
            "lam": self.lam, "fixed_point_cap": self.fixed_point_cap,
            "init_duration_draws": self.init_duration_draws,
        }

    @staticmethod
    def from_jsonable(d: Mapping) -> "GAConfig":
        d = dict(d)
        if "mutation_probs" in d:
            d["mutation_probs"] = tuple(d["mutation_probs"])
        return GAConfig(**d)


class TrajectoryMemory:
    """Per-cycle cache: (robot task, canonical overlap set) -> trajectory."""

    def __init__(self):
        self._store: dict[tuple[int, tuple[int, ...]], Trajectory] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(task: int, overlap) -> tuple[int, tuple[int, ...]]:
        return (task, tuple(sorted(overlap)))

    def get(self, task: int, overlap) -> Trajectory | None:
        traj = self._store.get(self.key(task, overlap))
        if traj is None:
            self.misses += 1
        else:
            self.hits += 1
        return traj

    def put(self, task: int, overlap, traj: Trajectory) -> None:
        self._store[self.key(task, overlap)] = traj

    def __len__(self) -> int:
        return len(self._store)


# ---------------------------------------------------------------------------
# EDF seeding
# ---------------------------------------------------------------------------

def precedence_depth(task_set: TaskSet) -> dict[int, int]:
    """Longest successor-chain length per task (deadline ordering key)."""
    succ: dict[int, list[int]] = {t: [] for t in task_set.tasks}
    for i, j in task_set.precedence:
        succ[i].append(j)
    depth: dict[int, int] = {}

    def rec(t):
        if t not in depth:
            depth[t] = 0 if not succ[t] else 1 + max(rec(s) for s in succ[t])
        return depth[t]

    for t in task_set.tasks:
        rec(t)
    return depth


def edf_seed(task_set: TaskSet, temporal, robot_durations_init,
             count: int, rng: np.random.Generator) -> list[ScheduleGenome]:
    """Feasible wait-free seeds: earliest-deadline-first task order (deadline =
    reverse precedence depth, random tie-breaks), random agent assignment.

    Both agents' sequences are subsequences of one topological order, which
    guarantees the timeline never deadlocks. The temporal model and initial
    robot durations are accepted for interface parity but the seeding itself
    is purely structural.
    """
    depth = precedence_depth(task_set)
    deadline = {t: -depth[t] for t in task_set.tasks}
    preds = {t: task_set.predecessors(t) for t in task_set.tasks}
    genomes = []
    for _ in range(count):
        placed: set[int] = set()
        seqs: dict[Agent, list[Step]] = {Agent.HUMAN: [], Agent.ROBOT: []}
        while len(placed) < task_set.n_tasks:
            ready = [t for t in task_set.tasks
                     if t not in placed and preds[t] <= placed]
            ranked = sorted(ready, key=lambda t: (deadline[t], rng.random()))
            nxt = ranked[0]
            agent = Agent.HUMAN if rng.random() < 0.5 else Agent.ROBOT
            seqs[agent].append(do(nxt))
            placed.add(nxt)
        genomes.append(ScheduleGenome(human_seq=tuple(seqs[Agent.HUMAN]),
                                      robot_seq=tuple(seqs[Agent.ROBOT])))
    return genomes


# ---------------------------------------------------------------------------
# Mutation
# ---------------------------------------------------------------------------

def _repair(seq: list[Step]) -> tuple[Step, ...]:
    """Apply the two wait repair rules: no wait targeting the agent's own task,
    no trailing waits."""
    own = {s.task for s in seq if s.kind == StepKind.DO}
    out = [s for s in seq if s.kind == StepKind.DO or s.task not in own]
    while out and out[-1].kind == StepKind.WAIT:
        out.pop()
    return tuple(out)


def mutate(genome: ScheduleGenome, op: MutationOp,
           rng: np.random.Generator) -> ScheduleGenome:
    """One mutation operator plus repair. The child always satisfies the genome
    structural invariants; precedence feasibility is not guaranteed (infeasible
    children are scored infinite)."""
    h = list(genome.human_seq)
    r = list(genome.robot_seq)

    if op == MutationOp.SWAP_AGENT:
        src, dst = (h, r) if rng.random() < 0.5 else (r, h)
        if not any(s.kind == StepKind.DO for s in src):
            src, dst = dst, src
        dos = [i for i, s in enumerate(src) if s.kind == StepKind.DO]
        if not dos:
            return genome
        step = src.pop(dos[int(rng.integers(len(dos)))])
        dst.insert(int(rng.integers(len(dst) + 1)), step)
    elif op == MutationOp.REORDER:
        options = [seq for seq in (h, r) if len(seq) >= 2]
        if not options:
            return genome
        seq = options[int(rng.integers(len(options)))]
        i = int(rng.integers(len(seq)))
        step = seq.pop(i)
        seq.insert(int(rng.integers(len(seq) + 1)), step)
    elif op == MutationOp.CROSSOVER:
        ch = int(rng.integers(len(h) + 1))
        cr = int(rng.integers(len(r) + 1))
        h, r = h[:ch] + r[cr:], r[:cr] + h[ch:]
    elif op == MutationOp.ADD_WAIT:
        agent_first = rng.random() < 0.5
        for seq, other in ((h, r), (r, h)) if agent_first else ((r, h), (h, r)):
            targets = [s.task for s in other if s.kind == StepKind.DO]
            if targets:
                t = targets[int(rng.integers(len(targets)))]
                seq.insert(int(rng.integers(len(seq) + 1)), wait(t))
                break
    elif op == MutationOp.REMOVE_WAIT:
        waits = [(0, i) for i, s in enumerate(h) if s.kind == StepKind.WAIT] + \
                [(1, i) for i, s in enumerate(r) if s.kind == StepKind.WAIT]
        if not waits:
            return genome
        which, idx = waits[int(rng.integers(len(waits)))]
        (h if which == 0 else r).pop(idx)

    return ScheduleGenome(human_seq=_repair(h), robot_seq=_repair(r))


def pick_op(config: GAConfig, rng: np.random.Generator) -> MutationOp:
    p = np.asarray(config.mutation_probs, dtype=np.float64)
    p = p / p.sum()
    return ALL_OPS[int(rng.choice(len(ALL_OPS), p=p))]


# ---------------------------------------------------------------------------
# Evaluation (overlaps, Monte-Carlo makespan, fixed point)
# ---------------------------------------------------------------------------

def _timeline_arrays(genome: ScheduleGenome, task_set: TaskSet,
                     human_durations: Mapping[int, float],
                     robot_durations: Mapping[int, float]):
    dur = merge_durations(genome, human_durations, robot_durations,
                          task_set.n_tasks)
    kh, th, kr, tr = encode_genome(genome)
    start = np.empty(task_set.n_tasks)
    finish = np.empty(task_set.n_tasks)
    status, _ = kernels.simulate(kh, th, kr, tr, task_set.pred_matrix(), dur,
                                 start, finish)
    return status, start, finish


def compute_overlaps(genome: ScheduleGenome, temporal, robot_durations,
                     task_set: TaskSet) -> dict[int, frozenset[int]] | None:
    """Expected concurrency sets from mean human durations; None on deadlock.

    Intervals are half-open, so a boundary touch is not an overlap.
    """
    mu_hat = temporal.mu_hat(genome.do_tasks(Agent.HUMAN))
    status, start, finish = _timeline_arrays(genome, task_set, mu_hat,
                                             robot_durations)
    if status != kernels.SIM_OK:
        return None
    out: dict[int, frozenset[int]] = {}
    for j in genome.do_tasks(Agent.ROBOT):
        over = [i for i in genome.do_tasks(Agent.HUMAN)
                if max(start[i], start[j]) < min(finish[i], finish[j])]
        out[j] = frozenset(over)
    return out


def initial_robot_durations(policy, task_set: TaskSet, rng: np.random.Generator,
                            draws: int = 10) -> dict[int, float]:
    """Mean unsteered sample duration per task, computed once at startup."""
    return {t: policy.mean_duration(t, rng, draws=draws) for t in task_set.tasks}


def evaluate(genome: ScheduleGenome, temporal, fields: Mapping, policy,
             robot_durations_init: Mapping[int, float], memory: TrajectoryMemory,
             history: AllocationHistory, config: GAConfig, task_set: TaskSet,
             rng: np.random.Generator) -> PlanResult:
    """Score one genome (see module docstring); mutates `memory` in place."""
    if not check_feasible(genome, task_set):
        return PlanResult(genome=genome, feasible=False, z=math.inf, z_t=math.inf)

    robot_tasks = genome.do_tasks(Agent.ROBOT)
    human_tasks = genome.do_tasks(Agent.HUMAN)
    overlaps = compute_overlaps(genome, temporal, robot_durations_init, task_set)
    assert overlaps is not None  # feasibility is duration-independent

    kh, th, kr, tr = encode_genome(genome)
    pred = task_set.pred_matrix()
    agent_of = genome.assignment(task_set.n_tasks)
    robot_dur_arr = np.zeros(task_set.n_tasks)

    trajs: dict[int, Trajectory] = {}
    used_overlaps = overlaps
    z_t = math.inf
    converged = False
    for _ in range(config.fixed_point_cap):
        trajs = {}
        for j in robot_tasks:
            cached = memory.get(j, overlaps[j])
            if cached is None:
                flds = [fields[i] for i in sorted(overlaps[j])]
                cached = policy.sample(j, flds, config.gamma, rng)
                memory.put(j, overlaps[j], cached)
            trajs[j] = cached
        used_overlaps = overlaps

        robot_dur = {j: trajs[j].duration for j in robot_tasks}
        for j in robot_tasks:
            robot_dur_arr[j] = robot_dur[j]
        draws = temporal.sample_durations(human_tasks, rng, size=config.mc_draws)
        human_draws = np.zeros((config.mc_draws, task_set.n_tasks))
        for t in human_tasks:
            human_draws[:, t] = draws[t]
        makespans = np.empty(config.mc_draws)
        bad = kernels.mc_makespan(kh, th, kr, tr, pred, agent_of, robot_dur_arr,
                                  human_draws, makespans)
        assert bad == 0
        z_t = float(makespans.mean())

        new_overlaps = compute_overlaps(genome, temporal, robot_dur, task_set)
        if new_overlaps == overlaps:
            converged = True
            break
        overlaps = new_overlaps

    z_s = 0.0
    for j in robot_tasks:
        if used_overlaps[j]:
            z_s += max(fields[i].trajectory_cost(trajs[j])
                       for i in used_overlaps[j])
    z_d = diversity_cost(genome, history)
    z = z_t + config.gamma * z_s + config.lam * z_d
    return PlanResult(genome=genome, robot_trajectories=trajs, z=z, z_t=z_t,
                      z_s=z_s, z_d=z_d, overlaps=dict(used_overlaps),
                      feasible=True, fixed_point_converged=converged)


# ---------------------------------------------------------------------------
# Genetic loop
# ---------------------------------------------------------------------------

def optimize(task_set: TaskSet, temporal, fields: Mapping, policy,
             history: AllocationHistory, config: GAConfig,
             rng: np.random.Generator,
             robot_durations_init: Mapping[int, float] | None = None,
             memory: TrajectoryMemory | None = None,
             trace: list | None = None) -> PlanResult:
    """Seed, evaluate, and evolve for G generations; returns the best plan ever
    evaluated (monotone in generations thanks to elitism)."""
    if robot_durations_init is None:
        robot_durations_init = initial_robot_durations(
            policy, task_set, rng, draws=config.init_duration_draws)
    memory = TrajectoryMemory() if memory is None else memory

    def score(genome):
        return evaluate(genome, temporal, fields, policy, robot_durations_init,
                        memory, history, config, task_set, rng)

    population = edf_seed(task_set, temporal, robot_durations_init,
                          config.population, rng)
    results = [score(g) for g in population]
    best = min(results, key=lambda r: r.z)
    if trace is not None:
        trace.append({"generation": 0, "best_z": _tr(best.z),
                      "gen_best_z": _tr(min(r.z for r in results))})

    n_elite = max(1, math.ceil(config.elite_frac * config.population))
    for gen in range(1, config.generations + 1):
        ranked = sorted(results, key=lambda r: r.z)
        elites = ranked[:n_elite]
        children = []
        while len(elites) + len(children) < config.population:
            parent = elites[int(rng.integers(len(elites)))].genome
            children.append(mutate(parent, pick_op(config, rng), rng))
        child_results = [score(g) for g in children]
        # elites keep their evaluated results; children are fresh
        results = list(elites) + child_results
        gen_best = min(results, key=lambda r: r.z)
        if gen_best.z < best.z:
            best = gen_best
        if trace is not None:
            trace.append({"generation": gen, "best_z": _tr(best.z),
                          "gen_best_z": _tr(gen_best.z)})
    return best


def _tr(x: float):
    return "inf" if math.isinf(x) else round(float(x), 6)
