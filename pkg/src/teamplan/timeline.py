"""Schedule timeline semantics: event simulation, feasibility, diversity cost.

Each agent executes its genome sequence in order. A Do step starts once the
agent is free and every precedence predecessor has finished; a Wait step
releases once its target task finishes. Times are the unique least fixpoint of
these rules, so results are deterministic; where an event *order* is needed
(e.g. when replaying a timeline) ties are broken by (time, human first,
task id ascending).
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from . import kernels
from .domain import (Agent, AllocationHistory, DeadlockError, ScheduleGenome,
                     StepKind, TaskSet, TimelineResult)


def encode_genome(genome: ScheduleGenome) -> tuple[np.ndarray, ...]:
    """Genome as flat arrays for the simulation kernels."""
    kh = np.array([int(s.kind) for s in genome.human_seq], dtype=np.int8)
    th = np.array([s.task for s in genome.human_seq], dtype=np.int64)
    kr = np.array([int(s.kind) for s in genome.robot_seq], dtype=np.int8)
    tr = np.array([s.task for s in genome.robot_seq], dtype=np.int64)
    return kh, th, kr, tr


def merge_durations(genome: ScheduleGenome, human_durations: Mapping[int, float],
                    robot_durations: Mapping[int, float], n_tasks: int) -> np.ndarray:
    dur = np.zeros(n_tasks, dtype=np.float64)
    for t in genome.do_tasks(Agent.HUMAN):
        dur[t] = human_durations[t]
    for t in genome.do_tasks(Agent.ROBOT):
        dur[t] = robot_durations[t]
    return dur


def simulate_timeline(genome: ScheduleGenome, human_durations: Mapping[int, float],
                      robot_durations: Mapping[int, float],
                      task_set: TaskSet) -> TimelineResult:
    """Per-task start/finish times and makespan for a valid genome.

    Raises ValueError if the genome violates its invariants or durations are
    missing/negative, DeadlockError if no agent can progress.
    """
    if not genome.structurally_valid(task_set):
        raise ValueError("genome violates structural invariants")
    for t in genome.do_tasks(Agent.HUMAN):
        if t not in human_durations or human_durations[t] < 0:
            raise ValueError(f"missing/negative human duration for task {t}")
    for t in genome.do_tasks(Agent.ROBOT):
        if t not in robot_durations or robot_durations[t] < 0:
            raise ValueError(f"missing/negative robot duration for task {t}")

    dur = merge_durations(genome, human_durations, robot_durations, task_set.n_tasks)
    kh, th, kr, tr = encode_genome(genome)
    start = np.empty(task_set.n_tasks, dtype=np.float64)
    finish = np.empty(task_set.n_tasks, dtype=np.float64)
    status, makespan = kernels.simulate(kh, th, kr, tr, task_set.pred_matrix(),
                                        dur, start, finish)
    if status == kernels.SIM_DEADLOCK:
        raise DeadlockError("no agent can progress")
    return TimelineResult(start=start, finish=finish, makespan=float(makespan))


def check_feasible(genome: ScheduleGenome, task_set: TaskSet) -> bool:
    """True iff the genome is structurally valid and never deadlocks.

    Deadlock is duration-independent (progression depends only on step order
    and precedence), so a unit-duration simulation decides it for all draws.
    """
    if not genome.structurally_valid(task_set):
        return False
    unit = {t: 1.0 for t in task_set.tasks}
    try:
        simulate_timeline(genome, unit, unit, task_set)
    except DeadlockError:
        return False
    return True


def diversity_cost(genome: ScheduleGenome, history: AllocationHistory) -> float:
    """Absolute deviation of per-task allocation counts from an even split.

    Counts include the candidate assignment of the genome being scored; adding
    the same constant to both agents of a task leaves the cost unchanged.
    """
    counts = history.counts.astype(np.float64).copy()
    n_tasks = counts.shape[0]
    for agent in (Agent.HUMAN, Agent.ROBOT):
        for t in genome.do_tasks(agent):
            counts[t, int(agent)] += 1.0
    per_task_mean = counts.mean(axis=1, keepdims=True)
    return float(np.abs(per_task_mean - counts).sum() / (2.0 * n_tasks))
