"""Shared domain types: tasks, agents, genomes, trajectories, plan results."""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, Optional

import numpy as np


class Agent(IntEnum):
    HUMAN = 0
    ROBOT = 1

    @property
    def other(self) -> "Agent":
        return Agent.ROBOT if self is Agent.HUMAN else Agent.HUMAN


class StepKind(IntEnum):
    DO = 0
    WAIT = 1


@dataclass(frozen=True)
class Step:
    """One genome step: either execute a task or idle until it finishes."""

    kind: StepKind
    task: int

    def __repr__(self) -> str:
        return f"Do({self.task})" if self.kind == StepKind.DO else f"Wait({self.task})"


def do(task: int) -> Step:
    return Step(StepKind.DO, task)


def wait(task: int) -> Step:
    return Step(StepKind.WAIT, task)


class DeadlockError(Exception):
    """Raised when no agent can make progress in the timeline simulation."""


@dataclass(frozen=True)
class TaskSet:
    """Tasks with precedence constraints and goal locations.

    Task ids are dense integers 0..n-1. A precedence pair (i, j) means task i
    must finish before task j starts.
    """

    n_tasks: int
    precedence: frozenset[tuple[int, int]]
    goals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.n_tasks < 1:
            raise ValueError("need at least one task")
        if len(self.goals) != self.n_tasks:
            raise ValueError("goals must cover all tasks")
        for i, j in self.precedence:
            if not (0 <= i < self.n_tasks and 0 <= j < self.n_tasks):
                raise ValueError(f"precedence pair ({i},{j}) references unknown task")
            if i == j:
                raise ValueError(f"self-precedence on task {i}")
        ts = graphlib.TopologicalSorter()
        for t in range(self.n_tasks):
            ts.add(t)
        for i, j in self.precedence:
            ts.add(j, i)
        try:
            ts.prepare()
        except graphlib.CycleError as e:
            raise ValueError("precedence relation is cyclic") from e

    @property
    def tasks(self) -> range:
        return range(self.n_tasks)

    def predecessors(self, task: int) -> frozenset[int]:
        return frozenset(i for i, j in self.precedence if j == task)

    def pred_matrix(self) -> np.ndarray:
        """(n, n) bool matrix; [i, j] true when i must finish before j starts."""
        m = np.zeros((self.n_tasks, self.n_tasks), dtype=np.bool_)
        for i, j in self.precedence:
            m[i, j] = True
        return m

    def goal_array(self) -> np.ndarray:
        return np.asarray(self.goals, dtype=np.float64)

    @staticmethod
    def from_dict(d: Mapping) -> "TaskSet":
        return TaskSet(
            n_tasks=len(d["goals"]),
            precedence=frozenset(tuple(p) for p in d["precedence"]),
            goals=tuple(tuple(g) for g in d["goals"]),
        )

    def to_dict(self) -> dict:
        return {
            "goals": [list(g) for g in self.goals],
            "precedence": sorted([list(p) for p in self.precedence]),
        }


@dataclass(frozen=True)
class ScheduleGenome:
    """Per-agent ordered step sequences; the unit the genetic optimizer evolves."""

    human_seq: tuple[Step, ...]
    robot_seq: tuple[Step, ...]

    def seq(self, agent: Agent) -> tuple[Step, ...]:
        return self.human_seq if agent == Agent.HUMAN else self.robot_seq

    def do_tasks(self, agent: Agent) -> tuple[int, ...]:
        return tuple(s.task for s in self.seq(agent) if s.kind == StepKind.DO)

    def assignment(self, n_tasks: int) -> np.ndarray:
        """agent_of[t] for every task; -1 if a task is missing."""
        agent_of = np.full(n_tasks, -1, dtype=np.int8)
        for agent in (Agent.HUMAN, Agent.ROBOT):
            for t in self.do_tasks(agent):
                if 0 <= t < n_tasks:
                    agent_of[t] = int(agent)
        return agent_of

    def structurally_valid(self, task_set: TaskSet) -> bool:
        """Check genome invariants: exactly-once assignment, wait placement."""
        seen: set[int] = set()
        for agent in (Agent.HUMAN, Agent.ROBOT):
            seq = self.seq(agent)
            if seq and seq[-1].kind == StepKind.WAIT:
                return False
            does = {s.task for s in seq if s.kind == StepKind.DO}
            for s in seq:
                if not (0 <= s.task < task_set.n_tasks):
                    return False
                if s.kind == StepKind.WAIT and s.task in does:
                    return False
            for t in does:
                if t in seen:
                    return False
                seen.add(t)
        return seen == set(task_set.tasks)

    def key(self) -> tuple:
        """Hashable identity for dedup."""
        return (tuple((int(s.kind), s.task) for s in self.human_seq),
                tuple((int(s.kind), s.task) for s in self.robot_seq))

    def to_jsonable(self) -> dict:
        enc = lambda seq: [[("do" if s.kind == StepKind.DO else "wait"), s.task] for s in seq]
        return {"human": enc(self.human_seq), "robot": enc(self.robot_seq)}

    @staticmethod
    def from_jsonable(d: Mapping) -> "ScheduleGenome":
        dec = lambda seq: tuple(
            Step(StepKind.DO if k == "do" else StepKind.WAIT, t) for k, t in seq)
        return ScheduleGenome(dec(d["human"]), dec(d["robot"]))


@dataclass(frozen=True)
class Trajectory:
    """Fixed-length workspace path with the step index at which its task completes."""

    points: np.ndarray  # (L, d) float64, read-only
    completion_index: int
    dt: float

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("points must be a non-empty (L, d) array")
        if not (0 <= self.completion_index < len(pts)):
            raise ValueError("completion_index must index into points")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def duration(self) -> float:
        return self.completion_index * self.dt

    def __len__(self) -> int:
        return len(self.points)

    def to_jsonable(self) -> dict:
        return {
            "points": np.round(self.points, 6).tolist(),
            "completion_index": int(self.completion_index),
            "dt": self.dt,
        }

    @staticmethod
    def from_jsonable(d: Mapping) -> "Trajectory":
        return Trajectory(np.asarray(d["points"], dtype=np.float64),
                          int(d["completion_index"]), float(d["dt"]))


@dataclass
class AllocationHistory:
    """Per-task counts of prior cycles executed by each agent."""

    counts: np.ndarray  # (n_tasks, 2) int64

    @staticmethod
    def empty(n_tasks: int) -> "AllocationHistory":
        return AllocationHistory(np.zeros((n_tasks, 2), dtype=np.int64))

    def record(self, task: int, agent: Agent) -> None:
        self.counts[task, int(agent)] += 1

    def copy(self) -> "AllocationHistory":
        return AllocationHistory(self.counts.copy())

    def to_jsonable(self) -> list:
        return self.counts.tolist()


@dataclass(frozen=True)
class TimelineResult:
    """Start/finish seconds per task plus the makespan."""

    start: np.ndarray
    finish: np.ndarray
    makespan: float

    def interval(self, task: int) -> tuple[float, float]:
        return float(self.start[task]), float(self.finish[task])


@dataclass
class PlanResult:
    """An evaluated schedule: cost decomposition, chosen trajectories, overlaps."""

    genome: ScheduleGenome
    robot_trajectories: dict[int, Trajectory] = field(default_factory=dict)
    z: float = np.inf
    z_t: float = np.inf
    z_s: float = 0.0
    z_d: float = 0.0
    overlaps: dict[int, frozenset[int]] = field(default_factory=dict)
    feasible: bool = False
    fixed_point_converged: bool = True

    def summary(self) -> dict:
        return {
            "genome": self.genome.to_jsonable(),
            "z": _num(self.z),
            "z_t": _num(self.z_t),
            "z_s": _num(self.z_s),
            "z_d": _num(self.z_d),
            "feasible": self.feasible,
            "converged": self.fixed_point_converged,
            "overlaps": {str(j): sorted(c) for j, c in sorted(self.overlaps.items())},
        }


def _num(x: float):
    x = float(x)
    return "inf" if np.isinf(x) else x
