"""Virtual fetch world: geometry, waypoint routing, scripted humans, deployment.

The arena is a unit square split by a wall band at mid-height with three
openings: a middle gap and two outside corridors at the edges. Objects 2 and 3
sit top-center, so reaching them admits two route modes ("middle" through the
gap, "outside" around the nearer corridor); objects 0 and 1 sit directly above
the left/right corridors and have a single natural route. Task trajectories run
from the acting agent's home to the object; the agent then restarts from home
for its next task (returns are not modeled). Precedence requires tasks 2 and 3
to finish before 0 and 1 start.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from . import kernels
from .domain import (Agent, DeadlockError, PlanResult, ScheduleGenome, StepKind,
                     TaskSet, TimelineResult, Trajectory)
from .timeline import simulate_timeline

DT = 0.25       # seconds per trajectory step
TRAJ_LEN = 64   # fixed trajectory length

MIDDLE_GAP_X = 0.5
LEFT_CORRIDOR_X = 0.06
RIGHT_CORRIDOR_X = 0.94
CROSS_Y_LOW = 0.38
CROSS_Y_HIGH = 0.62

# region boxes (x0, y0, x1, y1) used by tests and the ablation metrics
MIDDLE_REGION = (0.44, 0.35, 0.56, 0.65)
LEFT_REGION = (0.0, 0.35, 0.12, 0.65)
RIGHT_REGION = (0.88, 0.35, 1.0, 0.65)


class CycleAborted(Exception):
    """Raised when a live cycle cannot complete (e.g. client disconnect)."""


@dataclass(frozen=True)
class WorldSpec:
    bounds: tuple[float, float, float, float]
    walls: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    objects: tuple[tuple[float, float], ...]
    homes: dict[Agent, tuple[float, float]]
    home_radius: float
    goal_tolerance: float
    robot_speed: float
    human_speed: float
    precedence: frozenset[tuple[int, int]]

    def task_set(self) -> TaskSet:
        return TaskSet(n_tasks=len(self.objects), precedence=self.precedence,
                       goals=self.objects)

    def wall_array(self) -> np.ndarray:
        """(W, 4) array of wall segments for the collision kernel."""
        return np.array([[a[0], a[1], b[0], b[1]] for a, b in self.walls],
                        dtype=np.float64).reshape(-1, 4)

    def to_jsonable(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "walls": [[list(a), list(b)] for a, b in self.walls],
            "objects": [list(o) for o in self.objects],
            "homes": {"human": list(self.homes[Agent.HUMAN]),
                      "robot": list(self.homes[Agent.ROBOT])},
            "home_radius": self.home_radius,
            "goal_tolerance": self.goal_tolerance,
            "robot_speed": self.robot_speed,
            "human_speed": self.human_speed,
            "precedence": sorted([list(p) for p in self.precedence]),
        }

    @staticmethod
    def from_dict(d: Mapping) -> "WorldSpec":
        return WorldSpec(
            bounds=tuple(d["bounds"]),
            walls=tuple((tuple(a), tuple(b)) for a, b in d["walls"]),
            objects=tuple(tuple(o) for o in d["objects"]),
            homes={Agent.HUMAN: tuple(d["homes"]["human"]),
                   Agent.ROBOT: tuple(d["homes"]["robot"])},
            home_radius=float(d["home_radius"]),
            goal_tolerance=float(d["goal_tolerance"]),
            robot_speed=float(d["robot_speed"]),
            human_speed=float(d["human_speed"]),
            precedence=frozenset(tuple(p) for p in d["precedence"]),
        )

    @staticmethod
    def load(path=None) -> "WorldSpec":
        if path is None:
            ref = importlib.resources.files("teamplan.data") / "world_fetch.json"
            return WorldSpec.from_dict(json.loads(ref.read_text()))
        with open(path) as f:
            return WorldSpec.from_dict(json.load(f))


def in_region(point, box) -> bool:
    x0, y0, x1, y1 = box
    return x0 <= point[0] <= x1 and y0 <= point[1] <= y1


def visits_region(points: np.ndarray, box) -> bool:
    x0, y0, x1, y1 = box
    return bool(np.any((points[:, 0] >= x0) & (points[:, 0] <= x1)
                       & (points[:, 1] >= y0) & (points[:, 1] <= y1)))


# ---------------------------------------------------------------------------
# Waypoint routing
# ---------------------------------------------------------------------------

def _outside_x(task: int) -> float:
    # tasks 0 and 2 lean left, 1 and 3 lean right
    return LEFT_CORRIDOR_X if task in (0, 2) else RIGHT_CORRIDOR_X


def route_waypoints(world: WorldSpec, task: int, start, mode: str) -> np.ndarray:
    """Polyline from start to the task object through a corridor.

    mode is "middle" or "outside"; tasks 0/1 are single-mode and always take
    their outside corridor.
    """
    goal = np.asarray(world.objects[task], dtype=np.float64)
    if task in (0, 1):
        cx = _outside_x(task)
    else:
        cx = MIDDLE_GAP_X if mode == "middle" else _outside_x(task)
    wps = [np.asarray(start, dtype=np.float64),
           np.array([cx, CROSS_Y_LOW]),
           np.array([cx, CROSS_Y_HIGH]),
           goal]
    return np.vstack(wps)


def has_two_modes(task: int) -> bool:
    return task in (2, 3)


def _polyline_length(pts: np.ndarray) -> float:
    return float(np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1)).sum())


def _resample(pts: np.ndarray, speed: float, dt: float, length: int) -> np.ndarray:
    """Constant-speed resampling of a polyline, padded at its endpoint."""
    seg = np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0 or len(seg) == 0:
        return np.tile(pts[0], (length, 1))
    out = np.empty((length, pts.shape[1]))
    for k in range(length):
        s = min(k * dt * speed, total)
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, len(seg) - 1)
        t = 0.0 if seg[i] == 0 else (s - cum[i]) / seg[i]
        out[k] = pts[i] * (1 - t) + pts[i + 1] * t
    return out


def route_trajectory(world: WorldSpec, task: int, start, mode: str, speed: float,
                     rng: np.random.Generator | None = None,
                     waypoint_jitter: float = 0.02,
                     point_jitter: float = 0.004,
                     dt: float = DT, length: int = TRAJ_LEN) -> Trajectory:
    """Jittered constant-speed trajectory from start to the task object.

    Jitter is retried with shrinking amplitude until the path clears all
    walls; amplitude zero always clears by construction.
    """
    walls = world.wall_array()
    goal = np.asarray(world.objects[task], dtype=np.float64)
    base = route_waypoints(world, task, start, mode)
    for attempt in range(8):
        shrink = 0.5 ** attempt
        wps = base.copy()
        if rng is not None and waypoint_jitter > 0:
            wps[1:-1] += rng.normal(0.0, waypoint_jitter * shrink, size=wps[1:-1].shape)
        pts = _resample(wps, speed, dt, length)
        if rng is not None and point_jitter > 0:
            noise = rng.normal(0.0, point_jitter * shrink, size=pts.shape)
            # taper noise to zero at both ends so start/goal stay exact
            ramp = np.minimum(np.arange(length), np.arange(length)[::-1]) / max(length / 8, 1)
            pts = pts + noise * np.clip(ramp, 0, 1)[:, None]
        pts[:, 0] = np.clip(pts[:, 0], world.bounds[0], world.bounds[2])
        pts[:, 1] = np.clip(pts[:, 1], world.bounds[1], world.bounds[3])
        if not kernels.path_hits_walls(pts, walls):
            break
        if rng is None:
            raise RuntimeError("unjittered route crosses a wall; bad world geometry")
    comp = _completion_index(pts, goal, world.goal_tolerance)
    pts[comp:] = goal  # hold at the object once reached
    return Trajectory(points=pts, completion_index=comp, dt=dt)


def _completion_index(pts: np.ndarray, goal: np.ndarray, tol: float) -> int:
    d = np.sqrt(((pts - goal[None, :]) ** 2).sum(axis=1))
    hits = np.nonzero(d <= tol)[0]
    return int(hits[0]) if len(hits) else len(pts) - 1


def nominal_route_duration(world: WorldSpec, task: int, agent: Agent,
                           speed: float | None = None, mode: str = "middle") -> float:
    """Duration of the unjittered route at the agent's speed."""
    if speed is None:
        speed = world.human_speed if agent == Agent.HUMAN else world.robot_speed
    pts = route_waypoints(world, task, world.homes[agent], mode)
    steps = math.ceil(_polyline_length(pts) / (speed * DT))
    return min(steps, TRAJ_LEN - 1) * DT


# ---------------------------------------------------------------------------
# Scripted humans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HumanArchetype:
    """Scripted teammate: a speed class and a route class for tasks 2/3."""

    name: str
    speed: float
    route_class: str  # "middle" | "outside"
    speed_jitter: float = 0.035  # sd of log-speed noise per task
    path_jitter: float = 0.02

    def realize_task(self, world: WorldSpec, task: int,
                     rng: np.random.Generator) -> Trajectory:
        speed = self.speed * float(np.exp(rng.normal(0.0, self.speed_jitter)))
        return route_trajectory(world, task, world.homes[Agent.HUMAN],
                                self.route_class, speed, rng,
                                waypoint_jitter=self.path_jitter)


ARCHETYPES = {
    "fast_outside": HumanArchetype("fast_outside", speed=0.34, route_class="outside"),
    "slow_middle": HumanArchetype("slow_middle", speed=0.16, route_class="middle"),
    "fast_middle": HumanArchetype("fast_middle", speed=0.34, route_class="middle"),
    "slow_outside": HumanArchetype("slow_outside", speed=0.16, route_class="outside"),
}


class HumanSource(Protocol):
    def realize_task(self, world: WorldSpec, task: int,
                     rng: np.random.Generator) -> Trajectory: ...


# ---------------------------------------------------------------------------
# Deployment
# ---------------------------------------------------------------------------

@dataclass
class CycleObservation:
    """Everything recorded while co-executing one plan."""

    human_durations: dict[int, float]
    human_trajectories: dict[int, Trajectory]
    robot_trajectories: dict[int, Trajectory]
    makespan: float
    min_distance: float
    start: dict[int, float]
    finish: dict[int, float]

    def summary(self) -> dict:
        return {
            "human_durations": {str(t): round(d, 6) for t, d in
                                sorted(self.human_durations.items())},
            "makespan": round(self.makespan, 6),
            "min_distance": round(self.min_distance, 6),
            "start": {str(t): round(s, 6) for t, s in sorted(self.start.items())},
            "finish": {str(t): round(f, 6) for t, f in sorted(self.finish.items())},
        }


def positions_over_time(trajs: Mapping[int, Trajectory], order: Sequence[int],
                        start: Mapping[int, float], finish: Mapping[int, float],
                        rest: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Agent position at each query time: along the active task's trajectory,
    else parked where the previous task left it (initially at rest)."""
    out = np.tile(rest, (len(times), 1))
    events = sorted(order, key=lambda t: start[t])
    for t in events:
        traj = trajs[t]
        active = (times >= start[t]) & (times < finish[t])
        idx = np.minimum(((times[active] - start[t]) / traj.dt).astype(int),
                         len(traj.points) - 1)
        out[active] = traj.points[idx]
        after = times >= finish[t]
        out[after] = traj.points[min(traj.completion_index, len(traj.points) - 1)]
    return out


def deploy(plan: PlanResult, human_source, world: WorldSpec,
           rng: np.random.Generator) -> CycleObservation:
    """Co-execute a plan against a human source and record observations.

    Archetype sources realize each human task up front (scripted humans do not
    react to the robot); the realized timeline then honors waits and
    precedence. Live sources drive their own co-execution and may raise
    CycleAborted.
    """
    if hasattr(human_source, "run_cycle"):
        return human_source.run_cycle(plan, world)
    if not plan.feasible:
        raise ValueError("cannot deploy an infeasible plan")
    task_set = world.task_set()
    genome = plan.genome

    human_trajs: dict[int, Trajectory] = {}
    human_durs: dict[int, float] = {}
    for t in genome.do_tasks(Agent.HUMAN):
        traj = human_source.realize_task(world, t, rng)
        human_trajs[t] = traj
        human_durs[t] = traj.duration

    robot_trajs = {t: plan.robot_trajectories[t] for t in genome.do_tasks(Agent.ROBOT)}
    robot_durs = {t: traj.duration for t, traj in robot_trajs.items()}

    tl = simulate_timeline(genome, human_durs, robot_durs, task_set)
    start = {t: float(tl.start[t]) for t in task_set.tasks}
    finish = {t: float(tl.finish[t]) for t in task_set.tasks}

    times = np.arange(0.0, tl.makespan + DT, DT)
    hp = positions_over_time(human_trajs, genome.do_tasks(Agent.HUMAN),
                             start, finish,
                             np.asarray(world.homes[Agent.HUMAN]), times)
    rp = positions_over_time(robot_trajs, genome.do_tasks(Agent.ROBOT),
                             start, finish,
                             np.asarray(world.homes[Agent.ROBOT]), times)
    min_dist = float(np.sqrt(((hp - rp) ** 2).sum(axis=1)).min()) if len(times) else math.inf

    return CycleObservation(human_durations=human_durs,
                            human_trajectories=human_trajs,
                            robot_trajectories=robot_trajs,
                            makespan=float(tl.makespan),
                            min_distance=min_dist,
                            start=start, finish=finish)


# ---------------------------------------------------------------------------
# Demonstrations and priors
# ---------------------------------------------------------------------------

def generate_demonstrations(world: WorldSpec, per_task: int,
                            rng: np.random.Generator,
                            agent: Agent = Agent.ROBOT,
                            speed: float | None = None) -> dict[int, list[Trajectory]]:
    """Waypoint-routed, jittered trajectories per task for policy training.

    Tasks with two route modes get an even middle/outside split.
    """
    if per_task < 20:
        raise ValueError("need at least 20 demonstrations per task")
    if speed is None:
        speed = world.robot_speed if agent == Agent.ROBOT else world.human_speed
    start = world.homes[agent]
    demos: dict[int, list[Trajectory]] = {}
    for task in world.task_set().tasks:
        trajs = []
        for k in range(per_task):
            if has_two_modes(task):
                mode = "middle" if k % 2 == 0 else "outside"
            else:
                mode = "outside"
            trajs.append(route_trajectory(world, task, start, mode, speed, rng))
        demos[task] = trajs
    return demos


def prior_human_paths(world: WorldSpec, per_task: int,
                      rng: np.random.Generator) -> dict[int, list[Trajectory]]:
    """Population-level human paths used to seed the spatial fields."""
    out: dict[int, list[Trajectory]] = {}
    for task in world.task_set().tasks:
        trajs = []
        for k in range(per_task):
            mode = "middle" if (has_two_modes(task) and k % 2 == 0) else "outside"
            trajs.append(route_trajectory(world, task, world.homes[Agent.HUMAN],
                                          mode, world.human_speed, rng))
        out[task] = trajs
    return out


def nominal_human_durations(world: WorldSpec) -> dict[int, float]:
    """Scripted nominal walk-times used as temporal prior means."""
    out = {}
    for task in world.task_set().tasks:
        mode = "middle" if has_two_modes(task) else "outside"
        out[task] = nominal_route_duration(world, task, Agent.HUMAN, mode=mode)
    return out
