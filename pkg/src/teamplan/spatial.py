"""Per-task spatial cost fields over human paths.

The cost of a workspace point against one observed human trajectory is the
negative exponential of the distance to the trajectory's closest point, so it
lives in (0, 1]. A field holds an independent scalar Gaussian belief over that
cost at every node of a regular grid; observing a new trajectory performs a
conjugate update per node with likelihood variance ``rho``. Queries between
nodes interpolate bilinearly; a robot trajectory's cost is the maximum
interpolated value along its points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .domain import Trajectory

DEFAULT_BETA = 5.0          # distance decay, 1/workspace-units
DEFAULT_RHO = 0.05          # observation noise variance of a single path's cost
DEFAULT_RHO0 = 0.05         # prior variance when seeded from prior observations
DEFAULT_RHO0_UNINFORMED = 0.25  # prior variance with no prior observations

MEAN_FLOOR = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Regular interpolation grid covering the workspace bounds (inclusive)."""

    nx: int = 40
    ny: int = 40
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("degenerate bounds")

    @property
    def step_x(self) -> float:
        return (self.bounds[2] - self.bounds[0]) / (self.nx - 1)

    @property
    def step_y(self) -> float:
        return (self.bounds[3] - self.bounds[1]) / (self.ny - 1)

    def nodes(self) -> np.ndarray:
        """(ny*nx, 2) node coordinates, row-major (iy*nx + ix)."""
        xs = self.bounds[0] + self.step_x * np.arange(self.nx)
        ys = self.bounds[1] + self.step_y * np.arange(self.ny)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def _as_points(traj) -> np.ndarray:
    pts = traj.points if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    if len(pts) == 0:
        raise ValueError("trajectory must be non-empty")
    return pts


def trajectory_point_cost(x, human_traj, beta: float = DEFAULT_BETA) -> float:
    """Cost of workspace point x against one human path: max exp(-beta*dist)."""
    pts = _as_points(human_traj)
    x = np.asarray(x, dtype=np.float64)
    d = np.sqrt(((pts - x[None, :]) ** 2).sum(axis=1))
    return float(np.exp(-beta * d).max())


class SpatialCostField:
    """Gaussian belief per grid node over the true point cost of one task."""

    def __init__(self, task_id: int, spec: GridSpec, mean: np.ndarray,
                 var: np.ndarray, beta: float = DEFAULT_BETA,
                 rho: float = DEFAULT_RHO):
        self.task_id = task_id
        self.spec = spec
        self.mean = np.asarray(mean, dtype=np.float64).reshape(spec.ny, spec.nx)
        self.var = np.asarray(var, dtype=np.float64).reshape(spec.ny, spec.nx)
        self.beta = beta
        self.rho = rho
        if (self.var <= 0).any():
            raise ValueError("variances must be positive")

    def copy(self) -> "SpatialCostField":
        return SpatialCostField(self.task_id, self.spec, self.mean.copy(),
                                self.var.copy(), self.beta, self.rho)

    def observed_costs(self, traj) -> np.ndarray:
        """Point cost of one trajectory at every grid node, shaped (ny, nx)."""
        pts = _as_points(traj)
        out = np.empty(self.spec.ny * self.spec.nx, dtype=np.float64)
        kernels.grid_point_costs(self.spec.nodes(), pts, self.beta, out)
        return out.reshape(self.spec.ny, self.spec.nx)

    def query(self, x) -> float:
        """Bilinearly interpolated mean cost at x (clamped into bounds)."""
        pt = np.asarray(x, dtype=np.float64).reshape(1, 2)
        out = np.empty(1, dtype=np.float64)
        kernels.bilinear(self.mean, self.spec.bounds[0], self.spec.bounds[1],
                         self.spec.step_x, self.spec.step_y,
                         self.spec.nx, self.spec.ny, pt, out)
        return float(out[0])

    def trajectory_cost(self, robot_traj) -> float:
        """Max interpolated cost over every point of the robot trajectory."""
        pts = _as_points(robot_traj)
        out = np.empty(len(pts), dtype=np.float64)
        kernels.bilinear(self.mean, self.spec.bounds[0], self.spec.bounds[1],
                         self.spec.step_x, self.spec.step_y,
                         self.spec.nx, self.spec.ny, pts, out)
        return float(out.max())

    def state_hash(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(self.mean.tobytes())
        h.update(self.var.tobytes())
        return h.hexdigest()[:16]

    def to_jsonable(self) -> dict:
        return {
            "task_id": self.task_id,
            "nx": self.spec.nx,
            "ny": self.spec.ny,
            "bounds": list(self.spec.bounds),
            "beta": self.beta,
            "rho": self.rho,
            "mean": self.mean.ravel().tolist(),
            "var": self.var.ravel().tolist(),
        }

    @staticmethod
    def from_jsonable(d: Mapping) -> "SpatialCostField":
        spec = GridSpec(nx=int(d["nx"]), ny=int(d["ny"]), bounds=tuple(d["bounds"]))
        return SpatialCostField(int(d["task_id"]), spec,
                                np.asarray(d["mean"]), np.asarray(d["var"]),
                                float(d["beta"]), float(d["rho"]))


def init_from_priors(task_id: int, prior_trajs: Sequence, spec: GridSpec | None = None,
                     beta: float = DEFAULT_BETA, rho: float = DEFAULT_RHO,
                     rho0: float = DEFAULT_RHO0,
                     rho0_uninformed: float = DEFAULT_RHO0_UNINFORMED) -> SpatialCostField:
    """Field whose mean averages the point costs of prior observations.

    With no priors the field is uniform at 0.5 with a wider prior variance.
    """
    spec = spec or GridSpec()
    if len(prior_trajs) == 0:
        mean = np.full((spec.ny, spec.nx), 0.5)
        var = np.full((spec.ny, spec.nx), rho0_uninformed)
        return SpatialCostField(task_id, spec, mean, var, beta, rho)
    field = SpatialCostField(task_id, spec, np.full((spec.ny, spec.nx), 0.5),
                             np.full((spec.ny, spec.nx), rho0), beta, rho)
    acc = np.zeros((spec.ny, spec.nx))
    for traj in prior_trajs:
        acc += field.observed_costs(traj)
    field.mean = np.clip(acc / len(prior_trajs), MEAN_FLOOR, 1.0)
    return field


def bayes_update(field: SpatialCostField, observed_traj) -> SpatialCostField:
    """Conjugate per-node update against one newly observed human path."""
    obs = field.observed_costs(observed_traj)
    rho = field.rho
    new_mean = (rho * field.mean + field.var * obs) / (rho + field.var)
    new_var = (field.var * rho) / (field.var + rho)
    new_mean = np.clip(new_mean, MEAN_FLOOR, 1.0)
    return SpatialCostField(field.task_id, field.spec, new_mean, new_var,
                            field.beta, field.rho)
