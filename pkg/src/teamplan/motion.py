"""Robot motion policies.

DiffusionPolicy is a small trajectory denoising-diffusion model: an MLP
predicts the noise added to flattened (L, 2) paths, conditioned on a sinusoidal
step embedding and a task one-hot. Sampling is ancestral; steering draws N
candidate next-states per denoising step, scores each candidate's
posterior-mean clean-trajectory estimate with the efficiency/proximity value
function, and keeps the argmin. LibraryPolicy serves the same interface from a
bank of demonstrations and doubles as a deterministic oracle for scheduler
tests.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .domain import Trajectory

ARTIFACT_MAGIC = b"TPLC"
ARTIFACT_VERSION = 1

GOAL_SNAP_TOL = 0.04  # completion tolerance applied to sampled paths


@dataclass
class DiffusionConfig:
    diffusion_steps: int = 100  # 50 under-resolves the reverse chain and
                                # collapses route modes; 100 keeps both
    knots: int = 16             # control points diffused per trajectory
    hidden: int = 256
    time_emb: int = 16
    candidates: int = 8         # N for best-of-N steering
    lr: float = 1.5e-3
    batch: int = 128
    train_steps: int = 12000
    val_frac: float = 0.1
    val_every: int = 250
    patience: int = 8           # val checks without improvement before stopping
    seed: int = 0

    def to_jsonable(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_jsonable(d: Mapping) -> "DiffusionConfig":
        return DiffusionConfig(**d)


def cosine_alpha_bar(steps: int, s: float = 0.008) -> np.ndarray:
    """abar[0..steps] with abar[0] = 1, cosine schedule."""
    t = np.arange(steps + 1) / steps
    f = np.cos((t + s) / (1 + s) * np.pi / 2) ** 2
    abar = f / f[0]
    # keep per-step alpha away from 0
    alphas = np.clip(abar[1:] / abar[:-1], 1e-4, 0.9999)
    return np.concatenate([[1.0], np.cumprod(alphas)])


def value(traj: Trajectory, concurrent_fields: Sequence, gamma: float) -> float:
    """Efficiency/proximity tradeoff: duration + gamma * max field cost."""
    v = traj.duration
    if gamma != 0.0 and concurrent_fields:
        v += gamma * max(f.trajectory_cost(traj) for f in concurrent_fields)
    return float(v)


def _time_embedding(t_norm: np.ndarray, dims: int) -> np.ndarray:
    half = dims // 2
    freqs = 2.0 ** np.arange(half) * np.pi
    ang = t_norm[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def subsample_knots(points: np.ndarray, knots: int) -> np.ndarray:
    """Pick `knots` evenly spaced samples (first/last inclusive) of an (L, 2) path."""
    idx = np.round(np.linspace(0, len(points) - 1, knots)).astype(int)
    return points[idx]


def upsample_knots(knots: np.ndarray, length: int) -> np.ndarray:
    """Linear interpolation of (K, 2) knots to a (length, 2) path."""
    k = knots.shape[0]
    pos = np.linspace(0, k - 1, length)
    lo = np.minimum(pos.astype(int), k - 2)
    frac = (pos - lo)[:, None]
    return knots[lo] * (1 - frac) + knots[lo + 1] * frac


# Trajectories are encoded for diffusion as K knots spread uniformly over the
# completion prefix (start..goal) plus one channel holding the completion
# fraction. Keeping the goal-hold tail out of the knots preserves the
# geometric contrast between route modes; timing survives in the extra
# channel.

def encode_trajectory(traj: Trajectory, knots: int) -> np.ndarray:
    prefix = traj.points[:traj.completion_index + 1]
    ks = subsample_knots(prefix, knots)
    comp_frac = traj.completion_index / (len(traj.points) - 1)
    return np.concatenate([ks.ravel(), [comp_frac]])


class _MLP:
    """Two-hidden-layer ReLU regressor with an Adam trainer."""

    def __init__(self, sizes: tuple[int, int, int, int], rng: np.random.Generator):
        d_in, h1, h2, d_out = sizes
        self.sizes = sizes
        self.W1 = rng.normal(0, np.sqrt(2.0 / d_in), (d_in, h1))
        self.b1 = np.zeros(h1)
        self.W2 = rng.normal(0, np.sqrt(2.0 / h1), (h1, h2))
        self.b2 = np.zeros(h2)
        self.W3 = rng.normal(0, np.sqrt(1.0 / h2), (h2, d_out))
        self.b3 = np.zeros(d_out)
        self._adam = None

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h1 = np.maximum(x @ self.W1 + self.b1, 0.0)
        h2 = np.maximum(h1 @ self.W2 + self.b2, 0.0)
        return h2 @ self.W3 + self.b3

    def train_step(self, x: np.ndarray, target: np.ndarray, lr: float,
                   step: int) -> float:
        z1 = x @ self.W1 + self.b1
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ self.W2 + self.b2
        h2 = np.maximum(z2, 0.0)
        out = h2 @ self.W3 + self.b3
        diff = out - target
        loss = float(np.mean(diff ** 2))
        g = 2.0 * diff / diff.size
        dW3 = h2.T @ g
        db3 = g.sum(axis=0)
        g2 = (g @ self.W3.T) * (z2 > 0)
        dW2 = h1.T @ g2
        db2 = g2.sum(axis=0)
        g1 = (g2 @ self.W2.T) * (z1 > 0)
        dW1 = x.T @ g1
        db1 = g1.sum(axis=0)
        self._adam_update([dW1, db1, dW2, db2, dW3, db3], lr, step)
        return loss

    def _adam_update(self, grads, lr, step, b1=0.9, b2=0.999, eps=1e-8):
        if self._adam is None:
            self._adam = [(np.zeros_like(p), np.zeros_like(p)) for p in self.params()]
        for p, (m, v), g in zip(self.params(), self._adam, grads):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** step)
            vhat = v / (1 - b2 ** step)
            p -= lr * mhat / (np.sqrt(vhat) + eps)


class MotionPolicy:
    """Interface: sample(task, concurrent_fields, gamma, rng) -> Trajectory."""

    def sample(self, task, concurrent_fields, gamma, rng) -> Trajectory:
        raise NotImplementedError

    def mean_duration(self, task, rng, draws: int = 10) -> float:
        """Average unsteered sample duration; the scheduler's initial estimate."""
        return float(np.mean([self.sample(task, [], 0.0, rng).duration
                              for _ in range(draws)]))


class DiffusionPolicy(MotionPolicy):
    def __init__(self, net: _MLP, config: DiffusionConfig, goals: np.ndarray,
                 walls: np.ndarray, bounds, dt: float, length: int,
                 fallback: dict[int, np.ndarray], loss_log: list,
                 final_val_loss: float):
        self.net = net
        self.config = config
        self.goals = np.asarray(goals, dtype=np.float64)
        self.walls = np.asarray(walls, dtype=np.float64).reshape(-1, 4)
        self.bounds = tuple(bounds)
        self.dt = dt
        self.length = length
        self.abar = cosine_alpha_bar(config.diffusion_steps)
        self.fallback = {int(t): np.asarray(p) for t, p in fallback.items()}
        self.loss_log = loss_log
        self.final_val_loss = final_val_loss
        self.fallback_count = 0

    @property
    def n_tasks(self) -> int:
        return len(self.goals)

    # -- network plumbing ---------------------------------------------------

    def _denoise(self, x: np.ndarray, t: int, task: int) -> np.ndarray:
        b = x.shape[0]
        t_emb = _time_embedding(np.full(b, t / self.config.diffusion_steps),
                                self.config.time_emb)
        onehot = np.zeros((b, self.n_tasks))
        onehot[:, task] = 1.0
        return self.net.forward(np.concatenate([x, t_emb, onehot], axis=1))

    def _decode(self, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Normalized vectors -> ((B, L, 2) workspace paths, (B,) completion idx)."""
        k = self.config.knots
        knots = (flat[:, :2 * k].reshape(-1, k, 2) + 1.0) / 2.0
        x0, y0, x1, y1 = self.bounds
        knots[..., 0] = x0 + knots[..., 0] * (x1 - x0)
        knots[..., 1] = y0 + knots[..., 1] * (y1 - y0)
        comp_frac = (flat[:, 2 * k] + 1.0) / 2.0
        comps = np.clip(np.round(comp_frac * (self.length - 1)), 4,
                        self.length - 1).astype(int)
        paths = np.empty((len(flat), self.length, 2))
        for i in range(len(flat)):
            c = comps[i]
            paths[i, :c + 1] = upsample_knots(knots[i], c + 1)
            paths[i, c:] = knots[i, -1]
        return paths, comps

    def _completion(self, pts: np.ndarray, task: int) -> int:
        d = np.sqrt(((pts - self.goals[task][None, :]) ** 2).sum(axis=1))
        hits = np.nonzero(d <= GOAL_SNAP_TOL)[0]
        return int(hits[0]) if len(hits) else self.length - 1

    # Wall handling during steering: mid-denoising clean estimates are blurry,
    # and blur systematically fails the narrow middle gap while sparing
    # edge-hugging paths, so penalizing crossings there inverts mode selection.
    # Walls are therefore only enforced once the estimate is crisp (high
    # alpha-bar); crossers then lose to any clean candidate but stay ranked
    # among themselves.
    WALL_PENALTY = 1e6
    WALL_ABAR_MIN = 0.75

    def _score_candidates(self, x0_flat: np.ndarray, task: int, fields,
                          gamma: float, enforce_walls: bool) -> np.ndarray:
        """Value of each candidate clean estimate."""
        ptss, comps = self._decode(x0_flat)
        x0, y0, x1, y1 = self.bounds
        ptss[..., 0] = np.clip(ptss[..., 0], x0, x1)
        ptss[..., 1] = np.clip(ptss[..., 1], y0, y1)
        scores = np.empty(len(ptss))
        for i, pts in enumerate(ptss):
            v = comps[i] * self.dt
            if gamma != 0.0 and fields:
                v += gamma * max(f.trajectory_cost(pts) for f in fields)
            if enforce_walls and len(self.walls) and \
                    kernels.path_hits_walls(pts, self.walls):
                v += self.WALL_PENALTY
            scores[i] = v
        return scores

    # -- sampling -----------------------------------------------------------

    def _ancestral(self, task: int, rng: np.random.Generator,
                   concurrent_fields=(), gamma: float = 0.0,
                   n_candidates: int = 1) -> np.ndarray:
        """One raw sample (normalized flat coords). n_candidates=1 is plain
        ancestral sampling; n>1 applies best-of-N posterior-mean steering at
        every denoising step."""
        if not (0 <= task < self.n_tasks):
            raise ValueError(f"policy was not trained for task {task}")
        steps = self.config.diffusion_steps
        d = 2 * self.config.knots + 1
        abar = self.abar
        x = rng.standard_normal(d)[None, :]
        for t in range(steps, 0, -1):
            eps = self._denoise(x, t, task)
            a_t = abar[t] / abar[t - 1]
            beta_t = 1.0 - a_t
            x0_hat = (x - np.sqrt(1 - abar[t]) * eps) / np.sqrt(abar[t])
            x0_hat = np.clip(x0_hat, -1.8, 1.8)
            mean = (np.sqrt(abar[t - 1]) * beta_t * x0_hat
                    + np.sqrt(a_t) * (1 - abar[t - 1]) * x) / (1 - abar[t])
            if t == 1:
                x = mean
                break
            sigma = np.sqrt((1 - abar[t - 1]) / (1 - abar[t]) * beta_t)
            z = rng.standard_normal((n_candidates, d))
            cands = mean + sigma * z
            if n_candidates == 1:
                x = cands
                continue
            eps2 = self._denoise(cands, t - 1, task)
            pm = (cands - np.sqrt(1 - abar[t - 1]) * eps2) / np.sqrt(abar[t - 1])
            pm = np.clip(pm, -1.8, 1.8)
            scores = self._score_candidates(pm, task, concurrent_fields, gamma,
                                            enforce_walls=abar[t - 1] >= self.WALL_ABAR_MIN)
            best = int(np.argmin(scores))
            x = cands[best:best + 1]
        return x[0]

    def _finalize(self, flat: np.ndarray, task: int) -> Trajectory | None:
        pts, comps = self._decode(flat[None, :])
        pts = pts[0]
        x0, y0, x1, y1 = self.bounds
        pts[:, 0] = np.clip(pts[:, 0], x0, x1)
        pts[:, 1] = np.clip(pts[:, 1], y0, y1)
        goal = self.goals[task]
        d = np.sqrt(((pts - goal[None, :]) ** 2).sum(axis=1))
        hits = np.nonzero(d <= GOAL_SNAP_TOL)[0]
        if len(hits) == 0:
            return None
        comp = int(hits[0])
        pts[comp:] = goal
        if len(self.walls) and kernels.path_hits_walls(pts, self.walls):
            return None
        return Trajectory(points=pts, completion_index=comp, dt=self.dt)

    def sample(self, task, concurrent_fields, gamma, rng,
               n_candidates: int | None = None) -> Trajectory:
        """Steered sample, post-processed (clipped, goal-snapped, wall-checked).

        Retries a few times if post-processing rejects the sample, then falls
        back to a stored demonstration so the collision-free contract holds.
        """
        n = self.config.candidates if n_candidates is None else n_candidates
        for _ in range(4):
            flat = self._ancestral(task, rng, concurrent_fields, gamma, n)
            traj = self._finalize(flat, task)
            if traj is not None:
                return traj
        self.fallback_count += 1
        pts = self.fallback[task].copy()
        comp = self._completion(pts, task)
        return Trajectory(points=pts, completion_index=comp, dt=self.dt)

    def sample_unsteered(self, task, rng) -> Trajectory:
        return self.sample(task, [], 0.0, rng, n_candidates=1)

    def sample_raw_batch(self, task, rng, count: int) -> np.ndarray:
        """Raw unconditional samples in workspace coords (for quality checks)."""
        out = np.empty((count, self.length, 2))
        for i in range(count):
            flat = self._ancestral(task, rng, n_candidates=1)
            out[i] = self._decode(flat[None, :])[0][0]
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        arrays = {
            "W1": self.net.W1, "b1": self.net.b1,
            "W2": self.net.W2, "b2": self.net.b2,
            "W3": self.net.W3, "b3": self.net.b3,
            "goals": self.goals, "walls": self.walls,
        }
        for t, pts in sorted(self.fallback.items()):
            arrays[f"fallback_{t}"] = pts
        header = {
            "version": ARTIFACT_VERSION,
            "config": self.config.to_jsonable(),
            "bounds": list(self.bounds),
            "dt": self.dt,
            "length": self.length,
            "loss_log": self.loss_log,
            "final_val_loss": self.final_val_loss,
            "arrays": {k: list(v.shape) for k, v in arrays.items()},
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(ARTIFACT_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            for k in sorted(arrays):
                f.write(np.ascontiguousarray(arrays[k], dtype=np.float64).tobytes())

    @staticmethod
    def load(path) -> "DiffusionPolicy":
        with open(path, "rb") as f:
            if f.read(4) != ARTIFACT_MAGIC:
                raise ValueError(f"{path} is not a policy artifact")
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen))
            if header["version"] != ARTIFACT_VERSION:
                raise ValueError(f"unsupported artifact version {header['version']}")
            arrays = {}
            for k in sorted(header["arrays"]):
                shape = tuple(header["arrays"][k])
                n = int(np.prod(shape)) if shape else 1
                arrays[k] = np.frombuffer(f.read(8 * n), dtype=np.float64).reshape(shape).copy()
        config = DiffusionConfig.from_jsonable(header["config"])
        d_flat = 2 * config.knots + 1
        d_in = d_flat + config.time_emb + len(arrays["goals"])
        net = _MLP((d_in, config.hidden, config.hidden, d_flat),
                   np.random.default_rng(0))
        net.W1, net.b1 = arrays["W1"], arrays["b1"]
        net.W2, net.b2 = arrays["W2"], arrays["b2"]
        net.W3, net.b3 = arrays["W3"], arrays["b3"]
        fallback = {int(k.split("_")[1]): v for k, v in arrays.items()
                    if k.startswith("fallback_")}
        return DiffusionPolicy(net, config, arrays["goals"], arrays["walls"],
                               tuple(header["bounds"]), header["dt"],
                               header["length"], fallback,
                               header["loss_log"], header["final_val_loss"])


def train(demonstrations: Mapping[int, Sequence[Trajectory]],
          config: DiffusionConfig | None = None,
          goals: np.ndarray | None = None,
          walls: np.ndarray | None = None,
          bounds=(0.0, 0.0, 1.0, 1.0)) -> DiffusionPolicy:
    """Fit the denoiser to demonstrations until held-out loss plateaus."""
    config = config or DiffusionConfig()
    tasks = sorted(demonstrations)
    if tasks != list(range(len(tasks))):
        raise ValueError("demonstrations must cover dense task ids")
    for t in tasks:
        if len(demonstrations[t]) < 20:
            raise ValueError(f"need >= 20 demonstrations for task {t}, "
                             f"got {len(demonstrations[t])}")
    first = demonstrations[tasks[0]][0]
    length, dt = len(first), first.dt
    if goals is None:
        goals = np.array([demonstrations[t][0].points[-1] for t in tasks])
    walls = np.zeros((0, 4)) if walls is None else np.asarray(walls).reshape(-1, 4)

    x0, y0, x1, y1 = bounds
    data, labels = [], []
    for t in tasks:
        for traj in demonstrations[t]:
            if len(traj) != length or traj.dt != dt:
                raise ValueError("demonstrations must share length and dt")
            enc = encode_trajectory(traj, config.knots)
            k2 = 2 * config.knots
            enc[0:k2:2] = (enc[0:k2:2] - x0) / (x1 - x0)
            enc[1:k2:2] = (enc[1:k2:2] - y0) / (y1 - y0)
            data.append(enc * 2.0 - 1.0)
            labels.append(t)
    data = np.asarray(data)
    labels = np.asarray(labels)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(data))
    n_val = max(1, int(len(data) * config.val_frac))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    abar = cosine_alpha_bar(config.diffusion_steps)
    d_flat = 2 * config.knots + 1
    d_in = d_flat + config.time_emb + len(tasks)
    net = _MLP((d_in, config.hidden, config.hidden, d_flat), rng)

    def make_batch(idx, gen):
        sel = idx[gen.integers(0, len(idx), size=config.batch)]
        x0b = data[sel]
        tb = gen.integers(1, config.diffusion_steps + 1, size=config.batch)
        eps = gen.standard_normal((config.batch, d_flat))
        ab = abar[tb][:, None]
        xt = np.sqrt(ab) * x0b + np.sqrt(1 - ab) * eps
        t_emb = _time_embedding(tb / config.diffusion_steps, config.time_emb)
        onehot = np.zeros((config.batch, len(tasks)))
        onehot[np.arange(config.batch), labels[sel]] = 1.0
        return np.concatenate([xt, t_emb, onehot], axis=1), eps

    val_rng = np.random.default_rng(config.seed + 1)
    val_x, val_eps = make_batch(val_idx, val_rng)

    loss_log = []
    best_val = np.inf
    stale = 0
    for step in range(1, config.train_steps + 1):
        bx, beps = make_batch(train_idx, rng)
        loss = net.train_step(bx, beps, config.lr, step)
        if step % config.val_every == 0 or step == config.train_steps:
            val_loss = float(np.mean((net.forward(val_x) - val_eps) ** 2))
            loss_log.append({"step": step, "train": round(loss, 6),
                             "val": round(val_loss, 6)})
            if val_loss < best_val - 1e-4:
                best_val = val_loss
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    fallback = {}
    for t in tasks:
        # a middle-ish and an outside-ish demo would both do; keep the first
        fallback[t] = demonstrations[t][0].points.copy()

    return DiffusionPolicy(net, config, goals, walls, bounds, dt, length,
                           fallback, loss_log, best_val)


class LibraryPolicy(MotionPolicy):
    """Demo-bank policy: best-of-bank selection under the value function.

    With jitter 0 the steered sample is a deterministic function of
    (task, fields, gamma), which makes exhaustive scheduler tests exact.
    """

    def __init__(self, bank: Mapping[int, Sequence[Trajectory]],
                 jitter: float = 0.0):
        self.bank = {int(t): list(trajs) for t, trajs in bank.items()}
        self.jitter = jitter

    def _draw(self, task: int, idx: int, rng) -> Trajectory:
        traj = self.bank[task][idx]
        if self.jitter <= 0 or rng is None:
            return traj
        pts = traj.points + rng.normal(0, self.jitter, traj.points.shape)
        return Trajectory(points=pts, completion_index=traj.completion_index,
                          dt=traj.dt)

    def sample(self, task, concurrent_fields, gamma, rng) -> Trajectory:
        if task not in self.bank:
            raise ValueError(f"no demonstrations for task {task}")
        entries = [self._draw(task, i, rng) for i in range(len(self.bank[task]))]
        if gamma == 0.0 or not concurrent_fields:
            scores = [t.duration for t in entries]
        else:
            scores = [value(t, concurrent_fields, gamma) for t in entries]
        return entries[int(np.argmin(scores))]

    def sample_unsteered(self, task, rng) -> Trajectory:
        idx = int(rng.integers(len(self.bank[task])))
        return self._draw(task, idx, rng)
