"""Hot numeric kernels: timeline simulation, Monte-Carlo makespan, grid costs.

Every kernel exists in two flavors: a numba ``@njit``-compiled version and a
pure-numpy fallback. The compiled path is the default; set the environment
variable ``TEAMPLAN_DISABLE_NUMBA=1`` (before import) to force the numpy path,
e.g. on platforms without a working numba install. Both flavors stay importable
(``*_np`` / ``*_nb``) so the test suite can assert parity and the benchmark in
``benchmarks/bench_kernels.py`` can compare them.
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "TEAMPLAN_DISABLE_NUMBA"

USE_NUMBA = os.environ.get(DISABLE_ENV, "0").lower() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

# Step kinds in encoded agent sequences.
KIND_DO = 0
KIND_WAIT = 1

# Status codes returned by the timeline kernel.
SIM_OK = 0
SIM_DEADLOCK = 1


# ---------------------------------------------------------------------------
# Timeline simulation
# ---------------------------------------------------------------------------
#
# Encoding: each agent's sequence is a pair of int arrays (kinds, tasks);
# precedence is an (n, n) bool matrix where pred[i, j] means task i must
# finish before task j starts; dur[t] is the duration of task t under its
# assigned agent. The simulation is a fixpoint: agents advance greedily in
# sequence order, a Do step starts at max(agent free time, predecessor
# finishes), a Wait step releases once its target task has finished. The
# resulting times are the unique least fixpoint, so pass order cannot change
# the answer; a full pass without progress with steps remaining is a deadlock.


def _simulate_impl(kinds_h, tasks_h, kinds_r, tasks_r, pred, dur, start, finish):
    n_h = kinds_h.shape[0]
    n_r = kinds_r.shape[0]
    n = dur.shape[0]
    for t in range(n):
        start[t] = -1.0
        finish[t] = -1.0
    pos_h = 0
    pos_r = 0
    free_h = 0.0
    free_r = 0.0
    progress = True
    while progress:
        progress = False
        for agent in range(2):
            if agent == 0:
                kinds, tasks, npos = kinds_h, tasks_h, n_h
            else:
                kinds, tasks, npos = kinds_r, tasks_r, n_r
            pos = pos_h if agent == 0 else pos_r
            free = free_h if agent == 0 else free_r
            while pos < npos:
                t = tasks[pos]
                if kinds[pos] == KIND_DO:
                    s = free
                    blocked = False
                    for p in range(n):
                        if pred[p, t]:
                            if finish[p] < 0.0:
                                blocked = True
                                break
                            if finish[p] > s:
                                s = finish[p]
                    if blocked:
                        break
                    start[t] = s
                    finish[t] = s + dur[t]
                    free = finish[t]
                    pos += 1
                    progress = True
                else:  # KIND_WAIT
                    if finish[t] < 0.0:
                        break
                    if finish[t] > free:
                        free = finish[t]
                    pos += 1
                    progress = True
            if agent == 0:
                pos_h, free_h = pos, free
            else:
                pos_r, free_r = pos, free
    if pos_h < n_h or pos_r < n_r:
        return SIM_DEADLOCK, 0.0
    makespan = 0.0
    for t in range(n):
        if finish[t] > makespan:
            makespan = finish[t]
    return SIM_OK, makespan


def _mc_makespan_impl(kinds_h, tasks_h, kinds_r, tasks_r, pred, agent_of,
                      robot_dur, human_draws, out):
    """Makespan per Monte-Carlo draw of human durations.

    human_draws is (K, n); out is (K,). Returns the number of deadlocked
    draws (always 0 for feasible genomes: progression depends only on order,
    never on duration values).
    """
    k_draws = human_draws.shape[0]
    n = agent_of.shape[0]
    dur = np.empty(n, dtype=np.float64)
    start = np.empty(n, dtype=np.float64)
    finish = np.empty(n, dtype=np.float64)
    bad = 0
    for k in range(k_draws):
        for t in range(n):
            if agent_of[t] == 0:
                dur[t] = human_draws[k, t]
            else:
                dur[t] = robot_dur[t]
        status, ms = _simulate_impl(kinds_h, tasks_h, kinds_r, tasks_r,
                                    pred, dur, start, finish)
        if status != SIM_OK:
            bad += 1
            out[k] = np.inf
        else:
            out[k] = ms
    return bad


# ---------------------------------------------------------------------------
# Spatial grid kernels
# ---------------------------------------------------------------------------


def _grid_point_costs_impl(grid_xy, traj_xy, beta, out):
    """out[v] = max over trajectory points of exp(-beta * ||traj - grid_v||)."""
    n_v = grid_xy.shape[0]
    n_p = traj_xy.shape[0]
    for v in range(n_v):
        gx = grid_xy[v, 0]
        gy = grid_xy[v, 1]
        best = 0.0
        for p in range(n_p):
            dx = traj_xy[p, 0] - gx
            dy = traj_xy[p, 1] - gy
            c = np.exp(-beta * np.sqrt(dx * dx + dy * dy))
            if c > best:
                best = c
        out[v] = best


def _bilinear_impl(values, x0, y0, step_x, step_y, nx, ny, pts, out):
    """Bilinear interpolation of a row-major (ny, nx) grid at query points.

    Query coordinates are clamped to the grid extent.
    """
    n_p = pts.shape[0]
    for p in range(n_p):
        fx = (pts[p, 0] - x0) / step_x
        fy = (pts[p, 1] - y0) / step_y
        if fx < 0.0:
            fx = 0.0
        if fx > nx - 1.0:
            fx = nx - 1.0
        if fy < 0.0:
            fy = 0.0
        if fy > ny - 1.0:
            fy = ny - 1.0
        ix = int(fx)
        iy = int(fy)
        if ix > nx - 2:
            ix = nx - 2
        if iy > ny - 2:
            iy = ny - 2
        tx = fx - ix
        ty = fy - iy
        v00 = values[iy, ix]
        v10 = values[iy, ix + 1]
        v01 = values[iy + 1, ix]
        v11 = values[iy + 1, ix + 1]
        out[p] = (v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty)
                  + v01 * (1 - tx) * ty + v11 * tx * ty)


def _point_on_segment_impl(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    apx = px - ax
    apy = py - ay
    if apx * aby - apy * abx != 0.0:
        return False
    dot = apx * abx + apy * aby
    return 0.0 <= dot <= abx * abx + aby * aby


def _segments_intersect_impl(p0x, p0y, p1x, p1y, q0x, q0y, q1x, q1y):
    """Proper/improper 2D segment intersection test (degenerate-safe)."""
    d1x = p1x - p0x
    d1y = p1y - p0y
    d2x = q1x - q0x
    d2y = q1y - q0y
    if d1x == 0.0 and d1y == 0.0:
        return _point_on_segment_impl(p0x, p0y, q0x, q0y, q1x, q1y)
    if d2x == 0.0 and d2y == 0.0:
        return _point_on_segment_impl(q0x, q0y, p0x, p0y, p1x, p1y)
    denom = d1x * d2y - d1y * d2x
    rx = q0x - p0x
    ry = q0y - p0y
    if denom == 0.0:
        # parallel: overlap only if collinear
        if rx * d1y - ry * d1x != 0.0:
            return False
        # project onto the dominant axis of the first segment
        if abs(d1x) >= abs(d1y):
            t0 = rx / d1x
            t1 = (rx + d2x) / d1x
        else:
            t0 = ry / d1y
            t1 = (ry + d2y) / d1y
        lo = min(t0, t1)
        hi = max(t0, t1)
        return hi >= 0.0 and lo <= 1.0
    t = (rx * d2y - ry * d2x) / denom
    u = (rx * d1y - ry * d1x) / denom
    return 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0


def _path_hits_walls_impl(pts, walls):
    """True if the polyline pts crosses any wall segment (walls is (W, 4))."""
    n_p = pts.shape[0]
    n_w = walls.shape[0]
    for p in range(n_p - 1):
        for w in range(n_w):
            if _segments_intersect_impl(
                    pts[p, 0], pts[p, 1], pts[p + 1, 0], pts[p + 1, 1],
                    walls[w, 0], walls[w, 1], walls[w, 2], walls[w, 3]):
                return True
    return False


# ---------------------------------------------------------------------------
# Backend selection
# ---------------------------------------------------------------------------

# Pure-python/numpy flavors (the _impl functions are already valid python).
simulate_np = _simulate_impl
mc_makespan_np = _mc_makespan_impl
path_hits_walls_np = _path_hits_walls_impl


def grid_point_costs_np(grid_xy, traj_xy, beta, out):
    d = np.sqrt(((grid_xy[:, None, :] - traj_xy[None, :, :]) ** 2).sum(axis=2))
    np.max(np.exp(-beta * d), axis=1, out=out)


def bilinear_np(values, x0, y0, step_x, step_y, nx, ny, pts, out):
    fx = np.clip((pts[:, 0] - x0) / step_x, 0.0, nx - 1.0)
    fy = np.clip((pts[:, 1] - y0) / step_y, 0.0, ny - 1.0)
    ix = np.minimum(fx.astype(np.int64), nx - 2)
    iy = np.minimum(fy.astype(np.int64), ny - 2)
    tx = fx - ix
    ty = fy - iy
    out[:] = (values[iy, ix] * (1 - tx) * (1 - ty)
              + values[iy, ix + 1] * tx * (1 - ty)
              + values[iy + 1, ix] * (1 - tx) * ty
              + values[iy + 1, ix + 1] * tx * ty)


if USE_NUMBA:
    _simulate_nb = njit(cache=True)(_simulate_impl)
    simulate_nb = _simulate_nb

    def _mc_body(kinds_h, tasks_h, kinds_r, tasks_r, pred, agent_of,
                 robot_dur, human_draws, out):
        k_draws = human_draws.shape[0]
        n = agent_of.shape[0]
        dur = np.empty(n, dtype=np.float64)
        start = np.empty(n, dtype=np.float64)
        finish = np.empty(n, dtype=np.float64)
        bad = 0
        for k in range(k_draws):
            for t in range(n):
                if agent_of[t] == 0:
                    dur[t] = human_draws[k, t]
                else:
                    dur[t] = robot_dur[t]
            status, ms = _simulate_nb(kinds_h, tasks_h, kinds_r, tasks_r,
                                      pred, dur, start, finish)
            if status != SIM_OK:
                bad += 1
                out[k] = np.inf
            else:
                out[k] = ms
        return bad

    mc_makespan_nb = njit(cache=True)(_mc_body)
    grid_point_costs_nb = njit(cache=True)(_grid_point_costs_impl)
    bilinear_nb = njit(cache=True)(_bilinear_impl)
    _point_on_segment_impl = njit(cache=True)(_point_on_segment_impl)
    _segments_intersect_nb = njit(cache=True)(_segments_intersect_impl)

    def _walls_body(pts, walls):
        n_p = pts.shape[0]
        n_w = walls.shape[0]
        for p in range(n_p - 1):
            for w in range(n_w):
                if _segments_intersect_nb(
                        pts[p, 0], pts[p, 1], pts[p + 1, 0], pts[p + 1, 1],
                        walls[w, 0], walls[w, 1], walls[w, 2], walls[w, 3]):
                    return True
        return False

    path_hits_walls_nb = njit(cache=True)(_walls_body)

    simulate = simulate_nb
    mc_makespan = mc_makespan_nb
    grid_point_costs = grid_point_costs_nb
    bilinear = bilinear_nb
    path_hits_walls = path_hits_walls_nb
else:
    simulate = simulate_np
    mc_makespan = mc_makespan_np
    grid_point_costs = grid_point_costs_np
    bilinear = bilinear_np
    path_hits_walls = path_hits_walls_np


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
