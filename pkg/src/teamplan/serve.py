"""Live play session service.

One browser (or scripted) client per session, speaking newline-free JSON
frames over a WebSocket; non-upgrade HTTP requests are served from the static
frontend bundle. Frame types:

  client -> server: hello {name}, ready {}, human_move {x, y, t}
  server -> client: hello {protocol, world, cycles}
                    start_cycle {cycle, plan, human_steps, robot_steps}
                    state_tick {t, robot, robot_task, human_task, next_human_task,
                                human_gate: waiting|go|active|done}
                    human_task_event {task, event: start|finish, t}
                    cycle_complete {cycle, costs, heatmaps, durations, aborted}
                    error {code, message}

The simulation clock is driven by the client's human_move timestamps, which
the play client streams at a fixed rate even while idle; the server is
authoritative for task events (start = leaving the home region once gated,
finish = entering the object's capture region) and for all model updates. A
mid-cycle disconnect aborts the cycle (no model update) and the next cycle
waits for a reconnect.
"""

from __future__ import annotations

import asyncio
import http
import json
import math
import mimetypes
import queue
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import Agent, StepKind, Trajectory
from .env import DT, TRAJ_LEN, CycleAborted, CycleObservation, WorldSpec
from .loop import RunConfig, run
from .motion import DiffusionPolicy

PROTOCOL_VERSION = 1
CAPTURE_RADIUS = 0.05      # entering this radius of the object finishes a task
MAX_MOVE_STEP = 0.5        # seconds; larger clock jumps per frame are clamped


class ProtocolError(Exception):
    pass


@dataclass
class _Client:
    """Thread-safe bridge between one websocket and the session thread."""

    send: callable       # schedules a frame for delivery (thread-safe)
    inbox: queue.Queue   # parsed frames plus ("disconnect", reason) markers


class LiveSession:
    """Human source driven by protocol frames; plugs into loop.run/deploy."""

    def __init__(self, world: WorldSpec, cycles: int):
        self.world = world
        self.cycles = cycles
        self._client: _Client | None = None
        self._client_ready = threading.Event()
        self._lock = threading.Lock()
        self.last_record: dict | None = None

    # -- connection management (called from the asyncio thread) -------------

    def attach(self, client: _Client) -> bool:
        with self._lock:
            if self._client is not None:
                return False
            self._client = client
        client.send({"type": "hello", "protocol": PROTOCOL_VERSION,
                     "world": self.world.to_jsonable(), "cycles": self.cycles})
        self._client_ready.set()
        return True

    def detach(self, client: _Client) -> None:
        with self._lock:
            if self._client is client:
                self._client = None
                self._client_ready.clear()

    # -- session-thread helpers ----------------------------------------------

    def _wait_for_client(self, timeout: float = 300.0) -> _Client:
        if not self._client_ready.wait(timeout):
            raise CycleAborted("no client connected")
        with self._lock:
            assert self._client is not None
            return self._client

    def _next_frame(self, client: _Client, timeout: float = 60.0) -> dict:
        try:
            frame = client.inbox.get(timeout=timeout)
        except queue.Empty:
            raise CycleAborted("client timed out")
        if frame[0] == "disconnect":
            raise CycleAborted(f"client disconnected: {frame[1]}")
        return frame[1]

    def _await_ready(self, client: _Client) -> None:
        while True:
            frame = self._next_frame(client, timeout=300.0)
            if frame.get("type") == "ready":
                return
            # pre-cycle moves are legal courtesy traffic; anything else is not
            if frame.get("type") != "human_move":
                raise CycleAborted(f"unexpected frame {frame.get('type')!r}")

    # -- the live deploy protocol ---------------------------------------------

    def run_cycle(self, plan, world: WorldSpec) -> CycleObservation:
        client = self._wait_for_client()
        genome = plan.genome
        task_set = world.task_set()
        preds = {t: task_set.predecessors(t) for t in task_set.tasks}
        home = np.asarray(world.homes[Agent.HUMAN], dtype=np.float64)
        rhome = np.asarray(world.homes[Agent.ROBOT], dtype=np.float64)

        cycle_idx = 0 if self.last_record is None else \
            self.last_record["cycle"] + 1
        self._await_ready(client)
        client.send({
            "type": "start_cycle",
            "cycle": cycle_idx,
            "plan": plan.summary(),
            "human_steps": genome.to_jsonable()["human"],
            "robot_steps": genome.to_jsonable()["robot"],
        })

        clock = 0.0
        pos = home.copy()
        finish: dict[int, float] = {}
        start: dict[int, float] = {}
        human_steps = list(genome.human_seq)
        robot_steps = list(genome.robot_seq)
        h_idx = r_idx = 0
        active_h: int | None = None
        active_r: int | None = None
        robot_started_at = 0.0
        robot_pos = rhome.copy()
        h_path: list[tuple[float, np.ndarray]] = []
        human_paths: dict[int, list[tuple[float, np.ndarray]]] = {}
        durations: dict[int, float] = {}
        min_dist = float(np.linalg.norm(pos - robot_pos))
        armed = True  # the player starts at home

        def robot_gate_open() -> int | None:
            """Advance robot waits; return the startable task, if any."""
            nonlocal r_idx
            while r_idx < len(robot_steps):
                step = robot_steps[r_idx]
                if step.kind == StepKind.WAIT:
                    if step.task in finish:
                        r_idx += 1
                        continue
                    return None
                return step.task if preds[step.task] <= set(finish) else None
            return None

        def human_gate() -> tuple[str, int | None]:
            nonlocal h_idx
            if active_h is not None:
                return "active", active_h
            while h_idx < len(human_steps):
                step = human_steps[h_idx]
                if step.kind == StepKind.WAIT:
                    if step.task in finish:
                        h_idx += 1
                        continue
                    return "waiting", None
                if preds[step.task] <= set(finish):
                    return "go", step.task
                return "waiting", step.task
            return "done", None

        while len(finish) < task_set.n_tasks:
            frame = self._next_frame(client)
            ftype = frame.get("type")
            if ftype != "human_move":
                raise CycleAborted(f"unexpected frame {ftype!r} mid-cycle")
            try:
                t = float(frame["t"])
                pos = np.array([float(frame["x"]), float(frame["y"])])
            except (KeyError, TypeError, ValueError):
                raise CycleAborted("malformed human_move")
            clock = min(max(clock, t), clock + MAX_MOVE_STEP)

            # robot progression
            if active_r is None:
                startable = robot_gate_open()
                if startable is not None:
                    active_r = startable
                    start[active_r] = clock
                    robot_started_at = clock
            if active_r is not None:
                traj = plan.robot_trajectories[active_r]
                k = int((clock - robot_started_at) / traj.dt)
                robot_pos = traj.points[min(k, len(traj.points) - 1)]
                if clock - robot_started_at >= traj.duration:
                    finish[active_r] = robot_started_at + traj.duration
                    robot_pos = traj.points[traj.completion_index]
                    r_idx += 1
                    active_r = None

            # human progression; a new task may only start after the player has
            # re-entered the home region (the respawn), which also keeps moves
            # that were in flight during a task finish from instantly starting
            # the next task at the previous object
            inside_home = np.linalg.norm(pos - home) <= world.home_radius
            if inside_home:
                armed = True
            gate, next_task = human_gate()
            if active_h is None and gate == "go" and armed and not inside_home:
                active_h = next_task
                armed = False
                start[active_h] = clock
                h_path = [(clock, pos.copy())]
                client.send({"type": "human_task_event", "task": active_h,
                             "event": "start", "t": round(clock, 3)})
            elif active_h is not None:
                h_path.append((clock, pos.copy()))
                goal = np.asarray(self.world.objects[active_h])
                if np.linalg.norm(pos - goal) <= CAPTURE_RADIUS:
                    finish[active_h] = clock
                    durations[active_h] = clock - start[active_h]
                    human_paths[active_h] = h_path
                    client.send({"type": "human_task_event", "task": active_h,
                                 "event": "finish", "t": round(clock, 3)})
                    h_idx += 1
                    active_h = None
                    pos = home.copy()  # client teleports the player home

            min_dist = min(min_dist, float(np.linalg.norm(pos - robot_pos)))
            gate, next_task = human_gate()
            client.send({
                "type": "state_tick",
                "t": round(clock, 3),
                "robot": [round(float(robot_pos[0]), 4),
                          round(float(robot_pos[1]), 4)],
                "robot_task": active_r,
                "human_task": active_h,
                "human_gate": gate,
                "next_human_task": next_task,
            })

        makespan = max(finish.values()) if finish else 0.0
        human_trajs = {t: _path_to_trajectory(p, durations[t],
                                              self.world.objects[t])
                       for t, p in human_paths.items()}
        return CycleObservation(
            human_durations={t: max(d, DT) for t, d in durations.items()},
            human_trajectories=human_trajs,
            robot_trajectories=dict(plan.robot_trajectories),
            makespan=float(makespan),
            min_distance=min_dist,
            start={t: float(start[t]) for t in finish},
            finish={t: float(v) for t, v in finish.items()},
        )

    # -- post-cycle notification (loop.run on_cycle hook) ---------------------

    def on_cycle(self, record: dict, temporal, fields) -> None:
        self.last_record = record
        client = self._client
        if client is None:
            return
        if "aborted" in record:
            client.send({"type": "cycle_complete", "cycle": record["cycle"],
                         "aborted": record["aborted"], "costs": None,
                         "heatmaps": None, "durations": None})
            return
        heatmaps = {}
        for t in sorted(fields):
            f = fields[t]
            heatmaps[str(t)] = {"nx": f.spec.nx, "ny": f.spec.ny,
                                "bounds": list(f.spec.bounds),
                                "mean": np.round(f.mean.ravel(), 4).tolist()}
        durations = {str(t): [round(v, 4) for v in temporal.point_estimates(t)]
                     for t in sorted(temporal.params)}
        client.send({
            "type": "cycle_complete",
            "cycle": record["cycle"],
            "aborted": None,
            "costs": {"realized": record["realized"],
                      "planned_lam0": record["planned_cost_lam0"],
                      "plan": {k: record["plan"][k]
                               for k in ("z", "z_t", "z_s", "z_d")}},
            "heatmaps": heatmaps,
            "durations": durations,
        })


def _path_to_trajectory(path, duration: float, goal) -> Trajectory:
    """Resample a recorded (t, pos) path onto the fixed DT grid."""
    goal = np.asarray(goal, dtype=np.float64)
    if not path:
        pts = np.tile(goal, (TRAJ_LEN, 1))
        return Trajectory(points=pts, completion_index=1, dt=DT)
    t0 = path[0][0]
    ts = np.array([t - t0 for t, _ in path])
    xy = np.array([p for _, p in path])
    comp = int(np.clip(round(duration / DT), 1, TRAJ_LEN - 1))
    grid = np.arange(TRAJ_LEN) * DT
    pts = np.empty((TRAJ_LEN, 2))
    pts[:, 0] = np.interp(grid, ts, xy[:, 0])
    pts[:, 1] = np.interp(grid, ts, xy[:, 1])
    pts[comp:] = goal
    return Trajectory(points=pts, completion_index=comp, dt=DT)


# ---------------------------------------------------------------------------
# Server wiring
# ---------------------------------------------------------------------------

def _static_responder(static_dir):
    root = Path(static_dir).resolve() if static_dir else None

    def respond(connection, request):
        if "Upgrade" in request.headers.get("Connection", "") or \
                request.headers.get("Upgrade"):
            return None  # continue the websocket handshake
        if root is None:
            return connection.respond(http.HTTPStatus.NOT_FOUND,
                                      "no static bundle configured\n")
        rel = request.path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        response = connection.respond(http.HTTPStatus.OK, "")
        response.headers["Content-Type"] = ctype
        response.body = target.read_bytes()
        return response

    return respond


async def _serve_async(session: LiveSession, host: str, port: int, static_dir,
                       done: threading.Event, ready_cb=None):
    import websockets

    loop = asyncio.get_running_loop()

    async def handler(ws):
        out: asyncio.Queue = asyncio.Queue()

        def send(frame: dict) -> None:
            loop.call_soon_threadsafe(out.put_nowait, frame)

        client = _Client(send=send, inbox=queue.Queue())

        async def pump():
            while True:
                frame = await out.get()
                await ws.send(json.dumps(frame))

        pump_task = asyncio.create_task(pump())
        attached = False
        try:
            raw = await ws.recv()
            hello = json.loads(raw)
            if not isinstance(hello, dict) or hello.get("type") != "hello":
                raise ProtocolError("expected hello frame")
            if not session.attach(client):
                await ws.send(json.dumps({"type": "error", "code": "busy",
                                          "message": "session in progress"}))
                return
            attached = True
            async for raw in ws:
                try:
                    frame = json.loads(raw)
                    if not isinstance(frame, dict) or "type" not in frame:
                        raise ValueError("frame must be an object with a type")
                except ValueError as e:
                    await ws.send(json.dumps({"type": "error",
                                              "code": "malformed",
                                              "message": str(e)}))
                    raise ProtocolError(str(e))
                client.inbox.put(("frame", frame))
        except ProtocolError as e:
            client.inbox.put(("disconnect", str(e)))
        except Exception:
            client.inbox.put(("disconnect", "connection lost"))
        else:
            client.inbox.put(("disconnect", "connection closed"))
        finally:
            pump_task.cancel()
            if attached:
                session.detach(client)

    async with websockets.serve(handler, host, port,
                                process_request=_static_responder(static_dir)):
        if ready_cb is not None:
            ready_cb()
        while not done.is_set():
            await asyncio.sleep(0.1)


def serve_forever(config: RunConfig, world: WorldSpec, host: str, port: int,
                  static_dir=None, cycles: int = 8, out_dir: Path | None = None,
                  ready_cb=None) -> int:
    """Run the live session service until the configured cycles complete."""
    import dataclasses

    config = dataclasses.replace(config, archetype="live", cycles=cycles)
    policy = DiffusionPolicy.load(config.policy_path)
    session = LiveSession(world, cycles)
    done = threading.Event()
    log_holder: dict = {}

    def adaptation_thread():
        try:
            log_holder["log"] = run(config, policy=policy, world=world,
                                    human_source=session,
                                    on_cycle=session.on_cycle)
        finally:
            done.set()

    worker = threading.Thread(target=adaptation_thread, daemon=True)
    worker.start()
    try:
        asyncio.run(_serve_async(session, host, port, static_dir, done,
                                 ready_cb))
    except OSError as e:
        print(f"error: cannot listen on {host}:{port}: {e}")
        return 2
    worker.join(timeout=10)
    if out_dir is not None and "log" in log_holder:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "live_run.jsonl").write_text(log_holder["log"].to_jsonl())
        print(f"live session log -> {out_dir / 'live_run.jsonl'}")
    return 0
