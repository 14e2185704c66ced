// Client render state, derived solely from protocol frames (plus the locally
// integrated player position, which is input capture, not game logic).

import type {
  Heatmap,
  ServerFrame,
  Step,
  World,
} from "./protocol.js";

export type Phase =
  | "connecting"
  | "lobby"       // hello received, waiting to start a cycle
  | "playing"
  | "between"     // cycle_complete shown, next cycle on request
  | "over"        // all cycles done
  | "error";

export interface CostPoint {
  cycle: number;
  cost: number | null; // null for aborted cycles
}

export interface ClientState {
  phase: Phase;
  world: World | null;
  totalCycles: number;
  cycle: number | null;
  humanSteps: Step[];
  robotSteps: Step[];
  clock: number;
  robot: [number, number] | null;
  robotTask: number | null;
  humanGate: "waiting" | "go" | "active" | "done";
  nextHumanTask: number | null;
  activeHumanTask: number | null;
  player: [number, number];
  finishedTasks: number[];
  heatmaps: Record<string, Heatmap> | null;
  durations: Record<string, [number, number]> | null;
  costHistory: CostPoint[];
  lastCosts: Record<string, number> | null;
  banner: string | null;
}

export function initialState(): ClientState {
  return {
    phase: "connecting",
    world: null,
    totalCycles: 0,
    cycle: null,
    humanSteps: [],
    robotSteps: [],
    clock: 0,
    robot: null,
    robotTask: null,
    humanGate: "waiting",
    nextHumanTask: null,
    activeHumanTask: null,
    player: [0.5, 0.5],
    finishedTasks: [],
    heatmaps: null,
    durations: null,
    costHistory: [],
    lastCosts: null,
    banner: null,
  };
}

/** Pure frame reducer: every server frame type maps to a new state. */
export function reduce(state: ClientState, frame: ServerFrame): ClientState {
  switch (frame.type) {
    case "hello": {
      const home = frame.world.homes.human;
      return {
        ...state,
        phase: "lobby",
        world: frame.world,
        totalCycles: frame.cycles,
        player: [home[0], home[1]],
        banner: null,
      };
    }
    case "start_cycle": {
      const home = state.world ? state.world.homes.human : state.player;
      return {
        ...state,
        phase: "playing",
        cycle: frame.cycle,
        humanSteps: frame.human_steps,
        robotSteps: frame.robot_steps,
        clock: 0,
        robotTask: null,
        humanGate: "waiting",
        nextHumanTask: null,
        activeHumanTask: null,
        player: [home[0], home[1]],
        finishedTasks: [],
        banner: null,
      };
    }
    case "state_tick":
      return {
        ...state,
        clock: frame.t,
        robot: frame.robot,
        robotTask: frame.robot_task,
        humanGate: frame.human_gate,
        nextHumanTask: frame.next_human_task,
      };
    case "human_task_event": {
      if (frame.event === "start") {
        return { ...state, activeHumanTask: frame.task };
      }
      // finish: respawn the player at home per the protocol contract
      const home = state.world ? state.world.homes.human : state.player;
      return {
        ...state,
        activeHumanTask: null,
        player: [home[0], home[1]],
        finishedTasks: [...state.finishedTasks, frame.task],
      };
    }
    case "cycle_complete": {
      const over =
        state.totalCycles > 0 && frame.cycle >= state.totalCycles - 1;
      return {
        ...state,
        phase: over ? "over" : "between",
        heatmaps: frame.heatmaps ?? state.heatmaps,
        durations: frame.durations ?? state.durations,
        lastCosts:
          frame.costs === null
            ? state.lastCosts
            : {
                makespan: frame.costs.realized.makespan,
                proximity: frame.costs.realized.z_s,
                cost: frame.costs.realized.cost,
                planned: frame.costs.planned_lam0,
              },
        costHistory: [
          ...state.costHistory,
          {
            cycle: frame.cycle,
            cost: frame.costs === null ? null : frame.costs.realized.cost,
          },
        ],
        banner: frame.aborted ? `cycle aborted: ${frame.aborted}` : null,
      };
    }
    case "error":
      return {
        ...state,
        phase: "error",
        banner: `server error [${frame.code}]: ${frame.message}`,
      };
  }
}

/** Input integration: clamp the player into the world bounds. */
export function movePlayer(
  state: ClientState,
  dx: number,
  dy: number,
): ClientState {
  if (!state.world) return state;
  const [x0, y0, x1, y1] = state.world.bounds;
  const x = Math.min(Math.max(state.player[0] + dx, x0), x1);
  const y = Math.min(Math.max(state.player[1] + dy, y0), y1);
  return { ...state, player: [x, y] };
}

export function statusLine(state: ClientState): string {
  switch (state.phase) {
    case "connecting":
      return "connecting…";
    case "lobby":
      return "connected — press Start to begin";
    case "between":
      return "cycle complete — press Start for the next cycle";
    case "over":
      return "session finished";
    case "error":
      return state.banner ?? "error";
    case "playing":
      break;
  }
  if (state.humanGate === "waiting") {
    return state.nextHumanTask === null
      ? "waiting for the robot…"
      : `waiting — task ${state.nextHumanTask} is not ready yet`;
  }
  if (state.humanGate === "go") {
    return `go! fetch object ${state.nextHumanTask} (leave home to start)`;
  }
  if (state.humanGate === "active") {
    return `carrying out task ${state.activeHumanTask ?? state.nextHumanTask}`;
  }
  return "all your tasks are done — the robot is finishing up";
}
