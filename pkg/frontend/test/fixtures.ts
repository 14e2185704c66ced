import type {
  CycleCompleteFrame,
  ErrorFrame,
  Heatmap,
  HelloFrame,
  HumanTaskEventFrame,
  ServerFrame,
  StartCycleFrame,
  StateTickFrame,
  World,
} from "../src/protocol.js";

export const world: World = {
  bounds: [0, 0, 1, 1],
  walls: [
    [[0.12, 0.5], [0.44, 0.5]],
    [[0.56, 0.5], [0.88, 0.5]],
  ],
  objects: [[0.08, 0.74], [0.92, 0.74], [0.38, 0.8], [0.62, 0.8]],
  homes: { human: [0.25, 0.1], robot: [0.75, 0.1] },
  home_radius: 0.06,
  goal_tolerance: 0.03,
};

export function smallHeatmap(values?: number[]): Heatmap {
  return {
    nx: 3,
    ny: 3,
    bounds: [0, 0, 1, 1],
    mean: values ?? [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
  };
}

export const hello: HelloFrame = {
  type: "hello",
  protocol: 1,
  world,
  cycles: 2,
};

export const startCycle: StartCycleFrame = {
  type: "start_cycle",
  cycle: 0,
  plan: { z: 9.5, z_t: 8.2, z_s: 0.4, z_d: 0.25 },
  human_steps: [["do", 2], ["do", 0]],
  robot_steps: [["do", 3], ["wait", 2], ["do", 1]],
};

export const tick: StateTickFrame = {
  type: "state_tick",
  t: 1.25,
  robot: [0.52, 0.31],
  robot_task: 3,
  human_task: 2,
  human_gate: "active",
  next_human_task: 2,
};

export const taskStart: HumanTaskEventFrame = {
  type: "human_task_event",
  task: 2,
  event: "start",
  t: 0.6,
};

export const taskFinish: HumanTaskEventFrame = {
  type: "human_task_event",
  task: 2,
  event: "finish",
  t: 4.3,
};

export const cycleComplete: CycleCompleteFrame = {
  type: "cycle_complete",
  cycle: 0,
  aborted: null,
  costs: {
    realized: { makespan: 9.0, z_s: 0.4, cost: 9.7 },
    planned_lam0: 9.1,
    plan: { z: 13.2, z_t: 8.9, z_s: 0.4, z_d: 0.25 },
  },
  heatmaps: { "2": smallHeatmap() },
  durations: { "2": [4.4, 1.2] },
};

export const errorFrame: ErrorFrame = {
  type: "error",
  code: "malformed",
  message: "frame must be an object with a type",
};

export const allFrames: ServerFrame[] = [
  hello,
  startCycle,
  tick,
  taskStart,
  taskFinish,
  cycleComplete,
  errorFrame,
];
