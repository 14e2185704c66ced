// Session protocol frames (one JSON object per websocket text message).

export interface World {
  bounds: [number, number, number, number];
  walls: [[number, number], [number, number]][];
  objects: [number, number][];
  homes: { human: [number, number]; robot: [number, number] };
  home_radius: number;
  goal_tolerance: number;
}

export type Step = ["do" | "wait", number];

export interface HelloFrame {
  type: "hello";
  protocol: number;
  world: World;
  cycles: number;
}

export interface StartCycleFrame {
  type: "start_cycle";
  cycle: number;
  plan: { z: number | string; z_t: number | string; z_s: number; z_d: number };
  human_steps: Step[];
  robot_steps: Step[];
}

export interface StateTickFrame {
  type: "state_tick";
  t: number;
  robot: [number, number];
  robot_task: number | null;
  human_task: number | null;
  human_gate: "waiting" | "go" | "active" | "done";
  next_human_task: number | null;
}

export interface HumanTaskEventFrame {
  type: "human_task_event";
  task: number;
  event: "start" | "finish";
  t: number;
}

export interface Heatmap {
  nx: number;
  ny: number;
  bounds: [number, number, number, number];
  mean: number[];
}

export interface CycleCompleteFrame {
  type: "cycle_complete";
  cycle: number;
  aborted: string | null;
  costs: {
    realized: { makespan: number; z_s: number; cost: number };
    planned_lam0: number;
    plan: Record<string, number | string>;
  } | null;
  heatmaps: Record<string, Heatmap> | null;
  durations: Record<string, [number, number]> | null;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  message: string;
}

export type ServerFrame =
  | HelloFrame
  | StartCycleFrame
  | StateTickFrame
  | HumanTaskEventFrame
  | CycleCompleteFrame
  | ErrorFrame;

const SERVER_TYPES = new Set([
  "hello",
  "start_cycle",
  "state_tick",
  "human_task_event",
  "cycle_complete",
  "error",
]);

export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const frame = data as { type?: unknown };
  if (typeof frame.type !== "string" || !SERVER_TYPES.has(frame.type)) {
    return null;
  }
  return data as ServerFrame;
}

export function helloFrame(name: string): string {
  return JSON.stringify({ type: "hello", name });
}

export function readyFrame(): string {
  return JSON.stringify({ type: "ready" });
}

export function moveFrame(x: number, y: number, t: number): string {
  return JSON.stringify({
    type: "human_move",
    x: Number(x.toFixed(5)),
    y: Number(y.toFixed(5)),
    t: Number(t.toFixed(4)),
  });
}
