import { describe, expect, it } from "vitest";

import {
  initialState,
  movePlayer,
  reduce,
  statusLine,
} from "../src/state.js";
import {
  allFrames,
  cycleComplete,
  errorFrame,
  hello,
  startCycle,
  taskFinish,
  taskStart,
  tick,
  world,
} from "./fixtures.js";

describe("frame reducer", () => {
  it("handles every protocol frame type without throwing", () => {
    let state = initialState();
    for (const frame of allFrames) {
      state = reduce(state, frame);
    }
    expect(state.phase).toBe("error"); // last frame was an error
  });

  it("is pure: same input, same output", () => {
    const s0 = reduce(initialState(), hello);
    const a = reduce(s0, tick);
    const b = reduce(s0, tick);
    expect(a).toEqual(b);
    expect(s0.robot).toBeNull(); // input state untouched
  });

  it("hello establishes the world and spawns the player at home", () => {
    const s = reduce(initialState(), hello);
    expect(s.phase).toBe("lobby");
    expect(s.world).toEqual(world);
    expect(s.player).toEqual(world.homes.human);
    expect(s.totalCycles).toBe(2);
  });

  it("start_cycle resets per-cycle state and shows the plan steps", () => {
    let s = reduce(initialState(), hello);
    s = { ...s, finishedTasks: [1, 2], clock: 9 };
    s = reduce(s, startCycle);
    expect(s.phase).toBe("playing");
    expect(s.cycle).toBe(0);
    expect(s.humanSteps).toEqual([["do", 2], ["do", 0]]);
    expect(s.robotSteps).toContainEqual(["wait", 2]);
    expect(s.finishedTasks).toEqual([]);
    expect(s.clock).toBe(0);
  });

  it("state_tick drives robot pose and the clock", () => {
    let s = reduce(reduce(initialState(), hello), startCycle);
    s = reduce(s, tick);
    expect(s.robot).toEqual([0.52, 0.31]);
    expect(s.clock).toBe(1.25);
    expect(s.humanGate).toBe("active");
  });

  it("finish events respawn the player at home and mark the task", () => {
    let s = reduce(reduce(initialState(), hello), startCycle);
    s = movePlayer(s, 0.2, 0.3);
    expect(s.player).not.toEqual(world.homes.human);
    s = reduce(s, taskStart);
    expect(s.activeHumanTask).toBe(2);
    s = reduce(s, taskFinish);
    expect(s.activeHumanTask).toBeNull();
    expect(s.player).toEqual(world.homes.human);
    expect(s.finishedTasks).toEqual([2]);
  });

  it("cycle_complete stores costs, models, and history", () => {
    let s = reduce(reduce(initialState(), hello), startCycle);
    s = reduce(s, cycleComplete);
    expect(s.phase).toBe("between"); // 1 of 2 cycles done
    expect(s.costHistory).toEqual([{ cycle: 0, cost: 9.7 }]);
    expect(s.lastCosts?.makespan).toBe(9.0);
    expect(s.heatmaps?.["2"].nx).toBe(3);
    expect(s.durations?.["2"]).toEqual([4.4, 1.2]);
    const last = reduce(s, { ...cycleComplete, cycle: 1 });
    expect(last.phase).toBe("over");
  });

  it("aborted cycles keep previous models and show a banner", () => {
    let s = reduce(reduce(initialState(), hello), startCycle);
    s = reduce(s, cycleComplete);
    const models = s.heatmaps;
    s = reduce(s, {
      ...cycleComplete,
      cycle: 1,
      aborted: "client disconnected",
      costs: null,
      heatmaps: null,
      durations: null,
    });
    expect(s.heatmaps).toBe(models);
    expect(s.banner).toContain("aborted");
    expect(s.costHistory[1]).toEqual({ cycle: 1, cost: null });
  });

  it("error frames flip the phase and surface the message", () => {
    const s = reduce(reduce(initialState(), hello), errorFrame);
    expect(s.phase).toBe("error");
    expect(s.banner).toContain("malformed");
    expect(statusLine(s)).toContain("malformed");
  });

  it("movePlayer clamps into the world bounds", () => {
    let s = reduce(initialState(), hello);
    s = movePlayer(s, -5, -5);
    expect(s.player).toEqual([0, 0]);
    s = movePlayer(s, 9, 0.5);
    expect(s.player).toEqual([1, 0.5]);
  });

  it("status line reports waiting and go states", () => {
    let s = reduce(reduce(initialState(), hello), startCycle);
    s = reduce(s, { ...tick, human_gate: "waiting", next_human_task: null });
    expect(statusLine(s)).toContain("waiting for the robot");
    s = reduce(s, { ...tick, human_gate: "go", next_human_task: 2 });
    expect(statusLine(s)).toContain("fetch object 2");
  });
});
