// Canvas drawing. Only reads ClientState; no game logic here.

import { heatmapPixels } from "./heatmap.js";
import type { Heatmap, Step } from "./protocol.js";
import { ClientState, statusLine } from "./state.js";

export interface Ctx2D {
  canvas: { width: number; height: number };
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

const HUMAN_COLOR = "#c9a227";
const ROBOT_COLOR = "#2a6fb0";
const OBJECT_COLOR = "#c0392b";

function toPx(
  ctx: Ctx2D,
  p: readonly [number, number] | number[],
): [number, number] {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  return [p[0] * w, (1 - p[1]) * h];
}

export function renderWorld(ctx: Ctx2D, state: ClientState): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#f7f4ee";
  ctx.fillRect(0, 0, w, h);
  const world = state.world;
  if (!world) {
    ctx.fillStyle = "#444";
    ctx.font = "16px sans-serif";
    ctx.fillText(statusLine(state), 16, 24);
    return;
  }
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 5;
  for (const [a, b] of world.walls) {
    const [ax, ay] = toPx(ctx, a);
    const [bx, by] = toPx(ctx, b);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  for (const [agent, color] of [
    ["human", HUMAN_COLOR],
    ["robot", ROBOT_COLOR],
  ] as const) {
    const [hx, hy] = toPx(ctx, world.homes[agent]);
    const r = world.home_radius * ctx.canvas.width;
    ctx.fillStyle = color + "55";
    ctx.fillRect(hx - r, hy - r, 2 * r, 2 * r);
  }
  world.objects.forEach((obj, i) => {
    const [ox, oy] = toPx(ctx, obj);
    ctx.fillStyle = state.finishedTasks.includes(i) ? "#bbb" : OBJECT_COLOR;
    ctx.beginPath();
    ctx.arc(ox, oy, 8, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#222";
    ctx.font = "12px sans-serif";
    ctx.fillText(String(i), ox + 10, oy - 6);
  });
  if (state.robot) {
    const [rx, ry] = toPx(ctx, state.robot);
    ctx.fillStyle = ROBOT_COLOR;
    ctx.beginPath();
    ctx.arc(rx, ry, 9, 0, 2 * Math.PI);
    ctx.fill();
  }
  const [px, py] = toPx(ctx, state.player);
  ctx.fillStyle = HUMAN_COLOR;
  ctx.beginPath();
  ctx.arc(px, py, 9, 0, 2 * Math.PI);
  ctx.fill();

  ctx.fillStyle = "#333";
  ctx.font = "13px sans-serif";
  ctx.fillText(statusLine(state), 12, 20);
  if (state.cycle !== null) {
    ctx.fillText(
      `cycle ${state.cycle + 1}/${state.totalCycles}   t=${state.clock.toFixed(1)}s`,
      12,
      38,
    );
  }
  renderStepStrip(ctx, state.humanSteps, 12, h - 34, "you", HUMAN_COLOR, state);
  renderStepStrip(ctx, state.robotSteps, 12, h - 14, "bot", ROBOT_COLOR, state);
}

function renderStepStrip(
  ctx: Ctx2D,
  steps: Step[],
  x: number,
  y: number,
  label: string,
  color: string,
  state: ClientState,
): void {
  ctx.fillStyle = color;
  ctx.font = "12px monospace";
  ctx.fillText(label, x, y);
  let cx = x + 34;
  for (const [kind, task] of steps) {
    const donePart = state.finishedTasks.includes(task) && kind === "do";
    ctx.fillStyle = donePart ? "#aaa" : "#333";
    const text = kind === "do" ? `${task}` : `w${task}`;
    ctx.fillText(text, cx, y);
    cx += text.length * 8 + 10;
  }
}

export function renderHeatmap(
  ctx: Ctx2D,
  map: Heatmap | null,
  putImage: ((pixels: Uint8ClampedArray, nx: number, ny: number) => void) | null,
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (!map) {
    ctx.fillStyle = "#666";
    ctx.font = "12px sans-serif";
    ctx.fillText("no model yet — finish a cycle", 8, 16);
    return;
  }
  if (putImage) {
    putImage(heatmapPixels(map), map.nx, map.ny);
  }
}

export function renderCostChart(ctx: Ctx2D, state: ClientState): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, w, h);
  ctx.strokeStyle = "#ccc";
  ctx.lineWidth = 1;
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
  const pts = state.costHistory.filter((p) => p.cost !== null);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText("realized cost per cycle", 8, 14);
  if (pts.length === 0) return;
  const costs = pts.map((p) => p.cost as number);
  const maxC = Math.max(...costs) * 1.1;
  const minC = Math.min(0, ...costs);
  const sx = (w - 30) / Math.max(state.totalCycles - 1, 1);
  ctx.strokeStyle = "#b05050";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach((p, i) => {
    const x = 15 + p.cycle * sx;
    const y = h - 18 - ((p.cost as number) - minC) / (maxC - minC) * (h - 40);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export function renderDurations(
  el: { textContent: string | null },
  state: ClientState,
): void {
  if (!state.durations) {
    el.textContent = "duration estimates: (none yet)";
    return;
  }
  const parts = Object.entries(state.durations).map(
    ([t, [mu, s2]]) => `task ${t}: ${mu.toFixed(1)}s ±${Math.sqrt(s2).toFixed(1)}`,
  );
  el.textContent = "duration estimates — " + parts.join("   ");
}
