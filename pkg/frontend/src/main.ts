import { KeyInput } from "./input.js";
import { SessionSocket } from "./net.js";
import { moveFrame, readyFrame } from "./protocol.js";
import {
  renderCostChart,
  renderDurations,
  renderHeatmap,
  renderWorld,
} from "./render.js";
import { ClientState, initialState, movePlayer, reduce } from "./state.js";

const TICK_HZ = 20; // human_move sampling rate (the server clock follows it)
const PLAYER_SPEED = 0.25; // workspace units per second

const worldCanvas = document.getElementById("world") as HTMLCanvasElement;
const heatCanvas = document.getElementById("heatmap") as HTMLCanvasElement;
const chartCanvas = document.getElementById("chart") as HTMLCanvasElement;
const startButton = document.getElementById("start") as HTMLButtonElement;
const taskSelect = document.getElementById("task") as HTMLSelectElement;
const durationsEl = document.getElementById("durations") as HTMLElement;
const bannerEl = document.getElementById("banner") as HTMLElement;

let state: ClientState = initialState();
let clock = 0;
let playing = false;

const url = `ws://${location.host || "127.0.0.1:8766"}/session`;
const socket = new SessionSocket(url, {
  onFrame(frame) {
    state = reduce(state, frame);
    if (frame.type === "start_cycle") {
      clock = 0;
      playing = true;
      startButton.disabled = true;
    }
    if (frame.type === "cycle_complete") {
      playing = false;
      startButton.disabled = state.phase === "over";
      startButton.textContent =
        state.phase === "over" ? "session over" : "start next cycle";
    }
    if (frame.type === "error") {
      playing = false;
    }
  },
  onStatus(status) {
    if (status === "open") {
      bannerEl.textContent = "";
      startButton.disabled = false;
    } else if (status === "reconnecting") {
      playing = false;
      bannerEl.textContent =
        "connection lost — current cycle aborted, reconnecting…";
    }
  },
});
socket.connect();

startButton.onclick = () => {
  socket.send(readyFrame());
  startButton.disabled = true;
};

const input = new KeyInput();
input.attach(window as unknown as {
  addEventListener(type: string, fn: (ev: KeyboardEvent) => void): void;
});

setInterval(() => {
  if (!playing) return;
  const [dx, dy] = input.direction();
  const step = PLAYER_SPEED / TICK_HZ;
  state = movePlayer(state, dx * step, dy * step);
  clock += 1 / TICK_HZ;
  socket.send(moveFrame(state.player[0], state.player[1], clock));
}, 1000 / TICK_HZ);

function frame(): void {
  const wctx = worldCanvas.getContext("2d");
  if (wctx) renderWorld(wctx, state);
  const hctx = heatCanvas.getContext("2d");
  if (hctx) {
    const map = state.heatmaps?.[taskSelect.value] ?? null;
    renderHeatmap(hctx, map, (pixels, nx, ny) => {
      const img = new ImageData(pixels, nx, ny);
      createImageBitmap(img, {
        resizeWidth: heatCanvas.width,
        resizeHeight: heatCanvas.height,
        resizeQuality: "pixelated",
      }).then((bmp) => hctx.drawImage(bmp, 0, 0));
    });
  }
  const cctx = chartCanvas.getContext("2d");
  if (cctx) renderCostChart(cctx, state);
  renderDurations(durationsEl, state);
  if (state.banner && state.phase !== "error") {
    bannerEl.textContent = state.banner;
  } else if (state.phase === "error") {
    bannerEl.textContent = state.banner ?? "error";
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
