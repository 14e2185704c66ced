// Spatial-cost grids arrive in cycle_complete frames; they are rendered as
// pixels rather than recomputed client-side so the view matches the server's
// model exactly.

import type { Heatmap } from "./protocol.js";

/** Viridis-ish three-stop ramp, enough for a cost display. */
function ramp(v: number): [number, number, number] {
  const t = Math.min(Math.max(v, 0), 1);
  if (t < 0.5) {
    const u = t / 0.5;
    return [68 + u * (33 - 68), 1 + u * (144 - 1), 84 + u * (140 - 84)];
  }
  const u = (t - 0.5) / 0.5;
  return [33 + u * (253 - 33), 144 + u * (231 - 144), 140 + u * (37 - 140)];
}

/** RGBA pixel buffer for a grid, row 0 at the bottom of the image. */
export function heatmapPixels(map: Heatmap): Uint8ClampedArray {
  const { nx, ny, mean } = map;
  const out = new Uint8ClampedArray(nx * ny * 4);
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      const v = mean[iy * nx + ix];
      const [r, g, b] = ramp(v);
      // flip vertically: canvas y grows downward, grid iy grows upward
      const o = ((ny - 1 - iy) * nx + ix) * 4;
      out[o] = r;
      out[o + 1] = g;
      out[o + 2] = b;
      out[o + 3] = 255;
    }
  }
  return out;
}

/** Mean grid value inside a workspace-coordinate box (x0, y0, x1, y1). */
export function regionMean(
  map: Heatmap,
  box: [number, number, number, number],
): number {
  const [bx0, by0, bx1, by1] = map.bounds;
  const sx = (bx1 - bx0) / (map.nx - 1);
  const sy = (by1 - by0) / (map.ny - 1);
  let total = 0;
  let count = 0;
  for (let iy = 0; iy < map.ny; iy++) {
    const y = by0 + iy * sy;
    if (y < box[1] || y > box[3]) continue;
    for (let ix = 0; ix < map.nx; ix++) {
      const x = bx0 + ix * sx;
      if (x < box[0] || x > box[2]) continue;
      total += map.mean[iy * map.nx + ix];
      count += 1;
    }
  }
  return count === 0 ? 0 : total / count;
}
