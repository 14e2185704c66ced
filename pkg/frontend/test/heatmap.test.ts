import { describe, expect, it } from "vitest";

import { heatmapPixels, regionMean } from "../src/heatmap.js";
import { smallHeatmap } from "./fixtures.js";

describe("heatmapPixels", () => {
  it("produces one opaque RGBA pixel per grid node", () => {
    const px = heatmapPixels(smallHeatmap());
    expect(px.length).toBe(3 * 3 * 4);
    for (let i = 3; i < px.length; i += 4) {
      expect(px[i]).toBe(255);
    }
  });

  it("hotter cells are redder (ramp is monotone toward the hot end)", () => {
    const map = smallHeatmap([0, 0, 0, 0, 0, 0, 0.1, 0.5, 1.0]);
    const px = heatmapPixels(map);
    // row iy=2 is written to image row 0 (vertical flip)
    const red = (ix: number) => px[(0 * 3 + ix) * 4];
    expect(red(2)).toBeGreaterThan(red(1));
    expect(red(1)).toBeGreaterThan(red(0));
  });

  it("flips vertically so grid row 0 lands at the image bottom", () => {
    const map = smallHeatmap([1, 1, 1, 0, 0, 0, 0, 0, 0]); // hot bottom row
    const px = heatmapPixels(map);
    const bottomRowRed = px[(2 * 3 + 0) * 4];
    const topRowRed = px[(0 * 3 + 0) * 4];
    expect(bottomRowRed).toBeGreaterThan(topRowRed);
  });
});

describe("regionMean", () => {
  it("averages only nodes inside the box", () => {
    const map = smallHeatmap([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
    // left column: x=0 nodes -> 0.1, 0.4, 0.7
    expect(regionMean(map, [0, 0, 0.1, 1])).toBeCloseTo(0.4, 10);
    // top-right single node
    expect(regionMean(map, [0.9, 0.9, 1, 1])).toBeCloseTo(0.9, 10);
    // empty region
    expect(regionMean(map, [0.4, 0.4, 0.45, 0.45])).toBe(0);
  });

  it("separates corridor intensities the way the live test expects", () => {
    // hot left corridor, cold right corridor
    const mean = new Array(9).fill(0.05);
    mean[0] = mean[3] = mean[6] = 0.9;
    const map = smallHeatmap(mean);
    const left = regionMean(map, [0, 0, 0.2, 1]);
    const right = regionMean(map, [0.8, 0, 1, 1]);
    expect(left).toBeGreaterThan(2 * right);
  });
});
