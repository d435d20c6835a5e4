import { describe, expect, it } from "vitest";
import { MAX_SPLAT_POINTS, capPoints, drawCloud, projectCloud } from "../src/splat";
import { identityPose } from "../src/pose";
import type { CloudPayload } from "../src/types";

function grid(n: number): CloudPayload {
  const points: number[][] = [];
  for (let i = 0; i < n; i++) {
    points.push([i % 100, (i / 100) % 100, i % 7]);
  }
  return { count: n, points };
}

class StubContext {
  fillStyle: string = "";
  globalAlpha = 1;
  rects: Array<{ x: number; y: number; color: string; alpha: number }> = [];
  fillRect(x: number, y: number): void {
    this.rects.push({ x, y, color: String(this.fillStyle), alpha: this.globalAlpha });
  }
}

describe("point budget", () => {
  it("leaves small clouds untouched", () => {
    const cloud = grid(1000);
    expect(capPoints(cloud)).toBe(cloud);
  });

  it("never paints more than the cap", () => {
    const big = grid(MAX_SPLAT_POINTS * 2 + 17);
    const capped = capPoints(big);
    expect(capped.points.length).toBeLessThanOrEqual(MAX_SPLAT_POINTS);
    expect(capped.count).toBe(capped.points.length);

    const ctx = new StubContext();
    const painted = drawCloud(ctx, big, { width: 100, height: 100 });
    expect(painted).toBeLessThanOrEqual(MAX_SPLAT_POINTS);
    expect(ctx.rects.length).toBe(painted);
  });

  it("keeps colors aligned with surviving points", () => {
    const n = MAX_SPLAT_POINTS + 10;
    const points: number[][] = [];
    const colors: number[][] = [];
    for (let i = 0; i < n; i++) {
      points.push([i, 0, 0]);
      colors.push([i / n, 0, 0]);
    }
    const capped = capPoints({ count: n, points, colors });
    expect(capped.colors).toHaveLength(capped.points.length);
    for (let i = 0; i < capped.points.length; i++) {
      expect(capped.colors![i][0]).toBeCloseTo(capped.points[i][0] / n, 12);
    }
  });
});

describe("orthographic projection", () => {
  it("centers the bounding box and keeps +z pointing up", () => {
    const cloud: CloudPayload = {
      count: 2,
      points: [
        [0, 0, 0],
        [1, 0, 1],
      ],
    };
    const splats = projectCloud(cloud, { width: 100, height: 100, margin: 10 });
    const low = splats.find((s) => s.y > 50)!;
    const high = splats.find((s) => s.y < 50)!;
    expect(low.x).toBeCloseTo(10, 9);
    expect(low.y).toBeCloseTo(90, 9);
    expect(high.x).toBeCloseTo(90, 9);
    expect(high.y).toBeCloseTo(10, 9);
  });

  it("sorts far points first so near ones paint on top", () => {
    const cloud: CloudPayload = {
      count: 3,
      points: [
        [0, 5, 0],
        [1, -2, 0],
        [0.5, 9, 1],
      ],
    };
    const depths = projectCloud(cloud, { width: 50, height: 50 }).map((s) => s.depth);
    expect(depths).toEqual([9, 5, -2]);
  });

  it("applies the overlay pose before projecting", () => {
    const cloud: CloudPayload = { count: 2, points: [[0, 0, 0], [1, 0, 0]] };
    const pose = { ...identityPose(), yawDegrees: 90 };
    // After a 90 degree yaw the spread lies along y; x and z collapse.
    // The collapsed span makes the projection scale enormous, so the
    // cos(pi/2) rounding residue lands magnified; allow a loose pixel slop.
    const splats = projectCloud(cloud, { width: 100, height: 100 }, pose);
    expect(Math.abs(splats[0].x - splats[1].x)).toBeLessThan(1e-4);
    expect(splats.map((s) => s.depth).sort((a, b) => a - b)).toEqual([0, 1]);
  });

  it("empty clouds draw nothing", () => {
    const ctx = new StubContext();
    expect(drawCloud(ctx, { count: 0, points: [] }, { width: 10, height: 10 })).toBe(0);
    expect(ctx.rects).toEqual([]);
  });
});

describe("coloring", () => {
  it("uses provided colors verbatim", () => {
    const ctx = new StubContext();
    drawCloud(
      ctx,
      { count: 1, points: [[0, 0, 0]], colors: [[1, 0.5, 0]] },
      { width: 10, height: 10 },
    );
    expect(ctx.rects[0].color).toBe("rgb(255,128,0)");
  });

  it("falls back to depth shading and honors tint + alpha", () => {
    const ctx = new StubContext();
    drawCloud(ctx, { count: 2, points: [[0, 0, 0], [1, 1, 1]] }, { width: 10, height: 10 }, {
      tint: "#4a9eff",
      alpha: 0.6,
    });
    expect(ctx.rects.every((r) => r.color === "#4a9eff")).toBe(true);
    expect(ctx.rects.every((r) => Math.abs(r.alpha - 0.6) < 1e-12)).toBe(true);
  });
});
