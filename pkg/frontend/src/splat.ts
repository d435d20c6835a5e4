import type { CloudPayload } from "./types.js";
import { PoseDraft, transformPoint } from "./pose.js";

// The client never sees full-resolution geometry; anything above this
// cap is decimated by stride before painting.
export const MAX_SPLAT_POINTS = 50_000;

/** The slice of CanvasRenderingContext2D the renderer touches; tests
 *  substitute a recording stub because headless DOMs lack canvas. */
export interface SplatContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
}

export interface Viewport {
  width: number;
  height: number;
  margin?: number;
}

export interface Splat {
  x: number;
  y: number;
  depth: number;
  color: string;
}

export function capPoints(cloud: CloudPayload): CloudPayload {
  if (cloud.points.length <= MAX_SPLAT_POINTS) return cloud;
  const stride = Math.ceil(cloud.points.length / MAX_SPLAT_POINTS);
  const points: number[][] = [];
  const colors: number[][] | undefined = cloud.colors ? [] : undefined;
  for (let i = 0; i < cloud.points.length; i += stride) {
    points.push(cloud.points[i]);
    if (colors && cloud.colors) colors.push(cloud.colors[i]);
  }
  return { count: points.length, points, ...(colors ? { colors } : {}) };
}

function greyFor(depth: number, lo: number, span: number): string {
  const t = span > 0 ? (depth - lo) / span : 0;
  const g = Math.round(80 + 120 * (1 - t));
  return `rgb(${g},${g},${g})`;
}

function colorFor(rgb: number[]): string {
  const r = Math.round(rgb[0] * 255);
  const g = Math.round(rgb[1] * 255);
  const b = Math.round(rgb[2] * 255);
  return `rgb(${r},${g},${b})`;
}

/** Orthographic front view: +x right, +z up, +y away from the camera.
 *  Matches the server-side thumbnail orientation so the two agree. */
export function projectCloud(
  cloud: CloudPayload,
  viewport: Viewport,
  pose?: PoseDraft,
): Splat[] {
  const capped = capPoints(cloud);
  if (capped.points.length === 0) return [];
  const pts = pose ? capped.points.map((p) => transformPoint(pose, p)) : capped.points;

  let xMin = Infinity;
  let xMax = -Infinity;
  let zMin = Infinity;
  let zMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const p of pts) {
    if (p[0] < xMin) xMin = p[0];
    if (p[0] > xMax) xMax = p[0];
    if (p[2] < zMin) zMin = p[2];
    if (p[2] > zMax) zMax = p[2];
    if (p[1] < yMin) yMin = p[1];
    if (p[1] > yMax) yMax = p[1];
  }
  const margin = viewport.margin ?? 8;
  const span = Math.max(xMax - xMin, zMax - zMin, 1e-9);
  const scale = (Math.min(viewport.width, viewport.height) - 2 * margin) / span;
  const cx = (xMin + xMax) / 2;
  const cz = (zMin + zMax) / 2;

  const splats: Splat[] = [];
  for (let i = 0; i < pts.length; i++) {
    const p = pts[i];
    splats.push({
      x: (p[0] - cx) * scale + viewport.width / 2,
      y: viewport.height / 2 - (p[2] - cz) * scale,
      depth: p[1],
      color: capped.colors ? colorFor(capped.colors[i]) : greyFor(p[1], yMin, yMax - yMin),
    });
  }
  // Far points first so near splats paint over them.
  splats.sort((a, b) => b.depth - a.depth);
  return splats;
}

export interface DrawOptions {
  pose?: PoseDraft;
  alpha?: number;
  size?: number;
  tint?: string;
}

export function drawCloud(
  ctx: SplatContext,
  cloud: CloudPayload,
  viewport: Viewport,
  options: DrawOptions = {},
): number {
  const splats = projectCloud(cloud, viewport, options.pose);
  const size = options.size ?? 2;
  ctx.globalAlpha = options.alpha ?? 1;
  for (const splat of splats) {
    ctx.fillStyle = options.tint ?? splat.color;
    ctx.fillRect(splat.x - size / 2, splat.y - size / 2, size, size);
  }
  ctx.globalAlpha = 1;
  return splats.length;
}
