import type { TransformBody } from "./types.js";

// Rotation buttons move in 5 degree steps; the numeric field is free
// entry. Either way the draft must stay inside {scale > 0, yaw in
// [0, 360)} so every draft maps onto a valid service transform.
export const ROTATE_STEP_DEGREES = 5;
export const MIN_SCALE = 0.01;
export const MAX_SCALE = 100;
export const TRANSLATION_LIMIT = 50;

export interface PoseDraft {
  x: number;
  y: number;
  z: number;
  scale: number;
  yawDegrees: number;
}

/** Result of a control action; `clamped` drives the visual cue. */
export interface PoseUpdate {
  pose: PoseDraft;
  clamped: boolean;
}

export function identityPose(): PoseDraft {
  return { x: 0, y: 0, z: 0, scale: 1, yawDegrees: 0 };
}

export function normalizeYaw(degrees: number): number {
  const wrapped = degrees % 360;
  return wrapped < 0 ? wrapped + 360 : wrapped;
}

/** Rotate by whole quantizer steps (negative = clockwise), snapping any
 *  free-entered yaw onto the 5 degree grid first. */
export function rotateSteps(pose: PoseDraft, steps: number): PoseDraft {
  const snapped = Math.round(pose.yawDegrees / ROTATE_STEP_DEGREES) * ROTATE_STEP_DEGREES;
  return { ...pose, yawDegrees: normalizeYaw(snapped + steps * ROTATE_STEP_DEGREES) };
}

export function setYaw(pose: PoseDraft, degrees: number): PoseUpdate {
  if (!Number.isFinite(degrees)) {
    return { pose, clamped: true };
  }
  return { pose: { ...pose, yawDegrees: normalizeYaw(degrees) }, clamped: false };
}

export function setScale(pose: PoseDraft, scale: number): PoseUpdate {
  if (!Number.isFinite(scale)) {
    return { pose, clamped: true };
  }
  const value = Math.min(Math.max(scale, MIN_SCALE), MAX_SCALE);
  return { pose: { ...pose, scale: value }, clamped: value !== scale };
}

export function scaleBy(pose: PoseDraft, factor: number): PoseUpdate {
  return setScale(pose, pose.scale * factor);
}

export function nudge(pose: PoseDraft, axis: "x" | "y" | "z", delta: number): PoseUpdate {
  const moved = pose[axis] + delta;
  if (!Number.isFinite(moved)) {
    return { pose, clamped: true };
  }
  const value = Math.min(Math.max(moved, -TRANSLATION_LIMIT), TRANSLATION_LIMIT);
  return { pose: { ...pose, [axis]: value }, clamped: value !== moved };
}

export function toTransformBody(pose: PoseDraft): TransformBody {
  return {
    translation: [pose.x, pose.y, pose.z],
    scale: pose.scale,
    yaw_degrees: pose.yawDegrees,
  };
}

/** Mirrors the service-side pose semantics: scale, then yaw about +z,
 *  then translate. Used to overlay the candidate on the scan. */
export function transformPoint(pose: PoseDraft, p: readonly number[]): [number, number, number] {
  const rad = (pose.yawDegrees * Math.PI) / 180;
  const c = Math.cos(rad);
  const s = Math.sin(rad);
  const sx = pose.scale * p[0];
  const sy = pose.scale * p[1];
  return [c * sx - s * sy + pose.x, s * sx + c * sy + pose.y, pose.scale * p[2] + pose.z];
}
