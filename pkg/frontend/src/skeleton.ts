/**
 * Display metadata and projection helpers for the 17-joint humanoid.
 *
 * The bone list and axis conventions (x left, y forward, z up) match the
 * corpus skeleton; everything here is display mapping -- world poses come
 * from the service and are never recomputed client-side.
 */

/** parent index per joint; -1 marks the pelvis root. */
export const PARENTS: readonly number[] = [
  -1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15,
];

export const JOINT_COUNT = PARENTS.length;

/** (child, parent) pairs to draw as bones. */
export const BONES: ReadonlyArray<readonly [number, number]> = PARENTS.flatMap(
  (parent, child) => (parent < 0 ? [] : [[child, parent] as const]),
);

/** Orthographic view: indices of the world axes mapped to screen x/y. */
export interface ViewAxes {
  horizontal: number;
  vertical: number;
}

/** Front view: world x (left) across, world z (up) up. */
export const FRONT_VIEW: ViewAxes = { horizontal: 0, vertical: 2 };

/** Side view: world y (forward) across, world z (up) up. */
export const SIDE_VIEW: ViewAxes = { horizontal: 1, vertical: 2 };

/** Joint j of a flat [J*3] pose. */
export function jointAt(pose: readonly number[], j: number): [number, number, number] {
  const base = j * 3;
  return [pose[base] ?? 0, pose[base + 1] ?? 0, pose[base + 2] ?? 0];
}

export interface Bounds {
  minH: number;
  maxH: number;
  minV: number;
  maxV: number;
}

/**
 * Bounding box of an entire clip under one view, so panel framing stays
 * fixed while the animation plays.
 */
export function clipBounds(frames: ReadonlyArray<readonly number[]>, axes: ViewAxes): Bounds {
  let minH = Infinity;
  let maxH = -Infinity;
  let minV = Infinity;
  let maxV = -Infinity;
  for (const pose of frames) {
    for (let j = 0; j < JOINT_COUNT; j += 1) {
      const point = jointAt(pose, j);
      const h = point[axes.horizontal] ?? 0;
      const v = point[axes.vertical] ?? 0;
      if (h < minH) minH = h;
      if (h > maxH) maxH = h;
      if (v < minV) minV = v;
      if (v > maxV) maxV = v;
    }
  }
  if (!Number.isFinite(minH)) return { minH: -1, maxH: 1, minV: -1, maxV: 1 };
  return { minH, maxH, minV, maxV };
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

/**
 * Map a world point into a panel rectangle with uniform scale, centered,
 * with the vertical axis pointing up on screen.
 */
export function projectJoint(
  pose: readonly number[],
  j: number,
  axes: ViewAxes,
  bounds: Bounds,
  rect: Rect,
  padding = 12,
): { x: number; y: number } {
  const point = jointAt(pose, j);
  const h = point[axes.horizontal] ?? 0;
  const v = point[axes.vertical] ?? 0;
  const spanH = Math.max(bounds.maxH - bounds.minH, 1e-6);
  const spanV = Math.max(bounds.maxV - bounds.minV, 1e-6);
  const scale = Math.min(
    (rect.width - 2 * padding) / spanH,
    (rect.height - 2 * padding) / spanV,
  );
  const midH = (bounds.minH + bounds.maxH) / 2;
  const midV = (bounds.minV + bounds.maxV) / 2;
  return {
    x: rect.x + rect.width / 2 + (h - midH) * scale,
    y: rect.y + rect.height / 2 - (v - midV) * scale,
  };
}
