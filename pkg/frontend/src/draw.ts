/**
 * Canvas renderers. Every function draws through the narrow Painter
 * interface (a structural subset of CanvasRenderingContext2D) so tests can
 * record draw calls without a DOM.
 */

import { heatColor, markerAlpha, markerRadius, varianceRange } from "./colormap.js";
import type { VarianceRange } from "./colormap.js";
import type { ForecastPayload, ModeMarker, MotionMapPayload } from "./api.js";
import {
  BONES,
  FRONT_VIEW,
  JOINT_COUNT,
  SIDE_VIEW,
  clipBounds,
  projectJoint,
} from "./skeleton.js";
import type { Bounds, Rect, ViewAxes } from "./skeleton.js";
import type { Cell } from "./state.js";

export interface Painter {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export const COLORS = {
  background: "#10131a",
  panel: "#ffffff",
  panelBorder: "#d4d9e1",
  dimOverlay: "rgba(8,10,14,0.75)",
  modeCross: "#ef4444",
  hoverOutline: "#f8fafc",
  pinOutline: "#10b981",
  observation: "#94a3b8",
  forecast: "#2563eb",
  uncertainty: "#f59e0b",
  caption: "#475569",
} as const;

export interface HeatmapGeometry {
  cellSize: number;
  offsetX: number;
  offsetY: number;
  side: number;
}

export function heatmapGeometry(width: number, height: number, m: number): HeatmapGeometry {
  const side = Math.min(width, height);
  return {
    side,
    cellSize: side / m,
    offsetX: (width - side) / 2,
    offsetY: (height - side) / 2,
  };
}

/** Grid cell under a canvas point, or null outside the map. */
export function cellAtPoint(
  geom: HeatmapGeometry,
  m: number,
  x: number,
  y: number,
): Cell | null {
  const col = Math.floor((x - geom.offsetX) / geom.cellSize);
  const row = Math.floor((y - geom.offsetY) / geom.cellSize);
  if (row < 0 || row >= m || col < 0 || col >= m) return null;
  return [row, col];
}

const cellOrigin = (geom: HeatmapGeometry, cell: Cell): { x: number; y: number } => ({
  x: geom.offsetX + cell[1] * geom.cellSize,
  y: geom.offsetY + cell[0] * geom.cellSize,
});

export interface HeatmapView {
  hovered: Cell | null;
  pinned: Cell | null;
  dimmed: ((row: number, col: number) => boolean) | null;
}

export function drawHeatmap(
  p: Painter,
  width: number,
  height: number,
  map: MotionMapPayload,
  view: HeatmapView,
): void {
  const geom = heatmapGeometry(width, height, map.m);
  p.clearRect(0, 0, width, height);
  p.globalAlpha = 1;
  p.setLineDash([]);
  p.fillStyle = COLORS.background;
  p.fillRect(0, 0, width, height);

  let vmax = 0;
  for (const v of map.values) if (v > vmax) vmax = v;
  for (let row = 0; row < map.m; row += 1) {
    for (let col = 0; col < map.m; col += 1) {
      const v = map.values[row * map.m + col] ?? 0;
      const { x, y } = cellOrigin(geom, [row, col]);
      p.fillStyle = heatColor(v, vmax);
      p.fillRect(x, y, geom.cellSize, geom.cellSize);
      if (view.dimmed && view.dimmed(row, col)) {
        p.fillStyle = COLORS.dimOverlay;
        p.fillRect(x, y, geom.cellSize, geom.cellSize);
      }
    }
  }

  drawModeCrosses(p, geom, map.modes);

  if (view.hovered) {
    const { x, y } = cellOrigin(geom, view.hovered);
    p.strokeStyle = COLORS.hoverOutline;
    p.lineWidth = 1.5;
    p.strokeRect(x, y, geom.cellSize, geom.cellSize);
  }
  if (view.pinned) {
    const { x, y } = cellOrigin(geom, view.pinned);
    p.strokeStyle = COLORS.pinOutline;
    p.lineWidth = 2.5;
    p.strokeRect(x, y, geom.cellSize, geom.cellSize);
  }
}

export function drawModeCrosses(
  p: Painter,
  geom: HeatmapGeometry,
  modes: readonly ModeMarker[],
): void {
  p.strokeStyle = COLORS.modeCross;
  p.lineWidth = 2;
  p.globalAlpha = 1;
  const arm = Math.max(geom.cellSize * 0.45, 3);
  for (const mode of modes) {
    const origin = cellOrigin(geom, [mode.row, mode.col]);
    const cx = origin.x + geom.cellSize / 2;
    const cy = origin.y + geom.cellSize / 2;
    p.beginPath();
    p.moveTo(cx - arm, cy - arm);
    p.lineTo(cx + arm, cy + arm);
    p.moveTo(cx - arm, cy + arm);
    p.lineTo(cx + arm, cy - arm);
    p.stroke();
  }
}

export type FramePhase = "observation" | "forecast";

export interface FrameStyle {
  phase: FramePhase;
  /** per-joint variances for forecast frames, length J */
  sigma2: readonly number[] | null;
  sigmaRange: VarianceRange;
  alpha?: number;
  jointMarkers?: boolean;
}

export function drawSkeletonPanel(
  p: Painter,
  rect: Rect,
  pose: readonly number[],
  axes: ViewAxes,
  bounds: Bounds,
  style: FrameStyle,
): void {
  const alpha = style.alpha ?? 1;
  const project = (j: number) => projectJoint(pose, j, axes, bounds, rect);

  p.globalAlpha = alpha;
  p.strokeStyle = style.phase === "observation" ? COLORS.observation : COLORS.forecast;
  p.lineWidth = 2;
  p.setLineDash(style.phase === "observation" ? [4, 3] : []);
  for (const [child, parent] of BONES) {
    const a = project(child);
    const b = project(parent);
    p.beginPath();
    p.moveTo(a.x, a.y);
    p.lineTo(b.x, b.y);
    p.stroke();
  }
  p.setLineDash([]);

  if (style.jointMarkers === false) return;
  for (let j = 0; j < JOINT_COUNT; j += 1) {
    const point = project(j);
    let radius = 2.5;
    let jointAlpha = 0.9 * alpha;
    let color: string = COLORS.observation;
    if (style.phase === "forecast") {
      color = COLORS.uncertainty;
      if (style.sigma2) {
        const s = style.sigma2[j] ?? 0;
        radius = markerRadius(s, style.sigmaRange);
        jointAlpha = markerAlpha(s, style.sigmaRange) * alpha;
      }
    }
    p.globalAlpha = jointAlpha;
    p.fillStyle = color;
    p.beginPath();
    p.arc(point.x, point.y, radius, 0, Math.PI * 2);
    p.fill();
  }
  p.globalAlpha = 1;
}

const panelRects = (width: number, height: number): { front: Rect; side: Rect } => {
  const gap = 10;
  const captionBand = 18;
  const w = (width - gap) / 2;
  const h = height - captionBand;
  return {
    front: { x: 0, y: 0, width: w, height: h },
    side: { x: w + gap, y: 0, width: w, height: h },
  };
};

const drawPanelChrome = (p: Painter, rect: Rect, caption: string, height: number): void => {
  p.globalAlpha = 1;
  p.fillStyle = COLORS.panel;
  p.fillRect(rect.x, rect.y, rect.width, rect.height);
  p.strokeStyle = COLORS.panelBorder;
  p.lineWidth = 1;
  p.setLineDash([]);
  p.strokeRect(rect.x, rect.y, rect.width, rect.height);
  p.fillStyle = COLORS.caption;
  p.font = "12px system-ui, sans-serif";
  p.fillText(caption, rect.x + 4, height - 5);
};

const sigmaRow = (payload: ForecastPayload, forecastIndex: number): readonly number[] => {
  // The served grid covers the full decoder unroll (observed + forecast
  // rows); the forecast block is its tail. Anchor on the end so a
  // forecast-only grid maps identically.
  const { rows, cols, values } = payload.uncertainty;
  const row = Math.max(rows - payload.frames.length, 0) + forecastIndex;
  return values.slice(row * cols, (row + 1) * cols);
};

/**
 * One playback frame in two orthographic panels (front + side). Frames
 * [0, T_o) replay the observation reconstruction in the observation style;
 * frames [T_o, T_o+T_f) step through the forecast with per-joint
 * uncertainty markers.
 */
export function drawPlaybackView(
  p: Painter,
  width: number,
  height: number,
  payload: ForecastPayload,
  frameIndex: number,
): void {
  const observed = payload.reconstruction.length;
  const all = [...payload.reconstruction, ...payload.frames];
  const pose = all[Math.min(frameIndex, all.length - 1)] ?? [];
  const phase: FramePhase = frameIndex < observed ? "observation" : "forecast";
  const sigma2 = phase === "forecast" ? sigmaRow(payload, frameIndex - observed) : null;
  const range = varianceRange(payload.uncertainty.values);

  const { front, side } = panelRects(width, height);
  p.clearRect(0, 0, width, height);
  drawPanelChrome(p, front, "front", height);
  drawPanelChrome(p, side, "side", height);

  const style: FrameStyle = { phase, sigma2, sigmaRange: range };
  drawSkeletonPanel(p, front, pose, FRONT_VIEW, clipBounds(all, FRONT_VIEW), style);
  drawSkeletonPanel(p, side, pose, SIDE_VIEW, clipBounds(all, SIDE_VIEW), style);
}

/**
 * Stacked-frames summary: every forecast frame overlaid in one image,
 * opacity ramping toward the final pose, with the last observed pose as a
 * gray anchor underneath.
 */
export function drawStackedSummary(
  p: Painter,
  width: number,
  height: number,
  payload: ForecastPayload,
): void {
  const { front, side } = panelRects(width, height);
  p.clearRect(0, 0, width, height);
  drawPanelChrome(p, front, "front · stacked forecast", height);
  drawPanelChrome(p, side, "side · stacked forecast", height);

  const all = [...payload.reconstruction, ...payload.frames];
  const range = varianceRange(payload.uncertainty.values);
  const anchor = payload.reconstruction[payload.reconstruction.length - 1];

  for (const [axes, rect] of [
    [FRONT_VIEW, front],
    [SIDE_VIEW, side],
  ] as const) {
    const bounds = clipBounds(all, axes);
    if (anchor) {
      drawSkeletonPanel(p, rect, anchor, axes, bounds, {
        phase: "observation",
        sigma2: null,
        sigmaRange: range,
        alpha: 0.8,
        jointMarkers: false,
      });
    }
    const total = payload.frames.length;
    payload.frames.forEach((pose, i) => {
      const last = i === total - 1;
      drawSkeletonPanel(p, rect, pose, axes, bounds, {
        phase: "forecast",
        sigma2: last ? sigmaRow(payload, i) : null,
        sigmaRange: range,
        alpha: last ? 1 : 0.06 + 0.24 * (i / Math.max(total - 1, 1)),
        jointMarkers: last,
      });
    });
  }
}
