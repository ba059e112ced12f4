/**
 * Pure display mappings: heat values to colors, per-joint variance to
 * marker size and opacity. Both variance mappings are monotone
 * nondecreasing so a larger variance always reads as a larger, more
 * prominent marker.
 */

const clamp01 = (t: number): number => Math.min(1, Math.max(0, t));

/** Color ramp stops, dark to bright, luminance strictly increasing. */
const RAMP: ReadonlyArray<readonly [number, number, number]> = [
  [13, 8, 60],
  [84, 39, 143],
  [187, 55, 84],
  [243, 144, 63],
  [250, 240, 120],
];

/** Heat color for value v against a map maximum; returns an rgb() string. */
export function heatColor(v: number, vmax: number): string {
  const t = vmax > 0 ? clamp01(v / vmax) : 0;
  const scaled = t * (RAMP.length - 1);
  const lo = Math.min(Math.floor(scaled), RAMP.length - 2);
  const frac = scaled - lo;
  const a = RAMP[lo] ?? RAMP[0]!;
  const b = RAMP[lo + 1] ?? a;
  const channel = (i: number): number => Math.round((a[i] ?? 0) + ((b[i] ?? 0) - (a[i] ?? 0)) * frac);
  return `rgb(${channel(0)},${channel(1)},${channel(2)})`;
}

/** Relative luminance of an rgb() string, for monotonicity checks. */
export function luminanceOf(rgb: string): number {
  const parts = rgb.replace(/[rgb()\s]/g, "").split(",").map(Number);
  const [r = 0, g = 0, b = 0] = parts;
  return 0.2126 * r + 0.7152 * g + 0.0722 * b;
}

export interface VarianceRange {
  lo: number;
  hi: number;
}

/** Range of an uncertainty grid, used to normalize marker mappings. */
export function varianceRange(values: readonly number[]): VarianceRange {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return { lo: 0, hi: 1 };
  return { lo, hi };
}

const normalize = (sigma2: number, range: VarianceRange): number => {
  if (range.hi <= range.lo) return 0.5;
  return clamp01((sigma2 - range.lo) / (range.hi - range.lo));
};

/** Joint marker radius in pixels; monotone nondecreasing in sigma^2. */
export function markerRadius(sigma2: number, range: VarianceRange, minR = 2, maxR = 7): number {
  return minR + (maxR - minR) * normalize(sigma2, range);
}

/** Joint marker opacity; monotone nondecreasing in sigma^2. */
export function markerAlpha(sigma2: number, range: VarianceRange): number {
  return 0.35 + 0.55 * normalize(sigma2, range);
}
