/**
 * Typed client for the read-only forecast service.
 *
 * Every response type mirrors the server's JSON wire format exactly:
 * row-major flat arrays with explicit dims, poses as flat [J*3] meter
 * floats. The raw response text is kept alongside the parsed payload so
 * the UI can display the forecast payload byte-for-byte as served.
 */

export interface SampleInfo {
  id: number;
  action_label: string;
  observed_frames: number;
  future_frames: number;
}

export interface ModeMarker {
  row: number;
  col: number;
  confidence: number;
}

export interface MotionMapPayload {
  m: number;
  values: number[]; // length m*m, row-major
  modes: ModeMarker[]; // sorted by confidence descending
}

export interface UncertaintyGrid {
  rows: number; // decoder unroll steps (observed + forecast frames)
  cols: number; // joints
  values: number[]; // row-major per-joint variances
}

export interface ForecastPayload {
  frames: number[][]; // T_f poses, each flat [J*3]
  reconstruction: number[][]; // T_o poses, each flat [J*3]
  uncertainty: UncertaintyGrid;
  used_cell: [number, number]; // populated cell after fallback
}

export interface ActionMapCell {
  row: number;
  col: number;
  label_histogram: Record<string, number>;
}

export interface ActionMapPayload {
  cells: ActionMapCell[];
}

export interface HealthPayload {
  status: string;
  checkpoint_hash: string;
}

export type FetchOutcome<T> =
  | { ok: true; payload: T; raw: string }
  | { ok: false; status: number; message: string };

export const samplesUrl = (): string => "/api/samples";

export const motionmapUrl = (sample: number): string =>
  `/api/motionmap?sample=${sample}`;

export const forecastUrl = (sample: number, row: number, col: number): string =>
  `/api/forecast?sample=${sample}&row=${row}&col=${col}`;

export const actionmapUrl = (sample: number): string =>
  `/api/actionmap?sample=${sample}`;

export const healthUrl = (): string => "/healthz";

export type FetchLike = (url: string) => Promise<{
  ok: boolean;
  status: number;
  text(): Promise<string>;
}>;

/** GET a JSON endpoint; error bodies are the server's {code, message}. */
export async function getJson<T>(
  url: string,
  fetchImpl: FetchLike,
): Promise<FetchOutcome<T>> {
  let status = 0;
  let raw: string;
  try {
    const response = await fetchImpl(url);
    status = response.status;
    raw = await response.text();
    if (response.ok) {
      return { ok: true, payload: JSON.parse(raw) as T, raw };
    }
  } catch (err) {
    return { ok: false, status, message: `request failed: ${String(err)}` };
  }
  let message = raw;
  try {
    const body = JSON.parse(raw) as { message?: string };
    if (typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body: surface the raw text
  }
  return { ok: false, status, message };
}
