/**
 * View state and its reducer.
 *
 * The state is a pure function of (API payloads, user events): the reducer
 * never performs I/O and never mutates its input, so replaying the same
 * event sequence reproduces the identical view. Network scheduling lives
 * in scheduler.ts; rendering lives in draw.ts.
 */

import type {
  ActionMapPayload,
  ForecastPayload,
  MotionMapPayload,
  SampleInfo,
} from "./api.js";

export type Cell = readonly [number, number];

export const cellKey = (sample: number, cell: Cell): string =>
  `${sample}:${cell[0]}:${cell[1]}`;

/** The literal message shown when the server answers 422 for a cell. */
export const NO_NEARBY_MOTION = "no nearby motion";

export type ForecastEntry =
  | { status: "loading" }
  | { status: "ready"; payload: ForecastPayload; raw: string }
  | { status: "empty"; message: string }
  | { status: "error"; message: string };

export interface ViewState {
  samples: readonly SampleInfo[];
  selectedSample: number | null;
  hoveredCell: Cell | null;
  pinnedCell: Cell | null;
  playbackFrame: number;
  playing: boolean;
  labelFilter: string | null;
  motionmaps: Readonly<Record<number, MotionMapPayload>>;
  actionmaps: Readonly<Record<number, ActionMapPayload>>;
  forecasts: Readonly<Record<string, ForecastEntry>>;
  banner: string | null;
}

export const initialState: ViewState = {
  samples: [],
  selectedSample: null,
  hoveredCell: null,
  pinnedCell: null,
  playbackFrame: 0,
  playing: false,
  labelFilter: null,
  motionmaps: {},
  actionmaps: {},
  forecasts: {},
  banner: null,
};

export type ViewEvent =
  | { kind: "samples-loaded"; samples: SampleInfo[] }
  | { kind: "sample-selected"; sample: number }
  | { kind: "motionmap-loaded"; sample: number; payload: MotionMapPayload }
  | { kind: "actionmap-loaded"; sample: number; payload: ActionMapPayload }
  | { kind: "cell-hovered"; cell: Cell }
  | { kind: "hover-cleared" }
  | { kind: "cell-pinned"; cell: Cell }
  | { kind: "forecast-requested"; sample: number; cell: Cell }
  | {
      kind: "forecast-loaded";
      sample: number;
      cell: Cell;
      payload: ForecastPayload;
      raw: string;
    }
  | {
      kind: "forecast-rejected";
      sample: number;
      cell: Cell;
      status: number;
      message: string;
    }
  | { kind: "label-filter-set"; label: string | null }
  | { kind: "playback-toggled" }
  | { kind: "frame-advanced" }
  | { kind: "frame-set"; frame: number }
  | { kind: "fetch-failed"; message: string };

const gridSize = (state: ViewState): number | null => {
  if (state.selectedSample === null) return null;
  const map = state.motionmaps[state.selectedSample];
  return map ? map.m : null;
};

const cellInRange = (state: ViewState, cell: Cell): boolean => {
  const m = gridSize(state);
  return (
    m !== null && cell[0] >= 0 && cell[0] < m && cell[1] >= 0 && cell[1] < m
  );
};

/** Forecast cell currently shown: the pinned cell, else the hovered one. */
export function activeCell(state: ViewState): Cell | null {
  return state.pinnedCell ?? state.hoveredCell;
}

export function activeEntry(state: ViewState): ForecastEntry | null {
  const cell = activeCell(state);
  if (cell === null || state.selectedSample === null) return null;
  return state.forecasts[cellKey(state.selectedSample, cell)] ?? null;
}

/** Total playback length T_o + T_f of a decoded forecast. */
export function frameCount(entry: ForecastEntry): number {
  if (entry.status !== "ready") return 0;
  return entry.payload.reconstruction.length + entry.payload.frames.length;
}

/** Playback is available only once the active cell's decode has arrived. */
export function playbackReady(state: ViewState): boolean {
  const entry = activeEntry(state);
  return entry !== null && entry.status === "ready" && frameCount(entry) > 0;
}

/** Status line for the forecast panel, or null when a forecast is shown. */
export function forecastNotice(state: ViewState): string | null {
  if (state.selectedSample === null) return "select a sample";
  const cell = activeCell(state);
  if (cell === null) return "hover or click a heatmap cell to decode";
  const entry = activeEntry(state);
  if (entry === null) return "hover to decode";
  switch (entry.status) {
    case "loading":
      return "decoding…";
    case "empty":
      return entry.message;
    case "error":
      return entry.message;
    case "ready":
      return null;
  }
}

/**
 * Cells to dim under the active label filter: any populated cell whose
 * action histogram lacks the label. Unpopulated cells carry no
 * histogram, hence no label, and dim as well.
 */
export function dimPredicate(
  state: ViewState,
): ((row: number, col: number) => boolean) | null {
  const label = state.labelFilter;
  if (label === null || state.selectedSample === null) return null;
  const actionmap = state.actionmaps[state.selectedSample];
  if (!actionmap) return null;
  const bright = new Set<string>();
  for (const cell of actionmap.cells) {
    if ((cell.label_histogram[label] ?? 0) > 0) {
      bright.add(`${cell.row}:${cell.col}`);
    }
  }
  return (row, col) => !bright.has(`${row}:${col}`);
}

/** Action labels present in the sample list, sorted, for the filter menu. */
export function availableLabels(state: ViewState): string[] {
  return [...new Set(state.samples.map((s) => s.action_label))].sort();
}

const clampFrame = (frame: number, total: number): number => {
  if (total <= 0) return 0;
  return Math.min(Math.max(frame, 0), total - 1);
};

export function reduce(state: ViewState, event: ViewEvent): ViewState {
  switch (event.kind) {
    case "samples-loaded":
      return { ...state, samples: [...event.samples] };

    case "sample-selected": {
      if (event.sample === state.selectedSample) return state;
      return {
        ...state,
        selectedSample: event.sample,
        hoveredCell: null,
        pinnedCell: null,
        playbackFrame: 0,
        playing: false,
        banner: null,
      };
    }

    case "motionmap-loaded":
      return {
        ...state,
        motionmaps: { ...state.motionmaps, [event.sample]: event.payload },
      };

    case "actionmap-loaded":
      return {
        ...state,
        actionmaps: { ...state.actionmaps, [event.sample]: event.payload },
      };

    case "cell-hovered": {
      if (!cellInRange(state, event.cell)) return state;
      return { ...state, hoveredCell: event.cell };
    }

    case "hover-cleared":
      return state.hoveredCell === null ? state : { ...state, hoveredCell: null };

    case "cell-pinned": {
      if (!cellInRange(state, event.cell)) return state;
      return {
        ...state,
        pinnedCell: event.cell,
        playbackFrame: 0,
        playing: false,
      };
    }

    case "forecast-requested": {
      const key = cellKey(event.sample, event.cell);
      const existing = state.forecasts[key];
      if (existing && existing.status === "ready") return state;
      return {
        ...state,
        forecasts: { ...state.forecasts, [key]: { status: "loading" } },
      };
    }

    case "forecast-loaded": {
      const key = cellKey(event.sample, event.cell);
      return {
        ...state,
        forecasts: {
          ...state.forecasts,
          [key]: { status: "ready", payload: event.payload, raw: event.raw },
        },
      };
    }

    case "forecast-rejected": {
      const key = cellKey(event.sample, event.cell);
      const entry: ForecastEntry =
        event.status === 422
          ? { status: "empty", message: NO_NEARBY_MOTION }
          : { status: "error", message: event.message };
      return { ...state, forecasts: { ...state.forecasts, [key]: entry } };
    }

    case "label-filter-set":
      return { ...state, labelFilter: event.label };

    case "playback-toggled": {
      if (!playbackReady(state)) return state;
      return { ...state, playing: !state.playing };
    }

    case "frame-advanced": {
      if (!state.playing) return state;
      const entry = activeEntry(state);
      const total = entry ? frameCount(entry) : 0;
      if (total <= 0) return state;
      return { ...state, playbackFrame: (state.playbackFrame + 1) % total };
    }

    case "frame-set": {
      const entry = activeEntry(state);
      const total = entry ? frameCount(entry) : 0;
      return { ...state, playbackFrame: clampFrame(event.frame, total) };
    }

    case "fetch-failed":
      return { ...state, banner: event.message };
  }
}

/** Replay a whole event sequence from the initial state. */
export function replay(events: readonly ViewEvent[]): ViewState {
  return events.reduce(reduce, initialState);
}

/** Encode the pinned selection for the URL hash, so reloads reproduce it. */
export function encodeSelection(state: ViewState): string {
  if (state.selectedSample === null) return "";
  const parts = [`s=${state.selectedSample}`];
  if (state.pinnedCell) {
    parts.push(`r=${state.pinnedCell[0]}`, `c=${state.pinnedCell[1]}`);
  }
  return parts.join("&");
}

export function decodeSelection(
  hash: string,
): { sample: number; cell: Cell | null } | null {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  if (!params.has("s")) return null;
  const sample = Number(params.get("s"));
  if (!Number.isInteger(sample)) return null;
  let cell: Cell | null = null;
  if (params.has("r") && params.has("c")) {
    const row = Number(params.get("r"));
    const col = Number(params.get("c"));
    if (Number.isInteger(row) && Number.isInteger(col)) cell = [row, col];
  }
  return { sample, cell };
}
