/** Shared test fixtures: payload builders and a recording painter. */

import type {
  ActionMapPayload,
  ForecastPayload,
  ModeMarker,
  MotionMapPayload,
  SampleInfo,
} from "../src/api.js";
import type { Painter } from "../src/draw.js";
import { JOINT_COUNT } from "../src/skeleton.js";

export function makeSamples(): SampleInfo[] {
  return [
    { id: 3, action_label: "walk", observed_frames: 4, future_frames: 6 },
    { id: 7, action_label: "sit", observed_frames: 4, future_frames: 6 },
    { id: 9, action_label: "walk", observed_frames: 4, future_frames: 6 },
  ];
}

export function makeMotionMap(m: number, modes: ModeMarker[] = []): MotionMapPayload {
  const values = Array.from({ length: m * m }, (_, i) => (i % 7) / 7);
  for (const mode of modes) values[mode.row * m + mode.col] = 1;
  return { m, values, modes };
}

/** A deterministic pose: joints spread on a slanted line, varying per frame. */
const pose = (t: number): number[] => {
  const flat: number[] = [];
  for (let j = 0; j < JOINT_COUNT; j += 1) {
    flat.push(0.1 * j + 0.01 * t, 0.05 * j - 0.02 * t, 0.08 * j);
  }
  return flat;
};

export function makeForecast(
  observed = 4,
  future = 6,
  sigma: (frame: number, joint: number) => number = (f, j) => 0.01 * (f + 1) * (j + 1),
): ForecastPayload {
  const values: number[] = [];
  for (let f = 0; f < future; f += 1) {
    for (let j = 0; j < JOINT_COUNT; j += 1) values.push(sigma(f, j));
  }
  return {
    frames: Array.from({ length: future }, (_, t) => pose(observed + t)),
    reconstruction: Array.from({ length: observed }, (_, t) => pose(t)),
    uncertainty: { rows: future, cols: JOINT_COUNT, values },
    used_cell: [2, 5],
  };
}

export function makeActionMap(): ActionMapPayload {
  return {
    cells: [
      { row: 0, col: 0, label_histogram: { walk: 2, sit: 1 } },
      { row: 1, col: 2, label_histogram: { sit: 3 } },
      { row: 4, col: 4, label_histogram: { walk: 1 } },
    ],
  };
}

export interface DrawOp {
  op: string;
  args: number[];
  fillStyle: string;
  strokeStyle: string;
  globalAlpha: number;
  lineWidth: number;
}

/** Painter that records every draw call with the style active at the time. */
export class RecordingPainter implements Painter {
  ops: DrawOp[] = [];
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  globalAlpha = 1;
  lineWidth = 1;
  font = "";

  private log(op: string, ...args: number[]): void {
    this.ops.push({
      op,
      args,
      fillStyle: String(this.fillStyle),
      strokeStyle: String(this.strokeStyle),
      globalAlpha: this.globalAlpha,
      lineWidth: this.lineWidth,
    });
  }

  clearRect(x: number, y: number, w: number, h: number): void {
    this.log("clearRect", x, y, w, h);
  }
  fillRect(x: number, y: number, w: number, h: number): void {
    this.log("fillRect", x, y, w, h);
  }
  strokeRect(x: number, y: number, w: number, h: number): void {
    this.log("strokeRect", x, y, w, h);
  }
  beginPath(): void {
    this.log("beginPath");
  }
  moveTo(x: number, y: number): void {
    this.log("moveTo", x, y);
  }
  lineTo(x: number, y: number): void {
    this.log("lineTo", x, y);
  }
  arc(x: number, y: number, r: number, a0: number, a1: number): void {
    this.log("arc", x, y, r, a0, a1);
  }
  fill(): void {
    this.log("fill");
  }
  stroke(): void {
    this.log("stroke");
  }
  fillText(_text: string, x: number, y: number): void {
    this.log("fillText", x, y);
  }
  setLineDash(segments: number[]): void {
    this.log("setLineDash", ...segments);
  }

  byOp(op: string): DrawOp[] {
    return this.ops.filter((entry) => entry.op === op);
  }
}

/** Run queued microtasks so mocked fetch resolutions propagate. */
export const flush = (): Promise<void> =>
  new Promise((resolve) => setTimeout(resolve, 0));

export interface PendingFetch {
  url: string;
  respond(status: number, body: string): void;
}

/** Manually resolved fetch stub recording every requested URL. */
export class MockFetch {
  calls: string[] = [];
  pending: PendingFetch[] = [];

  impl = (url: string): Promise<{ ok: boolean; status: number; text(): Promise<string> }> => {
    this.calls.push(url);
    return new Promise((resolve) => {
      this.pending.push({
        url,
        respond: (status: number, body: string) =>
          resolve({ ok: status >= 200 && status < 300, status, text: async () => body }),
      });
    });
  };

  /** Respond to the oldest pending request matching the URL. */
  respond(url: string, status: number, body: string): void {
    const index = this.pending.findIndex((p) => p.url === url);
    if (index < 0) throw new Error(`no pending request for ${url}`);
    const [entry] = this.pending.splice(index, 1);
    entry?.respond(status, body);
  }
}

/** Deterministic manual timer queue for debounce tests. */
export class ManualTimers {
  now = 0;
  private queue: { at: number; fn: () => void; id: number }[] = [];
  private nextId = 1;

  setTimer = (fn: () => void, ms: number): unknown => {
    const id = this.nextId;
    this.nextId += 1;
    this.queue.push({ at: this.now + ms, fn, id });
    return id;
  };

  clearTimer = (handle: unknown): void => {
    this.queue = this.queue.filter((t) => t.id !== handle);
  };

  advance(ms: number): void {
    this.now += ms;
    const due = this.queue
      .filter((t) => t.at <= this.now)
      .sort((a, b) => a.at - b.at || a.id - b.id);
    this.queue = this.queue.filter((t) => t.at > this.now);
    for (const timer of due) timer.fn();
  }
}
