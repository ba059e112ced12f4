/**
 * Forecast request scheduling.
 *
 * Hover decodes are debounced at 150 ms, at most one request is in flight
 * per (sample, cell), and overlapping responses for the same cell resolve
 * last-write-wins: a response is dropped unless it belongs to the newest
 * request issued for its key.
 */

import { forecastUrl, getJson } from "./api.js";
import type { FetchLike, FetchOutcome, ForecastPayload } from "./api.js";
import { cellKey } from "./state.js";
import type { Cell, ViewEvent } from "./state.js";

export const HOVER_DEBOUNCE_MS = 150;

export interface SchedulerIO {
  fetchImpl: FetchLike;
  setTimer(fn: () => void, ms: number): unknown;
  clearTimer(handle: unknown): void;
}

export class ForecastScheduler {
  private readonly io: SchedulerIO;
  private readonly emit: (event: ViewEvent) => void;
  private readonly isSettled: (key: string) => boolean;
  private readonly debounceMs: number;
  private hoverTimer: unknown = null;
  private inflight = new Map<string, number>();
  private sequence = 0;

  constructor(
    io: SchedulerIO,
    emit: (event: ViewEvent) => void,
    isSettled: (key: string) => boolean,
    debounceMs: number = HOVER_DEBOUNCE_MS,
  ) {
    this.io = io;
    this.emit = emit;
    this.isSettled = isSettled;
    this.debounceMs = debounceMs;
  }

  /** Debounced hover decode; moving on before the delay cancels it. */
  hover(sample: number, cell: Cell): void {
    this.cancelHover();
    const key = cellKey(sample, cell);
    if (this.isSettled(key) || this.inflight.has(key)) return;
    this.hoverTimer = this.io.setTimer(() => {
      this.hoverTimer = null;
      this.issue(sample, cell, false);
    }, this.debounceMs);
  }

  /** Drop any pending hover decode (pointer left the map). */
  cancelHover(): void {
    if (this.hoverTimer !== null) {
      this.io.clearTimer(this.hoverTimer);
      this.hoverTimer = null;
    }
  }

  /**
   * Immediate decode for a click. `force` re-issues even when a response
   * is already in flight or settled (used to retry after an error); the
   * newer request then supersedes the older one.
   */
  select(sample: number, cell: Cell, force = false): void {
    this.issue(sample, cell, force);
  }

  private issue(sample: number, cell: Cell, force: boolean): void {
    const key = cellKey(sample, cell);
    if (!force && (this.isSettled(key) || this.inflight.has(key))) return;
    this.sequence += 1;
    const ticket = this.sequence;
    this.inflight.set(key, ticket);
    this.emit({ kind: "forecast-requested", sample, cell });
    void getJson<ForecastPayload>(
      forecastUrl(sample, cell[0], cell[1]),
      this.io.fetchImpl,
    ).then((outcome: FetchOutcome<ForecastPayload>) => {
      if (this.inflight.get(key) !== ticket) return; // superseded
      this.inflight.delete(key);
      if (outcome.ok) {
        this.emit({
          kind: "forecast-loaded",
          sample,
          cell,
          payload: outcome.payload,
          raw: outcome.raw,
        });
      } else {
        this.emit({
          kind: "forecast-rejected",
          sample,
          cell,
          status: outcome.status,
          message: outcome.message,
        });
      }
    });
  }
}
