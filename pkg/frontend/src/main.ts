/**
 * Browser entry point: builds the explorer layout, wires user events and
 * API payloads into the reducer, and repaints the canvases on every state
 * change. All numerical work stays server-side; this file only routes
 * events and draws.
 */

import {
  actionmapUrl,
  getJson,
  healthUrl,
  motionmapUrl,
  samplesUrl,
} from "./api.js";
import type {
  ActionMapPayload,
  HealthPayload,
  MotionMapPayload,
  SampleInfo,
} from "./api.js";
import {
  cellAtPoint,
  drawHeatmap,
  drawPlaybackView,
  drawStackedSummary,
  heatmapGeometry,
} from "./draw.js";
import type { Painter } from "./draw.js";
import { ForecastScheduler } from "./scheduler.js";
import {
  activeCell,
  activeEntry,
  availableLabels,
  cellKey,
  decodeSelection,
  dimPredicate,
  encodeSelection,
  forecastNotice,
  frameCount,
  initialState,
  playbackReady,
  reduce,
} from "./state.js";
import type { ViewEvent, ViewState } from "./state.js";

const PLAYBACK_TICK_MS = 60;

type Dispatch = (event: ViewEvent) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (HTMLElement | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

interface Ui {
  sampleSelect: HTMLSelectElement;
  labelSelect: HTMLSelectElement;
  banner: HTMLDivElement;
  health: HTMLSpanElement;
  heatmap: HTMLCanvasElement;
  hoverReadout: HTMLSpanElement;
  playback: HTMLCanvasElement;
  summary: HTMLCanvasElement;
  playButton: HTMLButtonElement;
  scrubber: HTMLInputElement;
  frameLabel: HTMLSpanElement;
  notice: HTMLDivElement;
  usedCell: HTMLSpanElement;
  payloadText: HTMLPreElement;
}

function buildLayout(root: HTMLElement): Ui {
  const sampleSelect = el("select", { id: "sample-select" });
  const labelSelect = el("select", { id: "label-select" });
  const banner = el("div", { class: "banner", hidden: "hidden" });
  const health = el("span", { class: "health" }, "connecting…");
  const heatmap = el("canvas", { width: "480", height: "480", class: "heatmap" });
  const hoverReadout = el("span", { class: "readout" }, "—");
  const playback = el("canvas", { width: "560", height: "330", class: "panel-canvas" });
  const summary = el("canvas", { width: "560", height: "330", class: "panel-canvas" });
  const playButton = el("button", { disabled: "disabled" }, "play");
  const scrubber = el("input", {
    type: "range",
    min: "0",
    max: "0",
    value: "0",
    disabled: "disabled",
  });
  const frameLabel = el("span", { class: "readout" }, "—");
  const notice = el("div", { class: "notice" });
  const usedCell = el("span", { class: "readout" });
  const payloadText = el("pre", { class: "payload" });

  root.append(
    el(
      "header",
      {},
      el("h1", {}, "motion forecast explorer"),
      health,
    ),
    banner,
    el(
      "main",
      {},
      el(
        "section",
        { class: "controls" },
        el("label", {}, "sample ", sampleSelect),
        el("label", {}, "action filter ", labelSelect),
      ),
      el(
        "div",
        { class: "columns" },
        el(
          "section",
          { class: "map-pane" },
          el("h2", {}, "future heatmap · red crosses mark modes"),
          heatmap,
          el("div", {}, hoverReadout),
        ),
        el(
          "section",
          { class: "forecast-pane" },
          el("h2", {}, "decoded forecast"),
          notice,
          playback,
          el(
            "div",
            { class: "transport" },
            playButton,
            scrubber,
            frameLabel,
            usedCell,
          ),
          el("h2", {}, "stacked summary"),
          summary,
          el(
            "details",
            {},
            el("summary", {}, "forecast payload (as served)"),
            payloadText,
          ),
        ),
      ),
    ),
  );

  return {
    sampleSelect,
    labelSelect,
    banner,
    health,
    heatmap,
    hoverReadout,
    playback,
    summary,
    playButton,
    scrubber,
    frameLabel,
    notice,
    usedCell,
    payloadText,
  };
}

const painter = (canvas: HTMLCanvasElement): Painter =>
  canvas.getContext("2d") as unknown as Painter;

function renderSampleOptions(ui: Ui, state: ViewState): void {
  if (ui.sampleSelect.options.length === state.samples.length && state.samples.length > 0) {
    return;
  }
  ui.sampleSelect.replaceChildren(
    ...state.samples.map((s) =>
      el(
        "option",
        { value: String(s.id) },
        `${s.id} · ${s.action_label} (${s.observed_frames}→${s.future_frames})`,
      ),
    ),
  );
  ui.labelSelect.replaceChildren(
    el("option", { value: "" }, "all actions"),
    ...availableLabels(state).map((label) => el("option", { value: label }, label)),
  );
}

function render(ui: Ui, state: ViewState): void {
  renderSampleOptions(ui, state);
  if (state.selectedSample !== null) {
    ui.sampleSelect.value = String(state.selectedSample);
  }
  ui.labelSelect.value = state.labelFilter ?? "";

  ui.banner.hidden = state.banner === null;
  ui.banner.textContent = state.banner ?? "";

  const map =
    state.selectedSample !== null ? state.motionmaps[state.selectedSample] : undefined;
  if (map) {
    drawHeatmap(painter(ui.heatmap), ui.heatmap.width, ui.heatmap.height, map, {
      hovered: state.hoveredCell,
      pinned: state.pinnedCell,
      dimmed: dimPredicate(state),
    });
  } else {
    const p = painter(ui.heatmap);
    p.clearRect(0, 0, ui.heatmap.width, ui.heatmap.height);
  }
  const hovered = state.hoveredCell;
  ui.hoverReadout.textContent = hovered
    ? `cell (${hovered[0]}, ${hovered[1]})`
    : "hover to inspect · click to pin";

  const noticeText = forecastNotice(state);
  ui.notice.textContent = noticeText ?? "";
  ui.notice.hidden = noticeText === null;

  const entry = activeEntry(state);
  const ready = entry !== null && entry.status === "ready";
  ui.playButton.disabled = !playbackReady(state);
  ui.scrubber.disabled = !playbackReady(state);
  ui.playButton.textContent = state.playing ? "pause" : "play";

  if (ready) {
    const total = frameCount(entry);
    const observed = entry.payload.reconstruction.length;
    ui.scrubber.max = String(total - 1);
    ui.scrubber.value = String(state.playbackFrame);
    const phase = state.playbackFrame < observed ? "observation" : "forecast";
    ui.frameLabel.textContent = `frame ${state.playbackFrame + 1} / ${total} · ${phase}`;
    const requested = activeCell(state);
    const used = entry.payload.used_cell;
    const fellBack =
      requested !== null && (used[0] !== requested[0] || used[1] !== requested[1]);
    ui.usedCell.textContent = fellBack
      ? `requested (${requested?.[0]}, ${requested?.[1]}) → decoded populated cell (${used[0]}, ${used[1]})`
      : `decoded cell (${used[0]}, ${used[1]})`;
    ui.payloadText.textContent = entry.raw;
    drawPlaybackView(
      painter(ui.playback),
      ui.playback.width,
      ui.playback.height,
      entry.payload,
      state.playbackFrame,
    );
    drawStackedSummary(
      painter(ui.summary),
      ui.summary.width,
      ui.summary.height,
      entry.payload,
    );
  } else {
    ui.frameLabel.textContent = "—";
    ui.usedCell.textContent = "";
    ui.payloadText.textContent = "";
    painter(ui.playback).clearRect(0, 0, ui.playback.width, ui.playback.height);
    painter(ui.summary).clearRect(0, 0, ui.summary.width, ui.summary.height);
  }

  const hash = encodeSelection(state);
  const target = hash ? `#${hash}` : "";
  if (window.location.hash !== target) {
    history.replaceState(null, "", target || window.location.pathname);
  }
}

async function loadSampleMaps(
  state: ViewState,
  sample: number,
  dispatch: Dispatch,
): Promise<void> {
  const fetchImpl = window.fetch.bind(window);
  if (!state.motionmaps[sample]) {
    const outcome = await getJson<MotionMapPayload>(motionmapUrl(sample), fetchImpl);
    if (outcome.ok) {
      dispatch({ kind: "motionmap-loaded", sample, payload: outcome.payload });
    } else {
      dispatch({ kind: "fetch-failed", message: `heatmap: ${outcome.message}` });
    }
  }
  if (!state.actionmaps[sample]) {
    const outcome = await getJson<ActionMapPayload>(actionmapUrl(sample), fetchImpl);
    if (outcome.ok) {
      dispatch({ kind: "actionmap-loaded", sample, payload: outcome.payload });
    } else {
      dispatch({ kind: "fetch-failed", message: `action map: ${outcome.message}` });
    }
  }
}

export async function boot(root: HTMLElement): Promise<void> {
  const ui = buildLayout(root);
  const fetchImpl = window.fetch.bind(window);

  let state = initialState;
  const dispatch: Dispatch = (event) => {
    state = reduce(state, event);
    render(ui, state);
  };

  const scheduler = new ForecastScheduler(
    {
      fetchImpl,
      setTimer: (fn, ms) => window.setTimeout(fn, ms),
      clearTimer: (handle) => window.clearTimeout(handle as number),
    },
    dispatch,
    (key) => {
      const entry = state.forecasts[key];
      return entry !== undefined && (entry.status === "ready" || entry.status === "empty");
    },
  );

  const selectSample = (sample: number): void => {
    dispatch({ kind: "sample-selected", sample });
    void loadSampleMaps(state, sample, dispatch);
  };

  ui.sampleSelect.addEventListener("change", () => {
    selectSample(Number(ui.sampleSelect.value));
  });
  ui.labelSelect.addEventListener("change", () => {
    dispatch({
      kind: "label-filter-set",
      label: ui.labelSelect.value === "" ? null : ui.labelSelect.value,
    });
  });

  const cellFromEvent = (event: MouseEvent) => {
    const sample = state.selectedSample;
    if (sample === null) return null;
    const map = state.motionmaps[sample];
    if (!map) return null;
    const rect = ui.heatmap.getBoundingClientRect();
    const geom = heatmapGeometry(ui.heatmap.width, ui.heatmap.height, map.m);
    const x = ((event.clientX - rect.left) / rect.width) * ui.heatmap.width;
    const y = ((event.clientY - rect.top) / rect.height) * ui.heatmap.height;
    return { sample, cell: cellAtPoint(geom, map.m, x, y) };
  };

  ui.heatmap.addEventListener("mousemove", (event) => {
    const hit = cellFromEvent(event);
    if (!hit) return;
    if (hit.cell === null) {
      dispatch({ kind: "hover-cleared" });
      scheduler.cancelHover();
      return;
    }
    const previous = state.hoveredCell;
    if (previous && previous[0] === hit.cell[0] && previous[1] === hit.cell[1]) return;
    dispatch({ kind: "cell-hovered", cell: hit.cell });
    scheduler.hover(hit.sample, hit.cell);
  });
  ui.heatmap.addEventListener("mouseleave", () => {
    dispatch({ kind: "hover-cleared" });
    scheduler.cancelHover();
  });
  ui.heatmap.addEventListener("click", (event) => {
    const hit = cellFromEvent(event);
    if (!hit || hit.cell === null) return;
    dispatch({ kind: "cell-pinned", cell: hit.cell });
    const entry = state.forecasts[cellKey(hit.sample, hit.cell)];
    scheduler.select(hit.sample, hit.cell, entry?.status === "error");
  });

  ui.playButton.addEventListener("click", () => {
    dispatch({ kind: "playback-toggled" });
  });
  ui.scrubber.addEventListener("input", () => {
    dispatch({ kind: "frame-set", frame: Number(ui.scrubber.value) });
  });
  window.setInterval(() => {
    if (state.playing) dispatch({ kind: "frame-advanced" });
  }, PLAYBACK_TICK_MS);

  const healthOutcome = await getJson<HealthPayload>(healthUrl(), fetchImpl);
  ui.health.textContent = healthOutcome.ok
    ? `checkpoint ${healthOutcome.payload.checkpoint_hash.slice(0, 12)}`
    : "service unreachable";

  const samplesOutcome = await getJson<SampleInfo[]>(samplesUrl(), fetchImpl);
  if (!samplesOutcome.ok) {
    dispatch({ kind: "fetch-failed", message: `samples: ${samplesOutcome.message}` });
    return;
  }
  dispatch({ kind: "samples-loaded", samples: samplesOutcome.payload });

  const fromHash = decodeSelection(window.location.hash);
  const first = samplesOutcome.payload[0];
  const restored =
    fromHash && samplesOutcome.payload.some((s) => s.id === fromHash.sample)
      ? fromHash
      : first
        ? { sample: first.id, cell: null }
        : null;
  if (restored) {
    selectSample(restored.sample);
    if (restored.cell) {
      // Re-pin once the heatmap is known so the range guard can verify it.
      let attempts = 0;
      const id = window.setInterval(() => {
        attempts += 1;
        if (attempts > 100) {
          window.clearInterval(id);
          return;
        }
        if (state.selectedSample === null) return;
        if (!state.motionmaps[state.selectedSample]) return;
        window.clearInterval(id);
        if (restored.cell) {
          dispatch({ kind: "cell-pinned", cell: restored.cell });
          scheduler.select(restored.sample, restored.cell);
        }
      }, 50);
    }
  }
}

const rootElement = document.getElementById("app");
if (rootElement) {
  void boot(rootElement);
}
