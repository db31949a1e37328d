/** Single-page workbench: threshold tuning on the left, coherence
 * exploration on the right. All numbers render straight from service
 * responses; stale responses are dropped by version. */

import { ApiError, WorkbenchClient } from "./api.js";
import type { Heatmap, LasaResponse, SessionInfo } from "./api.js";
import { abstractionOverlay, certaintyPoints, fcamGrid, gtmGrid, heatmapCells } from "./render.js";
import type { HeatmapModel } from "./render.js";
import { DebouncedFetcher } from "./tuning.js";

const client = new WorkbenchClient("");

interface TuningState {
  combo: string;
  mode: "avg" | "max";
  s1: number;
  s2: number;
  sample_ids: string[];
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(message: string, isError = false): void {
  const node = el<HTMLDivElement>("status");
  node.textContent = message;
  node.className = isError ? "status error" : "status";
}

let session: SessionInfo | null = null;

function comboFromSelectors(withStep3: boolean): string {
  const order = el<HTMLSelectElement>("combo-order").value;
  const s1 = el<HTMLSelectElement>("combo-step1").value;
  const s2 = el<HTMLSelectElement>("combo-step2").value;
  const s3 = el<HTMLSelectElement>("combo-step3").value;
  return `${order}-${s1}${s2}${withStep3 ? s3 : ""}`;
}

function tuningState(): TuningState {
  return {
    combo: comboFromSelectors(true),
    mode: el<HTMLSelectElement>("threshold-mode").value as "avg" | "max",
    s1: Number(el<HTMLInputElement>("slider-s1").value),
    s2: Number(el<HTMLInputElement>("slider-s2").value),
    sample_ids: [el<HTMLSelectElement>("sample-select").value],
  };
}

const palette = { line: "#b8c4d0", high: "#d84343", medium: "#e09c28", curve: "#3572b0" };

function drawOverlay(response: LasaResponse): void {
  const sample = response.samples[0];
  const model = abstractionOverlay(sample);
  const canvas = el<HTMLCanvasElement>("overlay-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const values = model.original.map((p) => p.value);
  const lo = Math.min(...values, -1);
  const hi = Math.max(...values, 1);
  const pad = 14;
  const sx = (pos: number) => pad + (pos / Math.max(1, values.length - 1)) * (canvas.width - 2 * pad);
  const sy = (v: number) => canvas.height - pad - ((v - lo) / (hi - lo || 1)) * (canvas.height - 2 * pad);

  ctx.strokeStyle = palette.line;
  ctx.lineWidth = 1;
  ctx.beginPath();
  model.original.forEach((p, i) => (i === 0 ? ctx.moveTo(sx(p.position), sy(p.value)) : ctx.lineTo(sx(p.position), sy(p.value))));
  ctx.stroke();

  if (el<HTMLInputElement>("toggle-interpolated").checked && model.interpolated.length > 1) {
    ctx.strokeStyle = palette.curve;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    model.interpolated.forEach((p, i) => (i === 0 ? ctx.moveTo(sx(p.position), sy(p.value)) : ctx.lineTo(sx(p.position), sy(p.value))));
    ctx.stroke();
  }

  for (const marker of model.markers) {
    ctx.fillStyle = marker.kind === "high" ? palette.high : palette.medium;
    ctx.beginPath();
    ctx.arc(sx(marker.position), sy(marker.value), marker.kind === "high" ? 4 : 5, 0, Math.PI * 2);
    ctx.fill();
    if (marker.kind === "medium") {
      ctx.strokeStyle = "#7a5310";
      ctx.stroke();
    }
  }

  el<HTMLDivElement>("empty-state").style.display = model.empty ? "block" : "none";
  el<HTMLSpanElement>("readout-reduction").textContent = `${(model.reduction * 100).toFixed(1)}%`;
  el<HTMLSpanElement>("readout-thresholds").textContent = `t1=${sample.t1.toPrecision(4)} t2=${
    Number.isFinite(sample.t2) ? sample.t2.toPrecision(4) : "-inf"
  }`;
  const complexity = sample.complexity;
  el<HTMLSpanElement>("readout-complexity").textContent = complexity
    ? Object.entries(complexity)
        .filter(([key]) => key !== "data_reduction")
        .map(([key, value]) => `${key}=${value === null ? "n/a" : Number(value).toPrecision(3)}`)
        .join("  ")
    : "n/a (too few kept points)";
}

const lasaFetcher = new DebouncedFetcher<TuningState, LasaResponse>({
  send: (state) => {
    if (!session) throw new Error("no session");
    return client.lasa(session.id, state);
  },
  onResult: (result) => {
    setStatus(`abstraction ok (version ${result.version})`);
    drawOverlay(result);
  },
  onError: (error) => {
    setStatus(error instanceof ApiError ? error.detail : String(error), true);
  },
  delayMs: 180,
});

function requestLasa(): void {
  if (!session) return;
  el<HTMLSpanElement>("label-s1").textContent = el<HTMLInputElement>("slider-s1").value;
  el<HTMLSpanElement>("label-s2").textContent = el<HTMLInputElement>("slider-s2").value;
  lasaFetcher.update(tuningState());
}

function drawHeatmapModel(ctx: CanvasRenderingContext2D, model: HeatmapModel, x0: number, y0: number, size: number): void {
  const cell = size / Math.max(model.rows, model.cols);
  for (const c of model.cells) {
    const heat = Math.round(255 * (1 - c.intensity));
    ctx.fillStyle = c.value >= 0 ? `rgb(255,${heat},${heat})` : `rgb(${heat},${heat},255)`;
    ctx.fillRect(x0 + c.x * cell, y0 + c.y * cell, Math.ceil(cell), Math.ceil(cell));
  }
}

function drawHeatmap(doc: Heatmap): void {
  const canvas = el<HTMLCanvasElement>("heatmap-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (doc.kind === "fcam") {
    const grid = fcamGrid(doc);
    const s = doc.symbols.length;
    const tileSize = Math.floor(Math.min(canvas.width, canvas.height) / s) - 4;
    for (const tile of grid.tiles) {
      drawHeatmapModel(ctx, tile.heatmap, tile.gridCol * (tileSize + 4), tile.gridRow * (tileSize + 4), tileSize);
    }
    el<HTMLSpanElement>("heatmap-scale").textContent = `scale max ${grid.maxValue.toPrecision(4)} (rows: from symbol, cols: to symbol, origin bottom-left)`;
  } else {
    const grid = gtmGrid(doc);
    drawHeatmapModel(ctx, grid.heatmap, 0, 0, Math.min(canvas.width, canvas.height));
    el<HTMLSpanElement>("heatmap-scale").textContent = `scale max ${grid.heatmap.maxValue.toPrecision(4)} (rows: symbol, cols: position, origin bottom-left)`;
  }
}

function drawCertainty(curve: Record<string, number>): void {
  const canvas = el<HTMLCanvasElement>("certainty-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const points = certaintyPoints(curve);
  if (points.length === 0) return;
  const pad = 22;
  const sx = (i: number) => pad + (i / Math.max(1, points.length - 1)) * (canvas.width - 2 * pad);
  const sy = (acc: number) => canvas.height - pad - acc * (canvas.height - 2 * pad);
  ctx.strokeStyle = palette.curve;
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((p, i) => (i === 0 ? ctx.moveTo(sx(i), sy(p.accuracy)) : ctx.lineTo(sx(i), sy(p.accuracy))));
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  points.forEach((p, i) => {
    ctx.fillText(`${p.step}%`, sx(i) - 8, canvas.height - 6);
    ctx.fillText(p.accuracy.toFixed(3), sx(i) - 12, sy(p.accuracy) - 6);
  });
}

async function createSession(): Promise<void> {
  const kind = el<HTMLSelectElement>("fixture-kind").value;
  const seed = Number(el<HTMLInputElement>("fixture-seed").value);
  const symbols = Number(el<HTMLInputElement>("symbol-count").value);
  setStatus("creating session...");
  try {
    session = await client.createSession({
      symbol_count: symbols,
      dataset: { fixture: { kind, params: {}, seed } },
      attention: {
        synthetic: { layers: 2, heads: 2, d_model: 8, d_k: 4, mode: "random", seed },
      },
    });
  } catch (error) {
    setStatus(error instanceof ApiError ? error.detail : String(error), true);
    return;
  }
  setStatus(`session ${session.id}: n=${session.n}, classes=[${session.classes.join(", ")}]`);
  const sampleSelect = el<HTMLSelectElement>("sample-select");
  sampleSelect.innerHTML = "";
  for (const sid of [...session.samples.train.slice(0, 25), ...session.samples.test.slice(0, 25)]) {
    const option = document.createElement("option");
    option.value = sid;
    option.textContent = `sample ${sid}`;
    sampleSelect.appendChild(option);
  }
  const classSelect = el<HTMLSelectElement>("class-select");
  classSelect.innerHTML = "";
  for (const cls of session.classes) {
    const option = document.createElement("option");
    option.value = String(cls);
    option.textContent = `class ${cls}`;
    classSelect.appendChild(option);
  }
  requestLasa();
}

async function buildAndShowGcr(): Promise<void> {
  if (!session) return;
  const variant = el<HTMLSelectElement>("variant-select").value;
  const combo = comboFromSelectors(false);
  const cls = Number(el<HTMLSelectElement>("class-select").value);
  setStatus(`building ${combo}/${variant}...`);
  try {
    await client.buildGcr(session.id, [variant], [combo]);
    const [heatmap, classified, curve] = await Promise.all([
      client.heatmap(session.id, variant, combo, cls),
      client.classify(session.id, variant, combo),
      client.certaintyCurve(session.id, variant, combo),
    ]);
    drawHeatmap(heatmap);
    drawCertainty({ "100": classified.accuracy, ...curve.curve });
    el<HTMLSpanElement>("readout-accuracy").textContent = classified.accuracy.toFixed(4);
    setStatus(`model ${combo}/${variant} ready`);
  } catch (error) {
    setStatus(error instanceof ApiError ? error.detail : String(error), true);
  }
}

function wire(): void {
  el<HTMLButtonElement>("btn-session").addEventListener("click", () => void createSession());
  el<HTMLButtonElement>("btn-gcr").addEventListener("click", () => void buildAndShowGcr());
  for (const id of [
    "combo-order",
    "combo-step1",
    "combo-step2",
    "combo-step3",
    "threshold-mode",
    "sample-select",
  ]) {
    el<HTMLSelectElement>(id).addEventListener("change", requestLasa);
  }
  el<HTMLInputElement>("slider-s1").addEventListener("input", requestLasa);
  el<HTMLInputElement>("slider-s2").addEventListener("input", requestLasa);
  el<HTMLInputElement>("toggle-interpolated").addEventListener("change", requestLasa);
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  wire();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wire);
}
