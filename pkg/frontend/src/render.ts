/** Pure view-model builders. Every number is a pass-through from the
 * service response; the only work done here is layout (including the
 * bottom-left origin convention for heatmaps). */

import type { FcamHeatmap, GtmHeatmap, LasaSample } from "./api.js";

export type MarkerKind = "high" | "medium";

export interface OverlayMarker {
  position: number;
  value: number;
  kind: MarkerKind;
}

export interface OverlayModel {
  /** original series as a faint guide line */
  original: { position: number; value: number }[];
  /** kept points, emphasized; medium-collapsed points marked distinctly */
  markers: OverlayMarker[];
  /** positions with no kept point and no interpolation (rendered blank) */
  blankPositions: number[];
  /** defined segments of the interpolated validation curve */
  interpolated: { position: number; value: number }[];
  /** service-reported reduction, never recomputed client-side */
  reduction: number;
  empty: boolean;
}

export function abstractionOverlay(sample: LasaSample): OverlayModel {
  const markers: OverlayMarker[] = sample.kept.map(([position, value]) => ({
    position,
    value,
    kind: sample.provenance[position] === "high" ? "high" : "medium",
  }));
  const blankPositions: number[] = [];
  sample.interpolated.mask.forEach((defined, position) => {
    if (!defined) blankPositions.push(position);
  });
  const interpolated = sample.interpolated.values
    .map((value, position) => ({ position, value }))
    .filter((point) => sample.interpolated.mask[point.position]);
  return {
    original: sample.original.map((value, position) => ({ position, value })),
    markers,
    blankPositions,
    interpolated,
    reduction: sample.reduction,
    empty: markers.length === 0,
  };
}

export interface HeatCell {
  /** matrix indices as exported by the service */
  row: number;
  col: number;
  /** canvas cell coordinates; y = 0 is the TOP row of the canvas */
  x: number;
  y: number;
  value: number;
  /** per-class max-normalized intensity in [0, 1] */
  intensity: number;
}

export interface HeatmapModel {
  cells: HeatCell[];
  rows: number;
  cols: number;
  /** maximum of the class (the scale shown next to the canvas) */
  maxValue: number;
}

/** Lay out one matrix with the sequence origin in the bottom-left corner:
 * matrix row 0 (sequence start) lands at canvas row rows-1. */
export function heatmapCells(matrix: number[][], maxValue?: number): HeatmapModel {
  const rows = matrix.length;
  const cols = rows > 0 ? matrix[0].length : 0;
  let max = maxValue ?? 0;
  if (maxValue === undefined) {
    for (const row of matrix) for (const value of row) max = Math.max(max, Math.abs(value));
  }
  const cells: HeatCell[] = [];
  for (let row = 0; row < rows; row += 1) {
    for (let col = 0; col < cols; col += 1) {
      const value = matrix[row][col];
      cells.push({
        row,
        col,
        x: col,
        y: rows - 1 - row,
        value,
        intensity: max > 0 ? Math.abs(value) / max : 0,
      });
    }
  }
  return { cells, rows, cols, maxValue: max };
}

export interface FcamTile {
  fromSymbol: number;
  toSymbol: number;
  /** grid placement: tile row = from symbol, tile column = to symbol */
  gridRow: number;
  gridCol: number;
  heatmap: HeatmapModel;
}

export interface FcamGridModel {
  tiles: FcamTile[];
  symbols: string[];
  maxValue: number;
}

/** FCAM grid: tile (u, v) sits at grid row u, column v; the colour scale
 * is shared across the whole class (per-class max normalization). */
export function fcamGrid(heatmap: FcamHeatmap): FcamGridModel {
  let max = 0;
  for (const byTo of heatmap.tiles)
    for (const tile of byTo) for (const row of tile) for (const v of row) max = Math.max(max, Math.abs(v));
  const tiles: FcamTile[] = [];
  heatmap.tiles.forEach((byTo, fromSymbol) => {
    byTo.forEach((matrix, toSymbol) => {
      tiles.push({
        fromSymbol,
        toSymbol,
        gridRow: fromSymbol,
        gridCol: toSymbol,
        heatmap: heatmapCells(matrix, max),
      });
    });
  });
  return { tiles, symbols: heatmap.symbols, maxValue: max };
}

export interface GtmModel {
  heatmap: HeatmapModel;
  symbols: string[];
}

/** GTM: symbol rows over positions; symbol 0 (lowest value) at the bottom. */
export function gtmGrid(heatmap: GtmHeatmap): GtmModel {
  return { heatmap: heatmapCells(heatmap.matrix), symbols: heatmap.symbols };
}

export interface CurvePoint {
  step: number;
  accuracy: number;
}

/** Certainty steps ordered 100 -> 10 for the step chart. */
export function certaintyPoints(curve: Record<string, number>): CurvePoint[] {
  return Object.entries(curve)
    .map(([step, accuracy]) => ({ step: Number(step), accuracy }))
    .sort((a, b) => b.step - a.step);
}
