/**
 * Cooccurrence heatmap model: a symmetric grid over the ranked drugs where
 * every off-diagonal cell carries the significance class straight from the
 * API payload (categorical, never rescaled client-side).
 */

import type { CooccurrenceCell, CellClass } from './types.js';

export type GridClass = CellClass | 'Self';

export interface HeatmapCellView {
  row: string;
  col: string;
  cssClass: string;
  cell: CooccurrenceCell | null;
}

export interface HeatmapModel {
  drugs: string[];
  grid: HeatmapCellView[][];
}

const CSS: Record<GridClass, string> = {
  Positive: 'cell-positive',
  Negative: 'cell-negative',
  Random: 'cell-random',
  Self: 'cell-self',
};

/** Drug order: first appearance in the payload's lower-triangular listing. */
export function drugOrder(cells: CooccurrenceCell[]): string[] {
  const seen: string[] = [];
  for (const cell of cells) {
    for (const drug of [cell.drug_b, cell.drug_a]) {
      if (!seen.includes(drug)) seen.push(drug);
    }
  }
  return seen;
}

export function buildHeatmap(cells: CooccurrenceCell[]): HeatmapModel {
  const drugs = drugOrder(cells);
  const lookup = new Map<string, CooccurrenceCell>();
  for (const cell of cells) {
    lookup.set(`${cell.drug_a}|${cell.drug_b}`, cell);
    lookup.set(`${cell.drug_b}|${cell.drug_a}`, cell);
  }
  const grid = drugs.map((row) =>
    drugs.map((col): HeatmapCellView => {
      if (row === col) {
        return { row, col, cssClass: CSS.Self, cell: null };
      }
      const cell = lookup.get(`${row}|${col}`) ?? null;
      const cls: GridClass = cell ? cell.classification : 'Random';
      return { row, col, cssClass: CSS[cls], cell };
    }),
  );
  return { drugs, grid };
}
