import { describe, expect, it } from 'vitest';

import { buildHeatmap, drugOrder } from '../src/heatmap.js';
import type { CooccurrenceCell } from '../src/types.js';

function cell(a: string, b: string, cls: CooccurrenceCell['classification']): CooccurrenceCell {
  return {
    drug_a: a, drug_b: b, n_total: 100, n1: 30, n2: 20, q_obs: 10,
    expected: 6, p_lt: 0.9, p_gt: 0.2, classification: cls,
  };
}

// lower-triangular listing for ranked drugs [H, F, C]
const CELLS = [
  cell('FENTANYL', 'HEROIN', 'Positive'),
  cell('COCAINE', 'HEROIN', 'Negative'),
  cell('COCAINE', 'FENTANYL', 'Random'),
];

describe('heatmap model', () => {
  it('recovers the ranking order from the triangular payload', () => {
    expect(drugOrder(CELLS)).toEqual(['HEROIN', 'FENTANYL', 'COCAINE']);
  });

  it('classes match the payload classification on both triangles', () => {
    const model = buildHeatmap(CELLS);
    const at = (r: string, c: string) => {
      const i = model.drugs.indexOf(r);
      const j = model.drugs.indexOf(c);
      return model.grid[i][j];
    };
    expect(at('HEROIN', 'FENTANYL').cssClass).toBe('cell-positive');
    expect(at('FENTANYL', 'HEROIN').cssClass).toBe('cell-positive');
    expect(at('HEROIN', 'COCAINE').cssClass).toBe('cell-negative');
    expect(at('COCAINE', 'HEROIN').cssClass).toBe('cell-negative');
    expect(at('FENTANYL', 'COCAINE').cssClass).toBe('cell-random');
    expect(at('COCAINE', 'FENTANYL').cssClass).toBe('cell-random');
  });

  it('marks the diagonal as self with no payload cell', () => {
    const model = buildHeatmap(CELLS);
    for (let i = 0; i < model.drugs.length; i++) {
      expect(model.grid[i][i].cssClass).toBe('cell-self');
      expect(model.grid[i][i].cell).toBeNull();
    }
  });

  it('keeps the original cell attached for tooltips', () => {
    const model = buildHeatmap(CELLS);
    const view = model.grid[0][1]; // HEROIN x FENTANYL
    expect(view.cell?.q_obs).toBe(10);
    expect(view.cell?.classification).toBe('Positive');
  });
});
