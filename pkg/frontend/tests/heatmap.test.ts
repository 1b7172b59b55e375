import { describe, expect, it } from 'vitest';
import { SwitchHeatmap } from '../src/heatmap.js';

const q = (sw: number): number[] => [0, 0, 0, sw, 0];

describe('SwitchHeatmap', () => {
  it('tracks the switch-right component only', () => {
    const h = new SwitchHeatmap(10);
    h.push(q(1));
    h.push(q(3));
    h.push(q(2));
    const cells = h.cells();
    expect(cells.map((c) => c.value)).toEqual([1, 3, 2]);
    expect(cells[0].norm).toBe(0);
    expect(cells[1].norm).toBe(1);
    expect(cells[2].norm).toBe(0.5);
  });

  it('ignores frames without q estimates', () => {
    const h = new SwitchHeatmap(10);
    h.push(null);
    h.push([1, 2]);
    expect(h.size).toBe(0);
  });

  it('evicts oldest entries past capacity', () => {
    const h = new SwitchHeatmap(3);
    for (let i = 0; i < 5; i++) h.push(q(i));
    expect(h.cells().map((c) => c.value)).toEqual([2, 3, 4]);
  });

  it('centers the normalization when all values are equal', () => {
    const h = new SwitchHeatmap(4);
    h.push(q(7));
    h.push(q(7));
    for (const cell of h.cells()) expect(cell.norm).toBe(0.5);
  });

  it('colors the extremes differently', () => {
    const h = new SwitchHeatmap(4);
    h.push(q(-1));
    h.push(q(1));
    const [cold, hot] = h.cells();
    expect(cold.color).not.toBe(hot.color);
    expect(cold.color).toMatch(/^rgb\(\d+,\d+,\d+\)$/);
  });

  it('clears on demand', () => {
    const h = new SwitchHeatmap(4);
    h.push(q(1));
    h.clear();
    expect(h.cells()).toEqual([]);
  });
});
