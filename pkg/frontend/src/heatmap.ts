/**
 * Rolling strip of the lane-switch Q-value. Each frame with Q estimates
 * appends one cell; cells are colored by where the switch-right value
 * sits between the buffer's min and max, cold blue to hot red.
 */

import { SWITCH_RIGHT } from './protocol.js';

export interface HeatCell {
  value: number;
  /** 0..1 position between buffer min and max (0.5 when flat). */
  norm: number;
  color: string;
}

const COLD: [number, number, number] = [40, 80, 200];
const HOT: [number, number, number] = [220, 50, 40];

function lerpColor(t: number): string {
  const c = COLD.map((lo, i) => Math.round(lo + (HOT[i] - lo) * t));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

export class SwitchHeatmap {
  private values: number[] = [];

  constructor(readonly capacity = 120) {
    if (capacity < 1) throw new Error('capacity must be positive');
  }

  push(q: number[] | null): void {
    if (q === null || q.length <= SWITCH_RIGHT) return;
    this.values.push(q[SWITCH_RIGHT]);
    if (this.values.length > this.capacity) this.values.shift();
  }

  clear(): void {
    this.values = [];
  }

  get size(): number {
    return this.values.length;
  }

  cells(): HeatCell[] {
    if (this.values.length === 0) return [];
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of this.values) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    const span = hi - lo;
    return this.values.map((value) => {
      const norm = span > 0 ? (value - lo) / span : 0.5;
      return { value, norm, color: lerpColor(norm) };
    });
  }
}
