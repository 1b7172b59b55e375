/**
 * Top-down road renderer. Longitudinal position maps to x (ego centered),
 * lanes stack down the y axis. Works against a small drawing interface so
 * tests can record calls instead of needing a real canvas.
 */

import type { EpisodeStart, Frame, Hello } from './protocol.js';

export interface DrawSurface {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  setLineDash(segments: number[]): void;
}

export interface Viewport {
  width: number;
  height: number;
}

const ROAD_TOP = 40;
const COLOR_ROAD = '#2b2b33';
const COLOR_LANE_LINE = '#8a8a96';
const COLOR_EGO = '#46c46e';
const COLOR_ADVERSARY = '#d8544a';
const COLOR_OTHER = '#9aa7bd';
const COLOR_CHANGING = '#e8c35a';
const COLOR_TEXT = '#e6e6ee';

export class RoadRenderer {
  private advers: Set<number> = new Set();
  private sizes: Map<number, { width: number; length: number }> = new Map();

  constructor(private readonly hello: Hello) {}

  setRoster(start: EpisodeStart): void {
    this.advers = new Set(
      start.vehicles.filter((r) => r.adversarial).map((r) => r.id),
    );
    this.sizes = new Map(
      start.vehicles.map((r) => [r.id, { width: r.width, length: r.length }]),
    );
  }

  /** x pixels per longitudinal meter. */
  private xScale(vp: Viewport): number {
    return vp.width / (2 * this.hello.range_half);
  }

  /** y pixels per lateral meter. */
  private yScale(vp: Viewport): number {
    const roadMeters = this.hello.n_lanes * this.hello.lane_width;
    return (vp.height - 2 * ROAD_TOP) / roadMeters;
  }

  draw(ctx: DrawSurface, vp: Viewport, frame: Frame): void {
    const sx = this.xScale(vp);
    const sy = this.yScale(vp);
    const roadHeight = this.hello.n_lanes * this.hello.lane_width * sy;

    ctx.fillStyle = '#17171c';
    ctx.fillRect(0, 0, vp.width, vp.height);
    ctx.fillStyle = COLOR_ROAD;
    ctx.fillRect(0, ROAD_TOP, vp.width, roadHeight);

    ctx.strokeStyle = COLOR_LANE_LINE;
    ctx.lineWidth = 1;
    ctx.setLineDash([12, 10]);
    for (let lane = 1; lane < this.hello.n_lanes; lane++) {
      const y = ROAD_TOP + lane * this.hello.lane_width * sy;
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(vp.width, y);
      ctx.stroke();
    }
    ctx.setLineDash([]);

    for (const v of frame.vehicles) {
      const size = this.sizes.get(v.id) ?? { width: 2, length: 4 };
      const px = (v.y + this.hello.range_half) * sx;
      const py = ROAD_TOP + v.lat * sy;
      const w = size.length * sx;
      const h = size.width * sy;
      if (v.id === 0) {
        ctx.fillStyle = COLOR_EGO;
      } else if (this.advers.has(v.id)) {
        ctx.fillStyle = COLOR_ADVERSARY;
      } else {
        ctx.fillStyle = COLOR_OTHER;
      }
      ctx.fillRect(px - w / 2, py - h / 2, w, h);
      if (v.changing) {
        ctx.strokeStyle = COLOR_CHANGING;
        ctx.lineWidth = 2;
        ctx.strokeRect(px - w / 2 - 2, py - h / 2 - 2, w + 4, h + 4);
      }
    }

    ctx.fillStyle = COLOR_TEXT;
    ctx.font = '13px monospace';
    const kmh = (frame.ego.speed * 3.6).toFixed(1);
    ctx.fillText(
      `ep ${frame.episode}  step ${frame.step}  ${kmh} km/h  ` +
        `reward ${frame.total_reward.toFixed(3)}`,
      12,
      20,
    );
  }
}
