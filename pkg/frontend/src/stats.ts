/**
 * Session statistics computed purely from the message stream.
 *
 * The HUD never trusts the server's running aggregates; it rebuilds every
 * number from frames and episode_end messages, in the same arithmetic
 * order the backend's log ingester uses (sequential float64 sums), so the
 * two agree bit for bit on the same session.
 */

import type { Aggregate, EpisodeEnd, Frame, ServerMessage } from './protocol.js';

export interface EpisodeResult {
  episode: number;
  steps: number;
  reward: number;
  outcome: string;
  avg_speed: number;
}

interface Accumulator {
  episode: number;
  steps: number;
  reward: number;
  speedSum: number;
}

export class SessionStats {
  readonly episodes: EpisodeResult[] = [];
  private current: Accumulator | null = null;

  consume(msg: ServerMessage): void {
    switch (msg.type) {
      case 'episode_start':
        this.current = {
          episode: msg.episode,
          steps: 0,
          reward: 0,
          speedSum: 0,
        };
        break;
      case 'frame':
        this.onFrame(msg);
        break;
      case 'episode_end':
        this.onEpisodeEnd(msg);
        break;
      default:
        break;
    }
  }

  private onFrame(f: Frame): void {
    // step 0 is the seed frame before any action applies
    if (f.step === 0) return;
    if (this.current === null || this.current.episode !== f.episode) {
      this.current = { episode: f.episode, steps: 0, reward: 0, speedSum: 0 };
    }
    this.current.steps += 1;
    this.current.reward += f.reward;
    this.current.speedSum += f.ego.speed;
  }

  private onEpisodeEnd(e: EpisodeEnd): void {
    const acc = this.current;
    if (acc === null || acc.episode !== e.episode || acc.steps === 0) {
      throw new Error(`episode_end for ${e.episode} without frames`);
    }
    this.episodes.push({
      episode: this.episodes.length,
      steps: acc.steps,
      reward: acc.reward,
      outcome: e.outcome,
      avg_speed: acc.speedSum / acc.steps,
    });
    this.current = null;
  }

  aggregate(): Aggregate {
    const n = this.episodes.length;
    if (n === 0) throw new Error('no finished episodes');
    const count: Record<string, number> = {
      success: 0,
      collision: 0,
      breach: 0,
      timeout: 0,
    };
    for (const e of this.episodes) {
      count[e.outcome] = (count[e.outcome] ?? 0) + 1;
    }
    let speedSum = 0;
    for (const e of this.episodes) speedSum += e.avg_speed;
    return {
      episodes: n,
      success_rate: count['success'] / n,
      collision_rate: count['collision'] / n,
      breach_rate: count['breach'] / n,
      timeout_rate: count['timeout'] / n,
      avg_speed_kmh: (speedSum / n) * 3.6,
    };
  }
}
