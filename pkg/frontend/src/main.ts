/**
 * Browser entry point. Connects to the bridge's WebSocket gateway,
 * renders frames to a canvas, relays keyboard actions, and keeps a HUD of
 * session statistics plus the switch-value strip.
 */

import { SwitchHeatmap } from './heatmap.js';
import { KeySink } from './input.js';
import {
  parseServerMessage,
  serializeAck,
  serializeAction,
  serializeQuit,
  type Hello,
} from './protocol.js';
import { RoadRenderer } from './render.js';
import { SessionStats } from './stats.js';

const params = new URLSearchParams(location.search);
const wsUrl = params.get('ws') ?? `ws://${location.hostname || 'localhost'}:8765`;

const canvas = document.createElement('canvas');
canvas.width = 1100;
canvas.height = 260;
const hud = document.createElement('pre');
hud.style.font = '13px monospace';
const strip = document.createElement('canvas');
strip.width = 1100;
strip.height = 18;
document.body.style.background = '#101014';
document.body.style.color = '#e6e6ee';
document.body.append(canvas, strip, hud);

const ctx = canvas.getContext('2d');
const stripCtx = strip.getContext('2d');
if (!ctx || !stripCtx) {
  throw new Error('canvas 2d context unavailable');
}

const stats = new SessionStats();
const heat = new SwitchHeatmap(Math.floor(strip.width / 9));
const keys = new KeySink();
let renderer: RoadRenderer | null = null;
let hello: Hello | null = null;

window.addEventListener('keydown', (e) => {
  if (e.key.startsWith('Arrow')) e.preventDefault();
  keys.handle(e);
});
window.addEventListener('keyup', (e) => keys.handle(e));

function drawStrip(): void {
  if (!stripCtx) return;
  stripCtx.fillStyle = '#101014';
  stripCtx.fillRect(0, 0, strip.width, strip.height);
  const cells = heat.cells();
  cells.forEach((cell, i) => {
    stripCtx.fillStyle = cell.color;
    stripCtx.fillRect(i * 9, 2, 8, strip.height - 4);
  });
}

function hudText(extra: string): string {
  let agg = 'no finished episodes yet';
  if (stats.episodes.length > 0) {
    const a = stats.aggregate();
    agg =
      `episodes ${a.episodes}  success ${(a.success_rate * 100).toFixed(1)}%  ` +
      `collision ${(a.collision_rate * 100).toFixed(1)}%  ` +
      `breach ${(a.breach_rate * 100).toFixed(1)}%  ` +
      `avg speed ${a.avg_speed_kmh.toFixed(1)} km/h`;
  }
  const keysHelp =
    'keys: Up accelerate, Down decelerate, Right switch lane right';
  return `${extra}\n${agg}\n${keysHelp}`;
}

hud.textContent = hudText(`connecting to ${wsUrl} ...`);

const ws = new WebSocket(wsUrl);
let buffer = '';

ws.onmessage = (event) => {
  buffer += String(event.data);
  const lines = buffer.split('\n');
  buffer = lines.pop() ?? '';
  for (const line of lines) {
    if (line.length > 0) handleLine(line);
  }
  // gateway relays one JSON object per text frame; trailing partials only
  // happen on raw TCP, but flush anyway if the frame ended cleanly
  if (buffer.length > 0) {
    try {
      handleLine(buffer);
      buffer = '';
    } catch {
      /* wait for the rest */
    }
  }
};

ws.onclose = () => {
  hud.textContent = hudText('connection closed');
};

function handleLine(line: string): void {
  const msg = parseServerMessage(line);
  stats.consume(msg);
  switch (msg.type) {
    case 'hello':
      hello = msg;
      renderer = new RoadRenderer(msg);
      hud.textContent = hudText(`connected, mode ${msg.mode}`);
      break;
    case 'episode_start':
      renderer?.setRoster(msg);
      heat.clear();
      break;
    case 'frame':
      heat.push(msg.q);
      if (renderer && ctx) {
        renderer.draw(ctx, { width: canvas.width, height: canvas.height }, msg);
      }
      drawStrip();
      if (hello && hello.mode === 'human') {
        ws.send(serializeAction(msg.seq, keys.take()));
      } else {
        ws.send(serializeAck(msg.seq));
      }
      hud.textContent = hudText(`mode ${hello?.mode ?? '?'}`);
      break;
    case 'episode_end':
      hud.textContent = hudText(
        `episode ${msg.episode} ended: ${msg.outcome} ` +
          `(${msg.steps} steps, reward ${msg.reward.toFixed(3)})`,
      );
      break;
    case 'error':
      hud.textContent = hudText(`server error: ${msg.detail}`);
      break;
    case 'bye':
      hud.textContent = hudText('session complete');
      break;
  }
}

window.addEventListener('beforeunload', () => {
  if (ws.readyState === WebSocket.OPEN) ws.send(serializeQuit());
});
