/**
 * Wire protocol for the simulator bridge.
 *
 * The server speaks line-delimited JSON over TCP (or a WebSocket gateway
 * that relays the same lines as text frames). Every message carries
 * `v: 1`. This module parses server messages into typed objects and
 * serializes both directions in a canonical key order, so
 * serialize(parse(serialize(x))) is byte-identical to serialize(x).
 */

export const PROTOCOL_VERSION = 1;

export const ACCELERATE = 0;
export const NO_ACTION = 1;
export const DECELERATE = 2;
export const SWITCH_RIGHT = 3;
export const OPTION = 4;

export const ACTION_NAMES = [
  'accelerate',
  'no_action',
  'decelerate',
  'switch_right',
  'option',
] as const;

export interface EgoFrame {
  lane: number;
  lat: number;
  speed: number;
  changing: boolean;
}

export interface VehicleFrame {
  id: number;
  lane: number;
  lat: number;
  y: number;
  speed: number;
  changing: boolean;
}

export interface RosterEntry {
  id: number;
  kind: string;
  width: number;
  length: number;
  adversarial: boolean;
}

export interface Aggregate {
  episodes: number;
  success_rate: number;
  collision_rate: number;
  breach_rate: number;
  timeout_rate: number;
  avg_speed_kmh: number;
}

export interface Hello {
  v: number;
  type: 'hello';
  mode: string;
  n_lanes: number;
  lane_width: number;
  range_half: number;
  dt: number;
  speed_limit: number;
  actions: string[];
  seed: number | null;
}

export interface EpisodeStart {
  v: number;
  type: 'episode_start';
  episode: number;
  sim_seed: number;
  vehicles: RosterEntry[];
}

export interface Frame {
  v: number;
  type: 'frame';
  seq: number;
  episode: number;
  step: number;
  reward: number;
  total_reward: number;
  action: number;
  agent_action: number | null;
  ego: EgoFrame;
  vehicles: VehicleFrame[];
  done: boolean;
  q: number[] | null;
}

export interface EpisodeEnd {
  v: number;
  type: 'episode_end';
  episode: number;
  outcome: string;
  steps: number;
  reward: number;
  running: Aggregate | null;
}

export interface ErrorMsg {
  v: number;
  type: 'error';
  detail: string;
}

export interface Bye {
  v: number;
  type: 'bye';
  summary: Record<string, unknown>;
}

export type ServerMessage =
  | Hello
  | EpisodeStart
  | Frame
  | EpisodeEnd
  | ErrorMsg
  | Bye;

export class ProtocolError extends Error {}

function fail(why: string): never {
  throw new ProtocolError(why);
}

function num(obj: Record<string, unknown>, key: string): number {
  const v = obj[key];
  if (typeof v !== 'number' || Number.isNaN(v)) {
    fail(`field ${key} must be a number`);
  }
  return v;
}

function int(obj: Record<string, unknown>, key: string): number {
  const v = num(obj, key);
  if (!Number.isInteger(v)) fail(`field ${key} must be an integer`);
  return v;
}

function bool(obj: Record<string, unknown>, key: string): boolean {
  const v = obj[key];
  if (typeof v !== 'boolean') fail(`field ${key} must be a boolean`);
  return v;
}

function str(obj: Record<string, unknown>, key: string): string {
  const v = obj[key];
  if (typeof v !== 'string') fail(`field ${key} must be a string`);
  return v;
}

function rec(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== 'object' || value === null || Array.isArray(value)) {
    fail(`${what} must be an object`);
  }
  return value as Record<string, unknown>;
}

function parseEgo(value: unknown): EgoFrame {
  const o = rec(value, 'ego');
  return {
    lane: int(o, 'lane'),
    lat: num(o, 'lat'),
    speed: num(o, 'speed'),
    changing: bool(o, 'changing'),
  };
}

function parseVehicle(value: unknown): VehicleFrame {
  const o = rec(value, 'vehicle');
  return {
    id: int(o, 'id'),
    lane: int(o, 'lane'),
    lat: num(o, 'lat'),
    y: num(o, 'y'),
    speed: num(o, 'speed'),
    changing: bool(o, 'changing'),
  };
}

function parseRoster(value: unknown): RosterEntry {
  const o = rec(value, 'roster entry');
  return {
    id: int(o, 'id'),
    kind: str(o, 'kind'),
    width: num(o, 'width'),
    length: num(o, 'length'),
    adversarial: bool(o, 'adversarial'),
  };
}

function parseAggregate(value: unknown): Aggregate | null {
  if (value === null || value === undefined) return null;
  const o = rec(value, 'aggregate');
  return {
    episodes: int(o, 'episodes'),
    success_rate: num(o, 'success_rate'),
    collision_rate: num(o, 'collision_rate'),
    breach_rate: num(o, 'breach_rate'),
    timeout_rate: num(o, 'timeout_rate'),
    avg_speed_kmh: num(o, 'avg_speed_kmh'),
  };
}

/** Parse one line from the server into a typed message. */
export function parseServerMessage(line: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    fail('not valid JSON');
  }
  const o = rec(raw, 'message');
  if (o['v'] !== PROTOCOL_VERSION) fail(`unsupported protocol version ${o['v']}`);
  const type = str(o, 'type');
  switch (type) {
    case 'hello':
      return {
        v: PROTOCOL_VERSION,
        type,
        mode: str(o, 'mode'),
        n_lanes: int(o, 'n_lanes'),
        lane_width: num(o, 'lane_width'),
        range_half: num(o, 'range_half'),
        dt: num(o, 'dt'),
        speed_limit: num(o, 'speed_limit'),
        actions: (o['actions'] as unknown[]).map((a) => {
          if (typeof a !== 'string') fail('actions must be strings');
          return a;
        }),
        seed: o['seed'] === null ? null : int(o, 'seed'),
      };
    case 'episode_start':
      return {
        v: PROTOCOL_VERSION,
        type,
        episode: int(o, 'episode'),
        sim_seed: int(o, 'sim_seed'),
        vehicles: (o['vehicles'] as unknown[]).map(parseRoster),
      };
    case 'frame': {
      const q = o['q'];
      return {
        v: PROTOCOL_VERSION,
        type,
        seq: int(o, 'seq'),
        episode: int(o, 'episode'),
        step: int(o, 'step'),
        reward: num(o, 'reward'),
        total_reward: num(o, 'total_reward'),
        action: int(o, 'action'),
        agent_action: o['agent_action'] === null ? null : int(o, 'agent_action'),
        ego: parseEgo(o['ego']),
        vehicles: (o['vehicles'] as unknown[]).map(parseVehicle),
        done: bool(o, 'done'),
        q:
          q === null
            ? null
            : (q as unknown[]).map((x) => {
                if (typeof x !== 'number') fail('q values must be numbers');
                return x;
              }),
      };
    }
    case 'episode_end':
      return {
        v: PROTOCOL_VERSION,
        type,
        episode: int(o, 'episode'),
        outcome: str(o, 'outcome'),
        steps: int(o, 'steps'),
        reward: num(o, 'reward'),
        running: parseAggregate(o['running']),
      };
    case 'error':
      return { v: PROTOCOL_VERSION, type, detail: str(o, 'detail') };
    case 'bye':
      return { v: PROTOCOL_VERSION, type, summary: rec(o['summary'], 'summary') };
    default:
      fail(`unknown message type ${type}`);
  }
}

/** Client -> server: apply `action` to the step after frame `seq`. */
export function serializeAction(seq: number, action: number): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: 'action', seq, action });
}

/** Client -> server: seen frame `seq`, no action requested. */
export function serializeAck(seq: number): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: 'ack', seq });
}

export function serializeQuit(): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: 'quit' });
}

/**
 * Canonical frame serialization: same key order the server emits, so a
 * parse/serialize cycle over our own output is byte-stable.
 */
export function serializeFrame(f: Frame): string {
  return JSON.stringify({
    v: f.v,
    type: f.type,
    seq: f.seq,
    episode: f.episode,
    step: f.step,
    reward: f.reward,
    total_reward: f.total_reward,
    action: f.action,
    agent_action: f.agent_action,
    ego: {
      lane: f.ego.lane,
      lat: f.ego.lat,
      speed: f.ego.speed,
      changing: f.ego.changing,
    },
    vehicles: f.vehicles.map((v) => ({
      id: v.id,
      lane: v.lane,
      lat: v.lat,
      y: v.y,
      speed: v.speed,
      changing: v.changing,
    })),
    done: f.done,
    q: f.q,
  });
}

/** Split a stream chunk into complete lines plus the unfinished tail. */
export function splitLines(buffer: string): { lines: string[]; rest: string } {
  const parts = buffer.split('\n');
  const rest = parts.pop() ?? '';
  return { lines: parts.filter((p) => p.length > 0), rest };
}
