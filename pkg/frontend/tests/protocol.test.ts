import { readFileSync } from 'node:fs';

import { describe, expect, it } from 'vitest';
import {
  NO_ACTION,
  ProtocolError,
  parseServerMessage,
  serializeAck,
  serializeAction,
  serializeFrame,
  serializeQuit,
  splitLines,
  type Frame,
} from '../src/protocol.js';

/** Deterministic 32-bit PRNG so failures reproduce. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomFrame(rnd: () => number, seq: number): Frame {
  const nVehicles = 1 + Math.floor(rnd() * 6);
  const vehicles = [];
  for (let i = 0; i < nVehicles; i++) {
    vehicles.push({
      id: i,
      lane: Math.floor(rnd() * 4),
      lat: rnd() * 8.4 - 0.35,
      y: rnd() * 200 - 100,
      speed: rnd() * 22.2,
      changing: rnd() < 0.2,
    });
  }
  const hasQ = rnd() < 0.5;
  return {
    v: 1,
    type: 'frame',
    seq,
    episode: Math.floor(rnd() * 50),
    step: Math.floor(rnd() * 8000),
    reward: rnd() < 0.3 ? -0.001 : rnd() * 20 - 10,
    total_reward: rnd() * 30 - 15,
    action: Math.floor(rnd() * 4),
    agent_action: rnd() < 0.4 ? null : Math.floor(rnd() * 5),
    ego: {
      lane: Math.floor(rnd() * 4),
      lat: rnd() * 8.4,
      speed: rnd() * 22.2,
      changing: rnd() < 0.3,
    },
    vehicles,
    done: rnd() < 0.1,
    q: hasQ ? Array.from({ length: 5 }, () => rnd() * 4 - 2) : null,
  };
}

describe('frame serialization', () => {
  it('is byte-stable across a parse/serialize cycle for 1000 random frames', () => {
    const rnd = mulberry32(0xc0ffee);
    for (let i = 0; i < 1000; i++) {
      const frame = randomFrame(rnd, i + 1);
      const first = serializeFrame(frame);
      const reparsed = parseServerMessage(first);
      expect(reparsed.type).toBe('frame');
      const second = serializeFrame(reparsed as Frame);
      expect(second).toBe(first);
    }
  });

  it('round-trips every field value exactly', () => {
    const rnd = mulberry32(1234);
    for (let i = 0; i < 200; i++) {
      const frame = randomFrame(rnd, i + 1);
      const back = parseServerMessage(serializeFrame(frame)) as Frame;
      expect(back).toEqual(frame);
    }
  });
});

describe('parseServerMessage validation', () => {
  it('rejects non-JSON lines', () => {
    expect(() => parseServerMessage('garbage{')).toThrow(ProtocolError);
  });

  it('rejects missing or wrong protocol versions', () => {
    expect(() => parseServerMessage('{"type":"bye","summary":{}}')).toThrow(
      ProtocolError,
    );
    expect(() =>
      parseServerMessage('{"v":2,"type":"bye","summary":{}}'),
    ).toThrow(ProtocolError);
  });

  it('rejects unknown message types', () => {
    expect(() => parseServerMessage('{"v":1,"type":"snack"}')).toThrow(
      ProtocolError,
    );
  });

  it('rejects frames with missing fields', () => {
    expect(() =>
      parseServerMessage('{"v":1,"type":"frame","seq":3}'),
    ).toThrow(ProtocolError);
  });

  it('rejects non-integer integer fields', () => {
    const line =
      '{"v":1,"type":"episode_end","episode":1.5,"outcome":"success",' +
      '"steps":3,"reward":1.0,"running":null}';
    expect(() => parseServerMessage(line)).toThrow(ProtocolError);
  });

  it('accepts an error message', () => {
    const msg = parseServerMessage('{"v":1,"type":"error","detail":"boom"}');
    expect(msg).toEqual({ v: 1, type: 'error', detail: 'boom' });
  });
});

describe('client messages', () => {
  it('serializes actions, acks, and quit in wire order', () => {
    expect(serializeAction(7, NO_ACTION)).toBe(
      '{"v":1,"type":"action","seq":7,"action":1}',
    );
    expect(serializeAck(12)).toBe('{"v":1,"type":"ack","seq":12}');
    expect(serializeQuit()).toBe('{"v":1,"type":"quit"}');
  });
});

describe('recorded session frames', () => {
  it('round-trips every recorded frame through the canonical form', () => {
    const raw = readFileSync(
      new URL('./fixtures/session_messages.jsonl', import.meta.url),
      'utf8',
    );
    let frames = 0;
    for (const line of raw.split('\n')) {
      if (!line) continue;
      const msg = parseServerMessage(line);
      if (msg.type !== 'frame') continue;
      frames += 1;
      const wire = serializeFrame(msg);
      expect(parseServerMessage(wire)).toEqual(msg);
      expect(serializeFrame(parseServerMessage(wire) as Frame)).toBe(wire);
    }
    expect(frames).toBeGreaterThan(1000);
  });
});

describe('splitLines', () => {
  it('separates complete lines from the unfinished tail', () => {
    const { lines, rest } = splitLines('{"a":1}\n{"b":2}\n{"c"');
    expect(lines).toEqual(['{"a":1}', '{"b":2}']);
    expect(rest).toBe('{"c"');
  });

  it('drops empty lines and handles a clean tail', () => {
    const { lines, rest } = splitLines('x\n\ny\n');
    expect(lines).toEqual(['x', 'y']);
    expect(rest).toBe('');
  });
});
