import { describe, expect, it } from 'vitest';
import { KeySink } from '../src/input.js';
import {
  ACCELERATE,
  DECELERATE,
  NO_ACTION,
  SWITCH_RIGHT,
} from '../src/protocol.js';

const down = (key: string) => ({ type: 'keydown', key });
const up = (key: string) => ({ type: 'keyup', key });

describe('KeySink', () => {
  it('defaults to the no-op action', () => {
    expect(new KeySink().take()).toBe(NO_ACTION);
  });

  it('holds accelerate while ArrowUp is down', () => {
    const k = new KeySink();
    k.handle(down('ArrowUp'));
    expect(k.take()).toBe(ACCELERATE);
    expect(k.take()).toBe(ACCELERATE);
    k.handle(up('ArrowUp'));
    expect(k.take()).toBe(NO_ACTION);
  });

  it('prefers braking when both vertical keys are held', () => {
    const k = new KeySink();
    k.handle(down('ArrowUp'));
    k.handle(down('ArrowDown'));
    expect(k.take()).toBe(DECELERATE);
  });

  it('latches one lane switch per physical press', () => {
    const k = new KeySink();
    k.handle(down('ArrowRight'));
    expect(k.take()).toBe(SWITCH_RIGHT);
    expect(k.take()).toBe(NO_ACTION);
    // auto-repeat keydown while held must not re-latch
    k.handle(down('ArrowRight'));
    expect(k.take()).toBe(NO_ACTION);
    k.handle(up('ArrowRight'));
    k.handle(down('ArrowRight'));
    expect(k.take()).toBe(SWITCH_RIGHT);
  });

  it('lets a pending switch preempt held vertical keys once', () => {
    const k = new KeySink();
    k.handle(down('ArrowDown'));
    k.handle(down('ArrowRight'));
    expect(k.take()).toBe(SWITCH_RIGHT);
    expect(k.take()).toBe(DECELERATE);
  });

  it('ignores unrelated keys', () => {
    const k = new KeySink();
    k.handle(down('a'));
    k.handle(down('Enter'));
    expect(k.take()).toBe(NO_ACTION);
  });

  it('reset clears held state and pending switches', () => {
    const k = new KeySink();
    k.handle(down('ArrowUp'));
    k.handle(down('ArrowRight'));
    k.reset();
    expect(k.take()).toBe(NO_ACTION);
  });
});
