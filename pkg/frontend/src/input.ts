/**
 * Keyboard to action mapping.
 *
 * Up and Down are hold-to-act (accelerate / decelerate). Right arrow
 * latches a single lane switch per physical press; auto-repeat keydowns
 * while held do not re-latch. With nothing pressed the action is the
 * no-op.
 */

import { ACCELERATE, DECELERATE, NO_ACTION, SWITCH_RIGHT } from './protocol.js';

export interface KeyEventLike {
  type: string;
  key: string;
}

export class KeySink {
  private upHeld = false;
  private downHeld = false;
  private rightHeld = false;
  private switchPending = false;

  handle(evt: KeyEventLike): void {
    const down = evt.type === 'keydown';
    switch (evt.key) {
      case 'ArrowUp':
        this.upHeld = down;
        break;
      case 'ArrowDown':
        this.downHeld = down;
        break;
      case 'ArrowRight':
        if (down && !this.rightHeld) this.switchPending = true;
        this.rightHeld = down;
        break;
      default:
        break;
    }
  }

  /** Action for the next step; consumes a pending lane switch. */
  take(): number {
    if (this.switchPending) {
      this.switchPending = false;
      return SWITCH_RIGHT;
    }
    if (this.downHeld) return DECELERATE;
    if (this.upHeld) return ACCELERATE;
    return NO_ACTION;
  }

  reset(): void {
    this.upHeld = false;
    this.downHeld = false;
    this.rightHeld = false;
    this.switchPending = false;
  }
}
