// Keyboard bindings: digits pick a slot, letters toggle that slot's state.
// Every accepted keystroke mutates the scene state, which the client's
// heartbeat coalesces into at most one scene_update per server tick.

import type { UiSceneState, Action3D } from './scene-state.js';

export interface KeyResult {
  handled: boolean;
  note: string;
}

const ACTIONS_3D: Record<string, Action3D> = {
  s: 'stand',
  w: 'wave',
  x: 'cross',
  c: 'converse',
  p: 'point',
};

export class SceneControls {
  readonly scene: UiSceneState;
  selected = 0;

  constructor(scene: UiSceneState) {
    this.scene = scene;
  }

  handleKey(key: string): KeyResult {
    const k = key.toLowerCase();
    const slotIdx = parseInt(k, 10);
    if (!Number.isNaN(slotIdx) && slotIdx >= 1) {
      if (slotIdx > this.scene.capacity) {
        return { handled: false, note: `no slot ${slotIdx} (capacity ${this.scene.capacity})` };
      }
      this.selected = slotIdx - 1;
      return { handled: true, note: `selected P${slotIdx}` };
    }
    const slot = this.selected;
    if (k === 'e') {
      const present = this.scene.slots[slot].present;
      this.scene.setPresent(slot, !present);
      return { handled: true, note: `P${slot + 1} ${present ? 'leaves' : 'enters'}` };
    }
    if (k === 'n') {
      return this.scene.toggle(slot, 'near')
        ? { handled: true, note: `P${slot + 1} near/far` }
        : { handled: false, note: `P${slot + 1} is absent` };
    }
    if (this.scene.variant === '2d') {
      const toggles: Record<string, 'waving' | 'pointing' | 'talking'> = {
        w: 'waving', p: 'pointing', t: 'talking',
      };
      if (k in toggles) {
        return this.scene.toggle(slot, toggles[k])
          ? { handled: true, note: `P${slot + 1} ${toggles[k]}` }
          : { handled: false, note: `P${slot + 1} is absent` };
      }
    } else {
      if (k in ACTIONS_3D) {
        return this.scene.setAction(slot, ACTIONS_3D[k])
          ? { handled: true, note: `P${slot + 1} ${ACTIONS_3D[k]}` }
          : { handled: false, note: `P${slot + 1} is absent` };
      }
      if (k === 't') {
        const s = this.scene.slots[slot];
        if (!s.present) return { handled: false, note: `P${slot + 1} is absent` };
        return this.scene.setAction(slot, s.action, !s.speaking)
          ? { handled: true, note: `P${slot + 1} speech toggled` }
          : { handled: false, note: `P${slot + 1} is absent` };
      }
    }
    return { handled: false, note: `unbound key '${key}'` };
  }
}

export const KEY_HELP_2D =
  '1-4 select slot | e enter/leave | n near/far | w wave | p point | t talk | r record';
export const KEY_HELP_3D =
  '1-3 select slot | e enter/leave | n near/far | s/w/x/c/p action | t speech | r record';
