// Editable scene state behind the puppeteer controls. Mirrors the server's
// variant constraints: slot capacity, station angles, and the per-variant
// action vocabulary.

import type { Character, Character2D, Character3D, Variant } from './protocol.js';

export const STATIONS: Record<Variant, number[]> = {
  '2d': [-60, -30, 30, 60],
  '3d': [-45, 0, 45],
};

export const NEAR_M = 1.5;
export const FAR_M = 3.0;

export type Action2D = 'waving' | 'pointing' | 'talking';
export type Action3D = 'stand' | 'wave' | 'cross' | 'converse' | 'point';

const CHARACTERISTIC: Record<Action3D, number> = {
  stand: 1,
  wave: 4,
  cross: 5,
  converse: 6,
  point: 8,
};

export interface SlotState {
  present: boolean;
  near: boolean;
  // 2d toggles
  waving: boolean;
  pointing: boolean;
  talking: boolean;
  // 3d action
  action: Action3D;
  speaking: boolean;
  pointTarget: number | null;
}

const emptySlot = (): SlotState => ({
  present: false,
  near: true,
  waving: false,
  pointing: false,
  talking: false,
  action: 'stand',
  speaking: false,
  pointTarget: null,
});

/** The operator-editable scene; enforces capacity and slot constraints. */
export class UiSceneState {
  readonly variant: Variant;
  readonly capacity: number;
  readonly slots: SlotState[];
  private dirty = true;

  constructor(variant: Variant) {
    this.variant = variant;
    this.capacity = STATIONS[variant].length;
    this.slots = Array.from({ length: this.capacity }, emptySlot);
  }

  presentCount(): number {
    return this.slots.filter((s) => s.present).length;
  }

  /** Returns false when the slot does not exist or capacity would overflow. */
  setPresent(slot: number, present: boolean): boolean {
    if (slot < 0 || slot >= this.capacity) return false;
    this.slots[slot].present = present;
    if (!present) {
      // absent characters drop all activity, matching the server's invariant
      Object.assign(this.slots[slot], emptySlot());
    }
    this.dirty = true;
    return true;
  }

  toggle(slot: number, key: 'near' | Action2D): boolean {
    if (slot < 0 || slot >= this.capacity || !this.slots[slot].present) return false;
    const s = this.slots[slot];
    if (key === 'near') s.near = !s.near;
    else s[key] = !s[key];
    this.dirty = true;
    return true;
  }

  setFlag(slot: number, key: 'near' | Action2D, value: boolean): boolean {
    if (slot < 0 || slot >= this.capacity || !this.slots[slot].present) return false;
    this.slots[slot][key] = value;
    this.dirty = true;
    return true;
  }

  setAction(slot: number, action: Action3D, speaking = false): boolean {
    if (slot < 0 || slot >= this.capacity || !this.slots[slot].present) return false;
    const s = this.slots[slot];
    s.action = action;
    s.speaking = action === 'converse' ? true : speaking;
    if (action === 'point') {
      const others = this.slots
        .map((x, i) => (x.present && i !== slot ? i : -1))
        .filter((i) => i >= 0);
      s.pointTarget = others.length ? others[0] : null;
    } else {
      s.pointTarget = null;
    }
    this.dirty = true;
    return true;
  }

  consumeDirty(): boolean {
    const was = this.dirty;
    this.dirty = false;
    return was;
  }

  /** scene_update payload in the timeline character schema. */
  toPayload(): { characters: Character[] } {
    const characters = this.slots.map((s, i): Character => {
      const base = {
        present: s.present,
        distance_m: s.present ? (s.near ? NEAR_M : FAR_M) : 0,
        angle_deg: s.present ? STATIONS[this.variant][i] : 0,
      };
      if (this.variant === '2d') {
        const c: Character2D = {
          ...base,
          waving: s.present && s.waving,
          pointing: s.present && s.pointing,
          talking: s.present && s.talking,
          movement: 0,
        };
        return c;
      }
      const pointedAt = this.slots.filter(
        (o) => o.present && o.action === 'point' && o.pointTarget === i,
      ).length;
      const c: Character3D = {
        ...base,
        characteristic: s.present ? CHARACTERISTIC[s.action] : 1,
        talking: s.present && (s.speaking || s.action === 'converse'),
        pointed_at_count: s.present ? pointedAt : 0,
      };
      return c;
    });
    return { characters };
  }
}
