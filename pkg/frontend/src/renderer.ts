// Top-down scene renderer: characters plotted by angle/distance around the
// robot head, the head avatar rotated to the commanded pan angle, and a
// per-label probability bar chart fed by gaze messages.
//
// Layout math is pure (layoutScene) so tests can check geometry without a
// real canvas; draw() only issues 2D-context calls against that layout.

import type { GazePayload } from './protocol.js';
import type { UiSceneState } from './scene-state.js';
import { STATIONS, FAR_M } from './scene-state.js';

export interface CharacterDot {
  slot: number;
  x: number;
  y: number;
  present: boolean;
  label: string;
}

export interface Bar {
  label: string;
  x: number;
  y: number;
  width: number;
  height: number;
  value: number;
}

export interface SceneLayout {
  head: { x: number; y: number; radius: number; panDeg: number };
  dots: CharacterDot[];
  box: { x: number; y: number } | null;
  bars: Bar[];
}

const BAR_AREA_H = 80;
const MAX_RANGE_M = FAR_M + 1.0;

/** Polar placement: angle 0 points straight up from the head. */
const place = (cx: number, cy: number, scale: number, angleDeg: number, distM: number) => {
  const rad = (angleDeg * Math.PI) / 180;
  return {
    x: cx + Math.sin(rad) * distM * scale,
    y: cy - Math.cos(rad) * distM * scale,
  };
};

export function layoutScene(
  scene: UiSceneState,
  labels: string[],
  gaze: GazePayload | null,
  width: number,
  height: number,
): SceneLayout {
  const sceneH = height - BAR_AREA_H;
  const cx = width / 2;
  const cy = sceneH - 20;
  const scale = (sceneH - 60) / MAX_RANGE_M;
  const dots: CharacterDot[] = scene.slots.map((s, i) => {
    const angle = STATIONS[scene.variant][i];
    const dist = s.present ? (s.near ? 1.5 : 3.0) : MAX_RANGE_M;
    const pos = place(cx, cy, scale, angle, dist);
    return { slot: i, ...pos, present: s.present, label: `P${i + 1}` };
  });
  const box = scene.variant === '2d' ? place(cx, cy, scale, 0, 1.0) : null;

  // probability bars: heights are the probabilities themselves (they sum to
  // 1), scaled into the bar area so the filled fraction mirrors the model
  const probs = gaze?.probs ?? labels.map(() => 0);
  const slotW = width / Math.max(labels.length, 1);
  const bars: Bar[] = labels.map((label, i) => {
    const value = probs[i] ?? 0;
    const h = value * (BAR_AREA_H - 18);
    return {
      label,
      x: i * slotW + slotW * 0.15,
      y: height - h - 14,
      width: slotW * 0.7,
      height: h,
      value,
    };
  });
  return {
    head: { x: cx, y: cy, radius: 16, panDeg: gaze?.pan_deg ?? 0 },
    dots,
    box,
    bars,
  };
}

// the subset of CanvasRenderingContext2D the renderer touches; tests can
// substitute a recording fake
export interface Canvas2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  fillStyle: string | object;
  strokeStyle: string | object;
  lineWidth: number;
  font: string;
}

export class SceneRenderer {
  private ctx: Canvas2DLike;
  private width: number;
  private height: number;
  lastLatencyMs = 0;

  constructor(ctx: Canvas2DLike, width: number, height: number) {
    this.ctx = ctx;
    this.width = width;
    this.height = height;
  }

  draw(scene: UiSceneState, labels: string[], gaze: GazePayload | null,
       connected: boolean): SceneLayout {
    const t0 = performance.now();
    const layout = layoutScene(scene, labels, gaze, this.width, this.height);
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.width, this.height);

    for (const dot of layout.dots) {
      ctx.beginPath();
      ctx.fillStyle = dot.present ? '#2b6cb0' : '#cbd5e0';
      ctx.arc(dot.x, dot.y, dot.present ? 12 : 6, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = '#1a202c';
      ctx.font = '12px sans-serif';
      ctx.fillText(dot.label, dot.x - 8, dot.y - 16);
    }
    if (layout.box) {
      ctx.beginPath();
      ctx.fillStyle = '#b7791f';
      ctx.rect(layout.box.x - 8, layout.box.y - 8, 16, 16);
      ctx.fill();
      ctx.fillText('Box', layout.box.x - 10, layout.box.y - 12);
    }

    // head avatar: circle plus a pan-direction ray
    const head = layout.head;
    ctx.beginPath();
    ctx.fillStyle = connected ? '#2f855a' : '#a0aec0';
    ctx.arc(head.x, head.y, head.radius, 0, Math.PI * 2);
    ctx.fill();
    const rad = (head.panDeg * Math.PI) / 180;
    ctx.beginPath();
    ctx.strokeStyle = '#22543d';
    ctx.lineWidth = 3;
    ctx.moveTo(head.x, head.y);
    ctx.lineTo(head.x + Math.sin(rad) * head.radius * 2.2,
               head.y - Math.cos(rad) * head.radius * 2.2);
    ctx.stroke();

    for (const bar of layout.bars) {
      ctx.beginPath();
      ctx.fillStyle = '#4a5568';
      ctx.rect(bar.x, bar.y, bar.width, bar.height);
      ctx.fill();
      ctx.fillStyle = '#1a202c';
      ctx.fillText(bar.label, bar.x, this.height - 2);
    }
    if (!connected) {
      ctx.fillStyle = '#c53030';
      ctx.font = '16px sans-serif';
      ctx.fillText('disconnected - reconnecting...', 12, 20);
    }
    this.lastLatencyMs = performance.now() - t0;
    return layout;
  }
}
