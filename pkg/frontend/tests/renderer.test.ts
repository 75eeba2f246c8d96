import { describe, expect, it } from 'vitest';

import { layoutScene, SceneRenderer } from '../src/renderer.js';
import type { Canvas2DLike } from '../src/renderer.js';
import { UiSceneState } from '../src/scene-state.js';
import type { GazePayload } from '../src/protocol.js';

const LABELS_2D = ['P1', 'P2', 'P3', 'P4', 'Box'];

const gaze = (panDeg: number, probs: number[] | null): GazePayload => ({
  tick: 0, t_s: 0, target: 1, pan_deg: panDeg, pan_rate_dps: 0, probs,
});

class FakeContext implements Canvas2DLike {
  calls: string[] = [];
  fillStyle: string | object = '';
  strokeStyle: string | object = '';
  lineWidth = 1;
  font = '';
  clearRect() { this.calls.push('clearRect'); }
  beginPath() { this.calls.push('beginPath'); }
  arc() { this.calls.push('arc'); }
  moveTo() { this.calls.push('moveTo'); }
  lineTo(x: number, y: number) { this.calls.push(`lineTo(${x.toFixed(1)},${y.toFixed(1)})`); }
  rect() { this.calls.push('rect'); }
  fill() { this.calls.push('fill'); }
  stroke() { this.calls.push('stroke'); }
  fillText(text: string) { this.calls.push(`text:${text}`); }
}

describe('layoutScene', () => {
  it('renders the avatar at the commanded pan angle (pass-through)', () => {
    const scene = new UiSceneState('2d');
    const layout = layoutScene(scene, LABELS_2D, gaze(-30, null), 720, 560);
    expect(layout.head.panDeg).toBe(-30);
  });

  it('bar heights are proportional to probabilities and sum to the unit area', () => {
    const scene = new UiSceneState('2d');
    const probs = [0.1, 0.4, 0.3, 0.15, 0.05];
    const layout = layoutScene(scene, LABELS_2D, gaze(0, probs), 720, 560);
    const total = layout.bars.reduce((acc, b) => acc + b.height, 0);
    const unit = layout.bars[0].height / probs[0];
    expect(total / unit).toBeCloseTo(1.0, 6); // normalized heights sum to 1
    for (let i = 0; i < probs.length; i++) {
      expect(layout.bars[i].height / unit).toBeCloseTo(probs[i], 6);
    }
  });

  it('no probabilities yet -> zero-height bars, no fabricated state', () => {
    const scene = new UiSceneState('2d');
    const layout = layoutScene(scene, LABELS_2D, null, 720, 560);
    expect(layout.bars.every((b) => b.height === 0)).toBe(true);
    expect(layout.head.panDeg).toBe(0);
  });

  it('present characters sit nearer the head than absent ghosts', () => {
    const scene = new UiSceneState('2d');
    scene.setPresent(0, true);
    const layout = layoutScene(scene, LABELS_2D, null, 720, 560);
    const head = layout.head;
    const d = (i: number) => Math.hypot(layout.dots[i].x - head.x, layout.dots[i].y - head.y);
    expect(d(0)).toBeLessThan(d(1));
  });

  it('3d scenes have no box marker', () => {
    const scene = new UiSceneState('3d');
    const layout = layoutScene(scene, ['P1', 'P2', 'P3'], null, 720, 560);
    expect(layout.box).toBeNull();
  });
});

describe('SceneRenderer', () => {
  it('paints within the latency budget and reports it', () => {
    const ctx = new FakeContext();
    const renderer = new SceneRenderer(ctx, 720, 560);
    const scene = new UiSceneState('2d');
    scene.setPresent(0, true);
    const t0 = performance.now();
    renderer.draw(scene, LABELS_2D, gaze(-30, [0.2, 0.2, 0.2, 0.2, 0.2]), true);
    const elapsed = performance.now() - t0;
    expect(elapsed).toBeLessThan(100); // paint budget, generous for CI
    expect(renderer.lastLatencyMs).toBeGreaterThanOrEqual(0);
    expect(ctx.calls).toContain('clearRect');
    expect(ctx.calls.filter((c) => c.startsWith('text:')).length).toBeGreaterThan(4);
  });

  it('shows the disconnect banner when the session drops', () => {
    const ctx = new FakeContext();
    const renderer = new SceneRenderer(ctx, 720, 560);
    renderer.draw(new UiSceneState('2d'), LABELS_2D, null, false);
    expect(ctx.calls.some((c) => c.startsWith('text:disconnected'))).toBe(true);
  });
});
