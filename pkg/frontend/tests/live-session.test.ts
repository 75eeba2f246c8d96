// End-to-end against the real session service: spawns `gazecontrol serve`
// over TCP, drives a scene, measures gaze-to-paint latency, records a
// session, and validates/trains on the saved dataset through the CLI.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { SessionClient } from '../src/client.js';
import { TcpTransport } from '../src/tcp-transport.js';
import { UiSceneState } from '../src/scene-state.js';
import { SceneRenderer } from '../src/renderer.js';
import type { Canvas2DLike } from '../src/renderer.js';
import type { GazePayload } from '../src/protocol.js';

const PYTHON = process.env.GAZECONTROL_PYTHON ?? 'python3';
const REPO_ROOT = path.resolve(__dirname, '..', '..');

const WEIGHTS = {
  model_kind: 'product',
  w: {
    waving: 8.0, pointing: 4.0, talking: 3.0, entering: 2.0,
    leaving: 1.5, crossed_arms: 2.0, conversation: 3.0, moving: 1.2,
  },
  alpha: 0.25,
  sigma_deg: 60.0,
  w_box: 0.3,
  cue_mask: ['waving', 'pointing', 'talking', 'entering', 'leaving',
             'crossed_arms', 'conversation', 'moving'],
};

class NullContext implements Canvas2DLike {
  fillStyle: string | object = '';
  strokeStyle: string | object = '';
  lineWidth = 1;
  font = '';
  clearRect() {}
  beginPath() {}
  arc() {}
  moveTo() {}
  lineTo() {}
  rect() {}
  fill() {}
  stroke() {}
  fillText() {}
}

let server: ChildProcess;
let port: number;
let tmpDir: string;

beforeAll(async () => {
  tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), 'puppeteer-test-'));
  const weightsPath = path.join(tmpDir, 'weights.json');
  fs.writeFileSync(weightsPath, JSON.stringify(WEIGHTS));
  server = spawn(PYTHON, [
    '-m', 'gazecontrol.cli', 'serve',
    '--weights', weightsPath, '--variant', '2d', '--m', '6',
    '--port', '0', '--tick-s', '0.02', '--record-dir', tmpDir,
  ], { cwd: REPO_ROOT, stdio: ['ignore', 'pipe', 'pipe'] });
  port = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error('server did not start')), 15000);
    let out = '';
    server.stdout!.on('data', (chunk) => {
      out += chunk.toString();
      const m = out.match(/listening on tcp (\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(parseInt(m[1], 10));
      }
    });
    server.stderr!.on('data', (chunk) => process.stderr.write(chunk));
    server.on('exit', (code) => reject(new Error(`server exited early: ${code}`)));
  });
}, 30000);

afterAll(() => {
  server?.kill();
});

describe('live puppeteer session', () => {
  it('runs the full operator loop: drive, watch, record, validate, train', async () => {
    const transport = await TcpTransport.connect('127.0.0.1', port);
    const client = new SessionClient(transport);
    const ready = await client.hello();
    expect(ready.variant).toBe('2d');
    expect(ready.labels).toEqual(['P1', 'P2', 'P3', 'P4', 'Box']);

    const scene = new UiSceneState('2d');
    scene.setPresent(0, true);
    scene.setPresent(1, true);

    const renderer = new SceneRenderer(new NullContext(), 720, 560);
    const paintLatencies: number[] = [];
    let lastGaze: GazePayload | null = null;
    client.onGaze((gaze) => {
      const t0 = performance.now();
      lastGaze = gaze;
      renderer.draw(scene, ready.labels, gaze, true);
      paintLatencies.push(performance.now() - t0);
    });

    const recordPath = path.join(tmpDir, 'session.jsonl');
    client.startRecord(recordPath);
    client.startHeartbeat(scene);

    // the operator acts: P2 waves, then P1 takes over
    scene.setFlag(1, 'waving', true);
    await new Promise((r) => setTimeout(r, 1500));
    expect(lastGaze).not.toBeNull();
    expect(lastGaze!.target).toBe(1);

    scene.setFlag(1, 'waving', false);
    scene.setFlag(0, 'waving', true);
    await new Promise((r) => setTimeout(r, 1500));
    expect(lastGaze!.target).toBe(0);
    expect(lastGaze!.pan_deg).toBeCloseTo(-60, 0);

    // keep the session running long enough for a trainable recording
    await new Promise((r) => setTimeout(r, 2000));
    const saved = await client.stopRecord();
    client.stopHeartbeat();
    client.close();

    expect(saved.examples).toBeGreaterThan(100);
    expect(fs.existsSync(saved.path)).toBe(true);

    // gaze-message-to-paint latency budget
    const mean = paintLatencies.reduce((a, b) => a + b, 0) / paintLatencies.length;
    expect(paintLatencies.length).toBeGreaterThan(50);
    expect(mean).toBeLessThan(100);

    // the recording round-trips through the CLI: validate, then train
    const validate = spawnSync(PYTHON, [
      '-m', 'gazecontrol.cli', 'validate', '--dataset', saved.path,
    ], { cwd: REPO_ROOT });
    expect(validate.status).toBe(0);

    const ckpt = path.join(tmpDir, 'session-model.ckpt');
    const train = spawnSync(PYTHON, [
      '-m', 'gazecontrol.cli', 'train', '--data', saved.path,
      '--arch', 'lstm', '--seed', '1', '--out', ckpt,
      '--max-epochs', '1', '--patience', '1',
    ], { cwd: REPO_ROOT, timeout: 120000 });
    expect(train.status).toBe(0);
    expect(fs.existsSync(ckpt)).toBe(true);
  }, 120000);

  it('server rejects overcapacity scenes but keeps the session alive', async () => {
    const transport = await TcpTransport.connect('127.0.0.1', port);
    const client = new SessionClient(transport);
    await client.hello();
    // hand-built overcapacity payload (the UI cannot produce one)
    const bogus = {
      characters: Array.from({ length: 5 }, () => ({
        present: true, distance_m: 1.5, angle_deg: 0,
        waving: false, pointing: false, talking: false, movement: 0,
      })),
    };
    (client as unknown as { send: (t: string, p: object) => void });
    transport.send({ type: 'scene_update', seq: 99, payload: bogus });
    await new Promise((r) => setTimeout(r, 300));
    expect(client.lastError).toContain('at most 4');
    // the connection still answers
    const scene = new UiSceneState('2d');
    scene.setPresent(0, true);
    client.pushScene(scene);
    await new Promise((r) => setTimeout(r, 300));
    client.close();
  }, 20000);
});
