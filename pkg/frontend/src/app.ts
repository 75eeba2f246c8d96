// Browser entry point: connects to the session service over WebSocket,
// wires keyboard controls to the scene state, and repaints on every gaze
// message through a latest-state buffer (render never lags the network).
//
// Start the service with a WebSocket endpoint first:
//   gazecontrol serve --weights w.json --variant 2d --m 12 --ws-port 7061

import { SessionClient } from './client.js';
import { SceneControls, KEY_HELP_2D, KEY_HELP_3D } from './controls.js';
import { SceneRenderer } from './renderer.js';
import { UiSceneState } from './scene-state.js';
import { WsTransport } from './ws-transport.js';
import type { GazePayload, Variant } from './protocol.js';

const WS_URL = (new URLSearchParams(location.search)).get('ws')
  ?? 'ws://127.0.0.1:7061';

const canvas = document.getElementById('scene') as HTMLCanvasElement;
const status = document.getElementById('status') as HTMLElement;
const help = document.getElementById('help') as HTMLElement;

let latestGaze: GazePayload | null = null;
let needsPaint = true;

async function connect(): Promise<void> {
  status.textContent = `connecting to ${WS_URL}...`;
  let transport: WsTransport;
  try {
    transport = await WsTransport.connect(WS_URL);
  } catch {
    status.textContent = `connection failed, retrying...`;
    setTimeout(connect, 1500);
    return;
  }
  const client = new SessionClient(transport);
  const ready = await client.hello();
  const variant = ready.variant as Variant;
  const scene = new UiSceneState(variant);
  const controls = new SceneControls(scene);
  const renderer = new SceneRenderer(
    canvas.getContext('2d') as unknown as import('./renderer.js').Canvas2DLike,
    canvas.width, canvas.height);

  status.textContent = `connected (${variant}, m=${ready.m}, tick ${ready.tick_s.toFixed(3)} s)`;
  help.textContent = variant === '2d' ? KEY_HELP_2D : KEY_HELP_3D;

  client.onGaze((gaze) => {
    latestGaze = gaze;
    needsPaint = true;
  });
  client.onClose(() => {
    status.textContent = 'disconnected - reconnecting...';
    renderer.draw(scene, ready.labels, latestGaze, false);
    setTimeout(connect, 1500);
  });

  let recording = false;
  window.onkeydown = (ev: KeyboardEvent) => {
    if (ev.key.toLowerCase() === 'r') {
      if (!recording) {
        client.startRecord();
        recording = true;
        status.textContent = 'recording...';
      } else {
        client.stopRecord().then((saved) => {
          status.textContent = `saved ${saved.examples} examples to ${saved.path}`;
        }).catch((err) => { status.textContent = String(err); });
        recording = false;
      }
      return;
    }
    const result = controls.handleKey(ev.key);
    if (result.handled) needsPaint = true;
    help.textContent = `${variant === '2d' ? KEY_HELP_2D : KEY_HELP_3D} | ${result.note}`;
  };

  client.startHeartbeat(scene);

  const paint = () => {
    if (needsPaint) {
      renderer.draw(scene, ready.labels, latestGaze, client.connected);
      needsPaint = false;
    }
    requestAnimationFrame(paint);
  };
  paint();
}

connect();
