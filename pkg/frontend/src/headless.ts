// Headless scripted session over TCP: drives a short scene where characters
// take turns waving and prints the head's responses. Useful without a
// browser: node --loader ts-node/esm src/headless.ts [host] [port]

import { SessionClient } from './client.js';
import { TcpTransport } from './tcp-transport.js';
import { UiSceneState } from './scene-state.js';
import type { Variant } from './protocol.js';

const host = process.argv[2] ?? '127.0.0.1';
const port = parseInt(process.argv[3] ?? '7060', 10);

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

async function main() {
  const transport = await TcpTransport.connect(host, port);
  const client = new SessionClient(transport);
  const ready = await client.hello();
  console.log(`connected: variant=${ready.variant} m=${ready.m} tick=${ready.tick_s}s`);

  const scene = new UiSceneState(ready.variant as Variant);
  scene.setPresent(0, true);
  scene.setPresent(1, true);
  client.onGaze((gaze) => {
    if (gaze.tick % 25 === 0) {
      console.log(`tick ${gaze.tick}: target=${gaze.target} pan=${gaze.pan_deg.toFixed(1)}`);
    }
  });
  client.startHeartbeat(scene);

  for (const waver of [0, 1, 0]) {
    if (ready.variant === '2d') {
      scene.slots.forEach((_, i) => scene.setFlag(i, 'waving', i === waver));
    } else {
      scene.setAction(waver, 'wave');
    }
    console.log(`P${waver + 1} waves`);
    await sleep(2000);
  }
  client.close();
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
