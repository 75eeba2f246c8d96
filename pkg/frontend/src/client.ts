// Session client: hello handshake, scene heartbeat at the server tick rate,
// gaze fan-out to listeners, and dataset recording. Transport-agnostic so
// the same state machine runs over TCP (Node) and WebSocket (browser).

import type {
  ClientMessage, GazePayload, ReadyPayload, ServerMessage, Transport,
} from './protocol.js';
import type { UiSceneState } from './scene-state.js';

export type GazeListener = (gaze: GazePayload) => void;

export interface RecordResult {
  path: string;
  examples: number;
}

export class SessionClient {
  private transport: Transport;
  private seq = 0;
  private heartbeat: ReturnType<typeof setInterval> | null = null;
  private gazeListeners: GazeListener[] = [];
  private readyResolve: ((r: ReadyPayload) => void) | null = null;
  private recordResolve: ((r: RecordResult) => void) | null = null;
  private closeHandlers: (() => void)[] = [];
  ready: ReadyPayload | null = null;
  connected = false;
  lastError: string | null = null;

  constructor(transport: Transport) {
    this.transport = transport;
    transport.onMessage((msg) => this.handle(msg));
    transport.onClose(() => {
      this.connected = false;
      this.stopHeartbeat();
      for (const h of this.closeHandlers) h();
    });
  }

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  private send(type: ClientMessage['type'], payload?: Record<string, unknown>) {
    this.transport.send({ type, seq: this.nextSeq(), payload });
  }

  private handle(msg: ServerMessage) {
    switch (msg.type) {
      case 'ready':
        this.ready = msg.payload as unknown as ReadyPayload;
        this.connected = true;
        this.readyResolve?.(this.ready);
        this.readyResolve = null;
        break;
      case 'gaze':
        for (const l of this.gazeListeners) l(msg.payload as unknown as GazePayload);
        break;
      case 'record_saved':
        this.recordResolve?.(msg.payload as unknown as RecordResult);
        this.recordResolve = null;
        break;
      case 'error':
        this.lastError = String(msg.payload.message ?? 'unknown error');
        break;
    }
  }

  hello(timeoutMs = 5000): Promise<ReadyPayload> {
    const p = new Promise<ReadyPayload>((resolve, reject) => {
      this.readyResolve = resolve;
      setTimeout(() => reject(new Error('hello timed out')), timeoutMs);
    });
    this.send('hello');
    return p;
  }

  onGaze(listener: GazeListener) {
    this.gazeListeners.push(listener);
  }

  onClose(handler: () => void) {
    this.closeHandlers.push(handler);
  }

  /** Sends the scene immediately (first update) or marks it for the heartbeat. */
  pushScene(scene: UiSceneState) {
    this.send('scene_update', scene.toPayload());
    scene.consumeDirty();
  }

  /**
   * Re-sends the scene at most once per tick while it keeps changing;
   * outbound rate never exceeds the server tick rate.
   */
  startHeartbeat(scene: UiSceneState) {
    if (!this.ready) throw new Error('call hello() first');
    this.pushScene(scene);
    const tickMs = this.ready.tick_s * 1000;
    this.heartbeat = setInterval(() => {
      if (scene.consumeDirty()) {
        this.send('scene_update', scene.toPayload());
      }
    }, tickMs);
  }

  stopHeartbeat() {
    if (this.heartbeat !== null) {
      clearInterval(this.heartbeat);
      this.heartbeat = null;
    }
  }

  setPolicy(policy: Partial<{ min_dwell_s: number; switch_margin: number; max_pan_rate_dps: number }>) {
    this.send('set_policy', policy);
  }

  startRecord(path?: string) {
    this.send('start_record', path ? { path } : {});
  }

  stopRecord(timeoutMs = 10000): Promise<RecordResult> {
    const p = new Promise<RecordResult>((resolve, reject) => {
      this.recordResolve = resolve;
      setTimeout(() => reject(new Error('record_saved timed out')), timeoutMs);
    });
    this.send('stop_record');
    return p;
  }

  close() {
    this.stopHeartbeat();
    this.transport.close();
  }
}
