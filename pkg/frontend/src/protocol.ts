// Session protocol v1: JSON messages with client seq numbers and server
// replies carrying reply_to. Mirrors docs/session_protocol.md in the
// repository root.

export type Variant = '2d' | '3d';

export interface Character2D {
  present: boolean;
  distance_m: number;
  angle_deg: number;
  waving: boolean;
  pointing: boolean;
  talking: boolean;
  movement: number; // 0 standing, 1/2 entering slow/fast, 3/4 leaving slow/fast
}

export interface Character3D {
  present: boolean;
  distance_m: number;
  angle_deg: number;
  characteristic: number; // 1..8, see timeline schema
  talking: boolean;
  pointed_at_count: number;
}

export type Character = Character2D | Character3D;

export interface ClientMessage {
  type: 'hello' | 'scene_update' | 'set_policy' | 'start_record' | 'stop_record';
  seq: number;
  payload?: Record<string, unknown>;
}

export interface ReadyPayload {
  protocol_version: number;
  variant: Variant;
  m: number;
  labels: string[];
  tick_s: number;
}

export interface GazePayload {
  tick: number;
  t_s: number;
  target: number | null;
  pan_deg: number;
  pan_rate_dps: number;
  probs: number[] | null;
}

export interface ServerMessage {
  type: 'ready' | 'gaze' | 'error' | 'record_saved';
  seq: number;
  reply_to: number | null;
  payload: Record<string, unknown>;
}

// Transports deliver whole JSON messages; framing differs per medium.
export interface Transport {
  send(msg: ClientMessage): void;
  onMessage(handler: (msg: ServerMessage) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

/** Incremental decoder for newline-delimited JSON (TCP framing). */
export class NdjsonDecoder {
  private buffer = '';

  push(chunk: string): ServerMessage[] {
    this.buffer += chunk;
    const out: ServerMessage[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf('\n')) >= 0) {
      const line = this.buffer.slice(0, idx).trim();
      this.buffer = this.buffer.slice(idx + 1);
      if (line.length === 0) continue;
      out.push(JSON.parse(line) as ServerMessage);
    }
    return out;
  }
}

export const encodeNdjson = (msg: ClientMessage): string =>
  JSON.stringify(msg) + '\n';
