// Browser transport: the service's WebSocket endpoint (`serve --ws-port`)
// carries one JSON message per text frame.

import type { ClientMessage, ServerMessage, Transport } from './protocol.js';

export class WsTransport implements Transport {
  private ws: WebSocket;
  private messageHandler: ((msg: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  private constructor(ws: WebSocket) {
    this.ws = ws;
    ws.onmessage = (event: MessageEvent) => {
      try {
        this.messageHandler?.(JSON.parse(String(event.data)) as ServerMessage);
      } catch (err) {
        console.error('bad server message', err);
      }
    };
    ws.onclose = () => this.closeHandler?.();
  }

  static connect(url: string, timeoutMs = 5000): Promise<WsTransport> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(url);
      const timer = setTimeout(() => {
        ws.close();
        reject(new Error(`connect to ${url} timed out`));
      }, timeoutMs);
      ws.onopen = () => {
        clearTimeout(timer);
        resolve(new WsTransport(ws));
      };
      ws.onerror = () => {
        clearTimeout(timer);
        reject(new Error(`websocket error connecting to ${url}`));
      };
    });
  }

  send(msg: ClientMessage): void {
    this.ws.send(JSON.stringify(msg));
  }

  onMessage(handler: (msg: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.ws.close();
  }
}
