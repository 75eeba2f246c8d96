// Node transport: newline-delimited JSON over a local TCP socket (the
// service's primary wire format). Used by tests and headless operation.

import * as net from 'node:net';
import { NdjsonDecoder, encodeNdjson } from './protocol.js';
import type { ClientMessage, ServerMessage, Transport } from './protocol.js';

export class TcpTransport implements Transport {
  private socket: net.Socket;
  private decoder = new NdjsonDecoder();
  private messageHandler: ((msg: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on('data', (chunk) => {
      for (const msg of this.decoder.push(chunk.toString('utf8'))) {
        this.messageHandler?.(msg);
      }
    });
    socket.on('close', () => this.closeHandler?.());
    socket.on('error', () => socket.destroy());
  }

  static connect(host: string, port: number, timeoutMs = 5000): Promise<TcpTransport> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error(`connect to ${host}:${port} timed out`));
      }, timeoutMs);
      socket.once('connect', () => {
        clearTimeout(timer);
        resolve(new TcpTransport(socket));
      });
      socket.once('error', (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
  }

  send(msg: ClientMessage): void {
    this.socket.write(encodeNdjson(msg));
  }

  onMessage(handler: (msg: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.socket.end();
    this.socket.destroy();
  }
}
