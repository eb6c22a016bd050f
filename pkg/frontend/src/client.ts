/**
 * Gateway transport: wraps a WebSocket-ish object carrying binary frames.
 * Works with the browser WebSocket and the `ws` package in node, which is
 * what the automated test client uses.
 */

import { FrameDecoder, encode, type WireMessage } from "./wire.js";

export interface SocketLike {
  binaryType?: string;
  send(data: Uint8Array): void;
  close(): void;
  addEventListener(name: string, handler: (event: any) => void): void;
}

export class GatewayClient {
  private decoder = new FrameDecoder();
  private handlers: ((msg: WireMessage) => void)[] = [];
  private closeHandlers: (() => void)[] = [];

  constructor(private readonly socket: SocketLike) {
    if ("binaryType" in socket) socket.binaryType = "arraybuffer";
    socket.addEventListener("message", (event: any) => {
      const data: unknown = event.data ?? event;
      let bytes: Uint8Array;
      if (data instanceof ArrayBuffer) bytes = new Uint8Array(data);
      else if (ArrayBuffer.isView(data)) {
        bytes = new Uint8Array(data.buffer, data.byteOffset, data.byteLength);
      } else if (typeof data === "string") bytes = new TextEncoder().encode(data);
      else return;
      for (const msg of this.decoder.feed(bytes)) {
        for (const handler of this.handlers) handler(msg);
      }
    });
    socket.addEventListener("close", () => {
      for (const handler of this.closeHandlers) handler();
    });
  }

  onMessage(handler: (msg: WireMessage) => void): void {
    this.handlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  send = (msg: WireMessage): void => {
    this.socket.send(encode(msg));
  };

  close(): void {
    this.socket.close();
  }
}
