// WebSocket wrapper with a reconnect flow. The server treats a mid-cycle
// disconnect as a cycle abort, so reconnecting simply waits for the next cycle.

import { helloFrame, parseServerFrame, ServerFrame } from "./protocol.js";

export interface NetHandlers {
  onFrame(frame: ServerFrame): void;
  onStatus(status: "open" | "closed" | "reconnecting"): void;
}

export class SessionSocket {
  private ws: WebSocket | null = null;
  private url: string;
  private handlers: NetHandlers;
  private retryMs = 1000;
  private closedByUs = false;

  constructor(url: string, handlers: NetHandlers) {
    this.url = url;
    this.handlers = handlers;
  }

  connect(): void {
    this.closedByUs = false;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.retryMs = 1000;
      ws.send(helloFrame("browser"));
      this.handlers.onStatus("open");
    };
    ws.onmessage = (ev) => {
      const frame = parseServerFrame(String(ev.data));
      if (frame) this.handlers.onFrame(frame);
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.closedByUs) {
        this.handlers.onStatus("closed");
        return;
      }
      this.handlers.onStatus("reconnecting");
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 15000);
    };
  }

  send(raw: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(raw);
    }
  }

  close(): void {
    this.closedByUs = true;
    this.ws?.close();
  }
}
