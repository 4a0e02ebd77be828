// WebSocket client for the v1 steering protocol.  Stateless with respect to
// the run: every view can be rebuilt from the next state frame, so reconnect
// is just "open a new socket".

import {
  PROTOCOL_VERSION,
  encodeClientMessage,
  greeting,
  serverMessage,
  type ClientMessage,
  type ServerMessage,
} from "./protocol.js";

export interface ClientHandlers {
  onMessage: (msg: ServerMessage) => void;
  onOpen?: () => void;
  onClose?: () => void;
  onProtocolError?: (detail: string) => void;
}

type WebSocketCtor = new (url: string) => WebSocket;

export class SteeringClient {
  private ws: WebSocket | null = null;
  private greeted = false;
  private closedByUs = false;
  private retry: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: ClientHandlers,
    private readonly reconnectMs = 1000,
    private readonly wsCtor: WebSocketCtor = WebSocket,
  ) {}

  connect(): void {
    this.closedByUs = false;
    this.greeted = false;
    const ws = new this.wsCtor(this.url);
    this.ws = ws;
    ws.onopen = () => this.handlers.onOpen?.();
    ws.onmessage = (ev: MessageEvent) => this.handleRaw(String(ev.data));
    ws.onclose = () => {
      this.handlers.onClose?.();
      if (!this.closedByUs && this.reconnectMs > 0) {
        this.retry = setTimeout(() => this.connect(), this.reconnectMs);
      }
    };
    ws.onerror = () => {}; // close fires right after; reconnect handles it
  }

  close(): void {
    this.closedByUs = true;
    if (this.retry) clearTimeout(this.retry);
    this.ws?.close();
  }

  /** Validates against the wire schema; returns false when not connected. */
  send(msg: ClientMessage): boolean {
    const text = encodeClientMessage(msg);
    if (this.ws?.readyState !== 1 /* OPEN */) return false;
    this.ws.send(text);
    return true;
  }

  private handleRaw(raw: string): void {
    let doc: unknown;
    try {
      doc = JSON.parse(raw);
    } catch {
      this.handlers.onProtocolError?.(`unparseable frame: ${raw.slice(0, 80)}`);
      return;
    }
    if (!this.greeted) {
      const hello = greeting.safeParse(doc);
      if (hello.success) {
        this.greeted = true;
        if (hello.data.v !== PROTOCOL_VERSION) {
          this.handlers.onProtocolError?.(`server speaks v${hello.data.v}, expected v${PROTOCOL_VERSION}`);
          this.close();
        }
        return;
      }
      // server greeted in an earlier life of this connection? fall through
    }
    const parsed = serverMessage.safeParse(doc);
    if (!parsed.success) {
      this.handlers.onProtocolError?.(`unknown frame shape: ${raw.slice(0, 80)}`);
      return;
    }
    this.handlers.onMessage(parsed.data);
  }
}
