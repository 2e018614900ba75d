// Line-oriented transport abstraction. The browser build talks to the
// engine through the CLI's WebSocket bridge (one protocol line per text
// frame); tests inject fake or raw-TCP transports behind the same
// interface.

export interface LineTransport {
  send(line: string): void;
  onLine(cb: (line: string) => void): void;
  onStatus(cb: (connected: boolean) => void): void;
  close(): void;
}

export class WebSocketLineTransport implements LineTransport {
  private ws: WebSocket | null = null;
  private lineCb: (line: string) => void = () => {};
  private statusCb: (connected: boolean) => void = () => {};
  private attempts = 0;
  private closed = false;

  constructor(private url: string) {
    this.connect();
  }

  private connect(): void {
    if (this.closed) return;
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.attempts = 0;
      this.statusCb(true);
    };
    this.ws.onmessage = (ev) => {
      for (const line of String(ev.data).split("\n")) {
        if (line.trim()) this.lineCb(line);
      }
    };
    this.ws.onclose = () => {
      this.statusCb(false);
      this.reconnect();
    };
    this.ws.onerror = () => {
      this.ws?.close();
    };
  }

  private reconnect(): void {
    if (this.closed) return;
    const backoff = Math.min(500 * 2 ** this.attempts, 10_000);
    this.attempts += 1;
    setTimeout(() => this.connect(), backoff);
  }

  send(line: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(line);
    }
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onStatus(cb: (connected: boolean) => void): void {
    this.statusCb = cb;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
