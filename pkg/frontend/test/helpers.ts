import * as net from "node:net";
import { LineTransport } from "../src/transport.js";
import { LayerState, PartitionState, StatusMessage } from "../src/protocol.js";

export const LAYERS = [
  "kick", "snare", "hihats", "clap", "shaker",
  "subbass", "female_voice", "bass", "chords", "male_voice",
];

export function makeStatus(
  version: number,
  opts: { mode?: "round_robin" | "full_display"; paused?: string[]; partitions?: PartitionState[] } = {},
): StatusMessage {
  const paused = new Set(opts.paused ?? []);
  const layers: LayerState[] = LAYERS.map((id, i) => ({
    id,
    paused: paused.has(id),
    role: i === version % LAYERS.length ? "foreground" : "silent",
  }));
  return {
    type: "state",
    version,
    mode: opts.mode ?? "round_robin",
    layers,
    partitions: opts.partitions ?? [],
  };
}

/** In-memory transport for unit tests. */
export class FakeTransport implements LineTransport {
  sent: string[] = [];
  private lineCb: (line: string) => void = () => {};
  private statusCb: (connected: boolean) => void = () => {};

  send(line: string): void {
    this.sent.push(line);
  }
  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }
  onStatus(cb: (connected: boolean) => void): void {
    this.statusCb = cb;
  }
  close(): void {}

  // test-side controls
  pushLine(line: string): void {
    this.lineCb(line);
  }
  setConnected(up: boolean): void {
    this.statusCb(up);
  }
}

/** Raw TCP transport: the engine's control protocol without the WS bridge.
 * Node-only; used by the integration test. */
export class TcpLineTransport implements LineTransport {
  private sock: net.Socket;
  private buffer = "";
  private lineCb: (line: string) => void = () => {};
  private statusCb: (connected: boolean) => void = () => {};

  constructor(host: string, port: number) {
    this.sock = net.createConnection({ host, port });
    this.sock.setEncoding("utf8");
    this.sock.on("connect", () => this.statusCb(true));
    this.sock.on("close", () => this.statusCb(false));
    this.sock.on("error", () => {});
    this.sock.on("data", (chunk: string) => {
      this.buffer += chunk;
      let idx;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx);
        this.buffer = this.buffer.slice(idx + 1);
        if (line.trim()) this.lineCb(line);
      }
    });
  }

  send(line: string): void {
    this.sock.write(line + "\n");
  }
  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }
  onStatus(cb: (connected: boolean) => void): void {
    this.statusCb = cb;
  }
  close(): void {
    this.sock.destroy();
  }
}

export function waitFor(predicate: () => boolean, timeoutMs: number, label = "condition"): Promise<number> {
  const started = Date.now();
  return new Promise((resolve, reject) => {
    const tick = () => {
      if (predicate()) return resolve(Date.now() - started);
      if (Date.now() - started > timeoutMs) return reject(new Error(`timed out waiting for ${label}`));
      setTimeout(tick, 10);
    };
    tick();
  });
}
