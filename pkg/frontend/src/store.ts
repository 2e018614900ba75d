// Engine state mirror. The store never invents state: the rendered
// snapshot only ever comes from a server status broadcast, applied in
// version order (stale or duplicate versions are discarded). Sending a
// command changes nothing locally until the acknowledging broadcast
// arrives.

import { Command, ServerMessage, StatusMessage, parseServerMessage, serializeCommand } from "./protocol.js";
import { LineTransport } from "./transport.js";

export interface UiState {
  connected: boolean;
  engine: StatusMessage | null; // last server-acknowledged snapshot
  lastError: string | null;
  pendingCommands: number;
  staleDrops: number;
}

export class UiStore {
  private listeners = new Set<(s: UiState) => void>();
  readonly state: UiState = {
    connected: false,
    engine: null,
    lastError: null,
    pendingCommands: 0,
    staleDrops: 0,
  };

  constructor(private transport: LineTransport) {
    transport.onLine((line) => this.handleLine(line));
    transport.onStatus((connected) => {
      this.state.connected = connected;
      if (connected) {
        // resync after reconnect: ask for the current snapshot
        this.transport.send(serializeCommand({ cmd: "get_state" }));
      }
      this.emit();
    });
  }

  subscribe(cb: (s: UiState) => void): () => void {
    this.listeners.add(cb);
    cb(this.state);
    return () => this.listeners.delete(cb);
  }

  send(cmd: Command): void {
    this.state.pendingCommands += 1;
    this.transport.send(serializeCommand(cmd));
    this.emit();
  }

  handleLine(line: string): void {
    const msg: ServerMessage | null = parseServerMessage(line);
    if (msg === null) return;
    if (msg.type === "state") {
      const current = this.state.engine;
      if (current !== null && msg.version <= current.version) {
        this.state.staleDrops += 1; // out-of-order or duplicate: never rendered
        return;
      }
      this.state.engine = msg;
      this.emit();
      return;
    }
    if (msg.type === "ack") {
      this.state.pendingCommands = Math.max(0, this.state.pendingCommands - 1);
      this.state.lastError = null;
      this.emit();
      return;
    }
    this.state.pendingCommands = Math.max(0, this.state.pendingCommands - 1);
    this.state.lastError = msg.error;
    this.emit();
  }

  private emit(): void {
    for (const cb of this.listeners) cb(this.state);
  }
}
