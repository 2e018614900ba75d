// Control protocol messages, mirrored from the engine's socket contract.
// One JSON object per line / per WebSocket text frame.

export type Mode = "round_robin" | "full_display";
export type Role = "foreground" | "background" | "silent";

export interface LayerState {
  id: string;
  paused: boolean;
  role: Role;
}

export interface PartitionState {
  id: string;
  scaled_procs: number;
  mem: number;
  scaled_ibtx: number;
}

export interface StatusMessage {
  type: "state";
  version: number;
  mode: Mode;
  layers: LayerState[];
  partitions: PartitionState[];
}

export interface AckMessage {
  type: "ack";
  cmd: string;
  version: number;
}

export interface ErrorMessage {
  type: "error";
  error: string;
}

export type ServerMessage = StatusMessage | AckMessage | ErrorMessage;

export type Command =
  | { cmd: "set_mode"; mode: Mode }
  | { cmd: "pause_layer"; layer: string }
  | { cmd: "resume_layer"; layer: string }
  | { cmd: "select_layers"; layers: string[] }
  | { cmd: "set_window_n"; metric: "procs" | "ibtx"; n: number }
  | { cmd: "get_state" };

export const commands = {
  setMode: (mode: Mode): Command => ({ cmd: "set_mode", mode }),
  pauseLayer: (layer: string): Command => ({ cmd: "pause_layer", layer }),
  resumeLayer: (layer: string): Command => ({ cmd: "resume_layer", layer }),
  selectLayers: (layers: string[]): Command => ({ cmd: "select_layers", layers }),
  setWindowN: (metric: "procs" | "ibtx", n: number): Command => ({ cmd: "set_window_n", metric, n }),
  getState: (): Command => ({ cmd: "get_state" }),
};

export function serializeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}

function isStatus(msg: any): msg is StatusMessage {
  return (
    msg.type === "state" &&
    typeof msg.version === "number" &&
    (msg.mode === "round_robin" || msg.mode === "full_display") &&
    Array.isArray(msg.layers) &&
    Array.isArray(msg.partitions)
  );
}

/** Parse one server line; anything unrecognized returns null (dropped). */
export function parseServerMessage(line: string): ServerMessage | null {
  let msg: any;
  try {
    msg = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  if (isStatus(msg)) return msg;
  if (msg.type === "ack" && typeof msg.cmd === "string" && typeof msg.version === "number") return msg;
  if (msg.type === "error" && typeof msg.error === "string") return msg;
  return null;
}
