import { describe, expect, it } from "vitest";
import { commands, parseServerMessage, serializeCommand } from "../src/protocol.js";
import { makeStatus } from "./helpers.js";

describe("command serialization", () => {
  it("matches the engine's wire contract", () => {
    expect(serializeCommand(commands.setMode("full_display"))).toBe('{"cmd":"set_mode","mode":"full_display"}');
    expect(serializeCommand(commands.pauseLayer("hihats"))).toBe('{"cmd":"pause_layer","layer":"hihats"}');
    expect(serializeCommand(commands.resumeLayer("kick"))).toBe('{"cmd":"resume_layer","layer":"kick"}');
    expect(serializeCommand(commands.selectLayers(["snare", "clap"]))).toBe(
      '{"cmd":"select_layers","layers":["snare","clap"]}',
    );
    expect(serializeCommand(commands.setWindowN("procs", 8))).toBe(
      '{"cmd":"set_window_n","metric":"procs","n":8}',
    );
    expect(serializeCommand(commands.getState())).toBe('{"cmd":"get_state"}');
  });
});

describe("server message parsing", () => {
  it("round-trips a status broadcast", () => {
    const status = makeStatus(5, { paused: ["kick"] });
    const parsed = parseServerMessage(JSON.stringify(status));
    expect(parsed).toEqual(status);
  });

  it("accepts acks and errors", () => {
    expect(parseServerMessage('{"type":"ack","cmd":"pause_layer","version":3}')).toEqual({
      type: "ack",
      cmd: "pause_layer",
      version: 3,
    });
    expect(parseServerMessage('{"type":"error","error":"unknown layer"}')).toEqual({
      type: "error",
      error: "unknown layer",
    });
  });

  it("drops garbage instead of throwing", () => {
    expect(parseServerMessage("{nope")).toBeNull();
    expect(parseServerMessage('"a string"')).toBeNull();
    expect(parseServerMessage('{"type":"state","version":"x"}')).toBeNull();
    expect(parseServerMessage('{"type":"state","version":1,"mode":"sideways","layers":[],"partitions":[]}')).toBeNull();
    expect(parseServerMessage('{"type":"mystery"}')).toBeNull();
  });
});
