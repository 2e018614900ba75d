import { describe, expect, it } from "vitest";
import { commands } from "../src/protocol.js";
import { UiStore } from "../src/store.js";
import { FakeTransport, makeStatus } from "./helpers.js";

function setup() {
  const transport = new FakeTransport();
  const store = new UiStore(transport);
  return { transport, store };
}

describe("version ordering", () => {
  it("applies broadcasts in version order and discards stale ones", () => {
    const { transport, store } = setup();
    transport.pushLine(JSON.stringify(makeStatus(7)));
    expect(store.state.engine?.version).toBe(7);
    transport.pushLine(JSON.stringify(makeStatus(5)));
    expect(store.state.engine?.version).toBe(7); // 5 after 7: discarded
    expect(store.state.staleDrops).toBe(1);
    transport.pushLine(JSON.stringify(makeStatus(8)));
    expect(store.state.engine?.version).toBe(8);
  });

  it("never renders a version that did not come from the server (fuzz)", () => {
    const { transport, store } = setup();
    // deterministic xorshift so the shuffle is reproducible
    let s = 0x2545f491;
    const rand = () => {
      s ^= s << 13; s ^= s >>> 17; s ^= s << 5; s |= 0;
      return (s >>> 0) / 0xffffffff;
    };

    const rendered: number[] = [];
    store.subscribe((st) => {
      if (st.engine) rendered.push(st.engine.version);
    });

    const delivered: number[] = [];
    for (let round = 0; round < 200; round++) {
      const versions = Array.from({ length: 10 }, (_, i) => round * 7 + i);
      // shuffle with duplicates thrown in
      const bag = [...versions, ...versions.slice(0, 3)];
      for (let i = bag.length - 1; i > 0; i--) {
        const j = Math.floor(rand() * (i + 1));
        [bag[i], bag[j]] = [bag[j], bag[i]];
      }
      for (const v of bag) {
        delivered.push(v);
        transport.pushLine(JSON.stringify(makeStatus(v, { paused: v % 2 ? ["kick"] : [] })));
      }
    }

    // the displayed version never decreases
    for (let i = 1; i < rendered.length; i++) {
      expect(rendered[i]).toBeGreaterThan(rendered[i - 1]);
    }
    // every rendered version was actually delivered by the server
    const deliveredSet = new Set(delivered);
    for (const v of rendered) expect(deliveredSet.has(v)).toBe(true);
    // the final state is the newest delivered version
    expect(store.state.engine?.version).toBe(Math.max(...delivered));
    // and the stale ones were counted, not shown
    expect(store.state.staleDrops).toBeGreaterThan(0);
  });

  it("ignores unparseable lines entirely", () => {
    const { transport, store } = setup();
    transport.pushLine(JSON.stringify(makeStatus(1)));
    transport.pushLine("{broken json");
    transport.pushLine('{"type":"state","version":99}'); // malformed status
    expect(store.state.engine?.version).toBe(1);
  });
});

describe("acknowledgment gating", () => {
  it("sending a command changes no rendered state until a broadcast lands", () => {
    const { transport, store } = setup();
    transport.pushLine(JSON.stringify(makeStatus(1)));
    const before = store.state.engine;
    store.send(commands.pauseLayer("kick"));
    expect(store.state.engine).toBe(before); // no optimistic divergence
    expect(store.state.pendingCommands).toBe(1);
    expect(transport.sent).toContain('{"cmd":"pause_layer","layer":"kick"}');

    transport.pushLine('{"type":"ack","cmd":"pause_layer","version":2}');
    expect(store.state.pendingCommands).toBe(0);
    expect(store.state.engine).toBe(before); // ack alone still renders nothing new

    transport.pushLine(JSON.stringify(makeStatus(2, { paused: ["kick"] })));
    expect(store.state.engine?.layers.find((l) => l.id === "kick")?.paused).toBe(true);
  });

  it("surfaces error replies and leaves state alone", () => {
    const { transport, store } = setup();
    transport.pushLine(JSON.stringify(makeStatus(3)));
    store.send(commands.pauseLayer("theremin"));
    transport.pushLine('{"type":"error","error":"unknown layer \'theremin\'"}');
    expect(store.state.lastError).toMatch(/unknown layer/);
    expect(store.state.engine?.version).toBe(3);
  });

  it("requests a fresh snapshot on (re)connect", () => {
    const { transport } = setup();
    transport.setConnected(true);
    expect(transport.sent).toContain('{"cmd":"get_state"}');
  });
});
