import { commands } from "./protocol.js";
import { renderMeters } from "./meters.js";
import { renderTiles } from "./tiles.js";
import { UiStore } from "./store.js";
import { WebSocketLineTransport } from "./transport.js";

const proto = location.protocol === "https:" ? "wss" : "ws";
const transport = new WebSocketLineTransport(`${proto}://${location.host}/ws`);
const store = new UiStore(transport);

const connEl = document.getElementById("conn")!;
const modeEl = document.getElementById("mode-toggle") as HTMLInputElement;
const errEl = document.getElementById("error")!;
const tilesEl = document.getElementById("tiles")!;
const metersEl = document.getElementById("meters")!;

modeEl.onchange = () => {
  store.send(commands.setMode(modeEl.checked ? "full_display" : "round_robin"));
  // the switch snaps back unless the engine confirms via broadcast
  modeEl.checked = store.state.engine?.mode === "full_display";
};

store.subscribe((s) => {
  connEl.textContent = s.connected ? "connected" : "reconnecting…";
  connEl.className = s.connected ? "ok" : "down";
  errEl.textContent = s.lastError ?? "";
  if (s.engine) {
    modeEl.checked = s.engine.mode === "full_display";
    modeEl.disabled = false;
    renderTiles(tilesEl, s.engine, store);
    renderMeters(metersEl, s.engine.partitions);
  } else {
    modeEl.disabled = true;
  }
});
