// Layer tile ring: one tile per instrumental layer showing its presentation
// role, a pause/resume control, and (in full display) a monitor checkbox.

import { commands, StatusMessage } from "./protocol.js";
import { UiStore } from "./store.js";

function label(id: string): string {
  return id.replace(/_/g, " ");
}

export function renderTiles(container: HTMLElement, snap: StatusMessage, store: UiStore): void {
  container.replaceChildren();
  const fullDisplay = snap.mode === "full_display";
  for (const layer of snap.layers) {
    const tile = document.createElement("div");
    tile.className = `tile role-${layer.role}${layer.paused ? " paused" : ""}`;
    tile.dataset.layer = layer.id;

    const name = document.createElement("div");
    name.className = "tile-name";
    name.textContent = label(layer.id);
    tile.appendChild(name);

    const role = document.createElement("div");
    role.className = "tile-role";
    role.textContent = layer.paused ? "paused" : layer.role;
    tile.appendChild(role);

    const btn = document.createElement("button");
    btn.textContent = layer.paused ? "resume" : "pause";
    btn.onclick = () =>
      store.send(layer.paused ? commands.resumeLayer(layer.id) : commands.pauseLayer(layer.id));
    tile.appendChild(btn);

    if (fullDisplay) {
      const pick = document.createElement("input");
      pick.type = "checkbox";
      pick.className = "tile-select";
      // audible = selected && !paused, so role is the best recoverable signal
      pick.checked = layer.role === "foreground";
      pick.title = "monitor this layer";
      pick.onchange = () => {
        const boxes = container.querySelectorAll<HTMLInputElement>("input.tile-select");
        const picked: string[] = [];
        boxes.forEach((b) => {
          const id = (b.closest(".tile") as HTMLElement).dataset.layer!;
          if (b.checked) picked.push(id);
        });
        store.send(commands.selectLayers(picked));
      };
      tile.appendChild(pick);
    }
    container.appendChild(tile);
  }
}
