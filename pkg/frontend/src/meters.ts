// Per-partition meter panel: three horizontal bars (scaled procs, mem,
// scaled ibtx) in [0, 1]; an idle badge when the partition reads as no
// activity.

import { PartitionState } from "./protocol.js";

const METRICS: Array<[keyof PartitionState & string, string]> = [
  ["scaled_procs", "procs"],
  ["mem", "mem"],
  ["scaled_ibtx", "ibtx"],
];

export function renderMeters(container: HTMLElement, partitions: PartitionState[]): void {
  container.replaceChildren();
  for (const p of partitions) {
    const row = document.createElement("div");
    row.className = "meter-row";

    const name = document.createElement("div");
    name.className = "meter-name";
    name.textContent = p.id;
    if (p.scaled_procs === 0) {
      const badge = document.createElement("span");
      badge.className = "idle-badge";
      badge.textContent = "idle";
      name.appendChild(badge);
    }
    row.appendChild(name);

    for (const [key, label] of METRICS) {
      const cell = document.createElement("div");
      cell.className = "meter-cell";
      const tag = document.createElement("span");
      tag.className = "meter-tag";
      tag.textContent = label;
      const track = document.createElement("div");
      track.className = "meter-track";
      const fill = document.createElement("div");
      fill.className = `meter-fill fill-${label}`;
      const v = Math.max(0, Math.min(1, Number(p[key])));
      fill.style.width = `${(v * 100).toFixed(1)}%`;
      track.appendChild(fill);
      cell.appendChild(tag);
      cell.appendChild(track);
      row.appendChild(cell);
    }
    container.appendChild(row);
  }
}
