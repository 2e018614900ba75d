"""Offline reporting: per-partition activity tables and matplotlib figures
rendered to files next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PARAM_FIELDS = ("batch", "seq", "partition", "layer", "scaled_procs", "mem", "scaled_ibtx")


def write_params_tsv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w") as f:
        f.write("\t".join(PARAM_FIELDS) + "\n")
        for r in rows:
            f.write(
                f"{r['batch']}\t{r['seq']}\t{r['partition']}\t{r['layer']}"
                f"\t{r['scaled_procs']:.6f}\t{r['mem']:.6f}\t{r['scaled_ibtx']:.6f}\n"
            )


def params_rows(results, table) -> list[dict]:
    rows = []
    for res in results:
        for pid in table.partition_ids:
            p = res.params[pid]
            rows.append(
                {
                    "batch": res.ordinal,
                    "seq": res.seq,
                    "partition": pid,
                    "layer": table.layer_for(pid),
                    "scaled_procs": p.scaled_procs,
                    "mem": p.memusage,
                    "scaled_ibtx": p.scaled_ibtx,
                }
            )
    return rows


def render_figures(out_dir: str | Path, rows: list[dict], events: list[dict], layer_order) -> list[Path]:
    """Write activity, onset-density, and event-timeline figures as PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    partitions = sorted({r["partition"] for r in rows}, key=lambda p: next(r["layer"] for r in rows if r["partition"] == p))
    batches = sorted({r["batch"] for r in rows})
    by_part = {p: {r["batch"]: r for r in rows if r["partition"] == p} for p in partitions}

    fig, axes = plt.subplots(3, 1, figsize=(10, 8), sharex=True)
    metrics = [("scaled_procs", "scaled procs"), ("mem", "memusage"), ("scaled_ibtx", "scaled ibtx")]
    for ax, (key, label) in zip(axes, metrics):
        for p in partitions:
            series = [by_part[p].get(b, {}).get(key, np.nan) for b in batches]
            ax.plot(batches, series, label=p, linewidth=1.0)
        ax.set_ylabel(label)
        ax.set_ylim(-0.05, 1.05)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("batch")
    axes[0].legend(fontsize=6, ncol=2, loc="upper right")
    fig.suptitle("Partition activity (scaled)")
    path = out_dir / "activity.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if events:
        layers = [l for l in layer_order]
        layer_idx = {l: i for i, l in enumerate(layers)}
        t_max = max(e["time_s"] for e in events)
        interval = 15.0
        n_batches = int(np.floor(t_max / interval)) + 1
        density = np.zeros((len(layers), n_batches))
        for e in events:
            b = min(int(e["time_s"] // interval), n_batches - 1)
            li = layer_idx.get(e["layer"])
            if li is not None:
                density[li, b] += 1
        fig, ax = plt.subplots(figsize=(10, 4))
        im = ax.imshow(density, aspect="auto", origin="lower", cmap="magma")
        ax.set_yticks(range(len(layers)), layers, fontsize=7)
        ax.set_xlabel("batch")
        ax.set_title("Onset count per layer per batch")
        fig.colorbar(im, ax=ax, label="events")
        path = out_dir / "density.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(10, 4))
        times = [e["time_s"] for e in events]
        ys = [layer_idx.get(e["layer"], -1) for e in events]
        gains = [20 * e["gain"] + 2 for e in events]
        idle = np.array([e["flags"] == "idle" for e in events])
        colors = np.where(idle, "crimson", "steelblue")
        ax.scatter(times, ys, s=gains, c=colors, alpha=0.5, linewidths=0)
        ax.set_yticks(range(len(layers)), layers, fontsize=7)
        ax.set_xlabel("time (s)")
        ax.set_title("Event timeline (red = idle hits, size = gain)")
        ax.grid(alpha=0.3)
        path = out_dir / "timeline.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
