"""Delimited event log: one line per sonic event, fixed field order.

Fields: time_s, layer, step, rate, gain, reverb, delay, flags. Floats are
written with six decimals so identical runs produce identical bytes; this
is the golden-test surface for replay and render determinism.
"""

from __future__ import annotations

from pathlib import Path

from .sequencer import LayerEvent

EVENT_FIELDS = ("time_s", "layer", "step", "rate", "gain", "reverb", "delay", "flags")
HEADER = "\t".join(EVENT_FIELDS)


def format_event(time_s: float, ev: LayerEvent) -> str:
    flags = "idle" if ev.idle_echo else "-"
    return (
        f"{time_s:.6f}\t{ev.layer_id}\t{ev.step}\t{ev.rate:.6f}\t{ev.gain:.6f}"
        f"\t{ev.reverb_mix:.6f}\t{ev.delay_amp:.6f}\t{flags}"
    )


class EventLogWriter:
    def __init__(self, path: str | Path):
        self._f = open(path, "w")
        self._f.write(HEADER + "\n")

    def write_batch(self, batch_start_s: float, events: list[LayerEvent]) -> None:
        for ev in events:
            self._f.write(format_event(batch_start_s + ev.onset, ev) + "\n")

    def flush(self) -> None:
        self._f.flush()

    def close(self) -> None:
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_event_log(path: str | Path) -> list[dict]:
    rows = []
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != list(EVENT_FIELDS):
            raise ValueError(f"unexpected event log header: {header}")
        for line in f:
            parts = line.rstrip("\n").split("\t")
            rows.append(
                {
                    "time_s": float(parts[0]),
                    "layer": parts[1],
                    "step": int(parts[2]),
                    "rate": float(parts[3]),
                    "gain": float(parts[4]),
                    "reverb": float(parts[5]),
                    "delay": float(parts[6]),
                    "flags": parts[7],
                }
            )
    return rows
