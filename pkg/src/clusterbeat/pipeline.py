"""Batch pipeline: parse -> smooth -> aggregate -> scale -> map -> schedule.

SonificationEngine owns all per-stream state (averaging, windows,
round-robin phase, presentation state) behind one lock; the event stream it
produces is a pure function of (message stream, config, seed), so live,
replay, and offline render agree byte-for-byte.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

from .config import LAYER_ORDER, Config
from .control import CommandError, EngineState, parse_command
from .mapping import PartitionParams, layer_params_for_batch
from .normalize import ScalerBank, mem_passthrough
from .protocol import (
    BatchCombiner,
    ParseError,
    ParseStats,
    PartitionTable,
    aggregate_partition,
    parse_batch_message,
)
from .sequencer import (
    LayerEvent,
    RoundRobinState,
    Transport,
    advance_round_robin,
    initial_round_robin,
    presentation_gains,
    schedule_batch,
)

log = logging.getLogger(__name__)


@dataclass
class BatchResult:
    """Everything downstream consumers need about one processed batch."""

    ordinal: int  # index among accepted batches; batch k sounds at [k, k+1) * interval
    seq: int
    timestamp: float
    params: dict[str, PartitionParams]
    events: list[LayerEvent]
    foreground: str | None
    gains: dict[str, float | None] = field(default_factory=dict)

    @property
    def start_time(self) -> float:
        return self.ordinal  # multiplied by batch_interval by the caller


def rotation_order(table: PartitionTable) -> tuple:
    """Round-robin order: the canonical order for the default layer set,
    table order for any layers outside it."""
    layers = set(table.layer_ids)
    order = [l for l in LAYER_ORDER if l in layers]
    order += [l for l in table.layer_ids if l not in LAYER_ORDER]
    return tuple(order)


class SonificationEngine:
    """Single-stream engine: feed wire lines in, get timed layer events out."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.table = PartitionTable.from_config(cfg.partitions)
        self.order = rotation_order(self.table)
        self.transport = Transport(bpm=cfg.bpm, batch_interval=cfg.batch_interval)
        self.combiner = BatchCombiner(missing_zero_after=cfg.missing_zero_after)
        self.scalers = ScalerBank(self.table.partition_ids, cfg.window_n, zoom=cfg.window_zoom)
        self.rr: RoundRobinState = initial_round_robin(cfg.seed, self.order, cfg.background_prob)
        self.state = EngineState(list(self.order), cfg.window_n)
        self.parse_stats = ParseStats()
        self.batches_accepted = 0
        self._layer_index = {layer: i for i, layer in enumerate(self.order)}
        self._listeners: list = []
        self._lock = threading.RLock()

    # ---- status listeners ----------------------------------------------

    def add_listener(self, fn) -> None:
        self._listeners.append(fn)

    def _notify(self, snapshot: dict) -> None:
        for fn in list(self._listeners):
            try:
                fn(snapshot)
            except Exception:
                log.exception("status listener failed")

    # ---- batch path ------------------------------------------------------

    def process_line(self, line: bytes | str, strict: bool = False) -> BatchResult | None:
        """Run one wire message through the full pipeline.

        Malformed lines return None (live/replay keep the stream going);
        strict=True re-raises for offline rendering, which aborts instead.
        """
        with self._lock:
            try:
                batch = parse_batch_message(line, self.table, self.parse_stats)
            except ParseError:
                if strict:
                    raise
                log.warning("dropped malformed message (%d so far)", self.parse_stats.parse_errors)
                return None

            averaged = self.combiner.push(batch)
            aggregates = aggregate_partition(averaged, self.table)

            params: dict[str, PartitionParams] = {}
            for pid in self.table.partition_ids:
                procs_raw, mem_raw, ibtx_raw = aggregates[pid]
                scaled_procs, scaled_ibtx = self.scalers.scale(pid, procs_raw, ibtx_raw)
                params[pid] = PartitionParams(
                    partition_id=pid,
                    scaled_procs=scaled_procs,
                    memusage=mem_passthrough(mem_raw),
                    scaled_ibtx=scaled_ibtx,
                    seq=batch.seq,
                )

            layer_params = {}
            for pid in self.table.partition_ids:
                layer = self.table.layer_for(pid)
                layer_params[layer] = layer_params_for_batch(
                    params[pid],
                    layer,
                    self._layer_index[layer],
                    self.cfg.basic_mask(layer),
                    self.cfg.seed,
                    threshold=self.cfg.idle_threshold,
                    ramp_max=self.cfg.rate_ramp_max,
                )

            gains = presentation_gains(
                self.state.mode, self.state.paused, self.state.selected, self.rr, self.cfg.background_gain
            )
            events = schedule_batch(layer_params, gains, self.transport, self.order)
            foreground = self.rr.foreground if self.state.mode == "round_robin" else None
            result = BatchResult(
                ordinal=self.batches_accepted,
                seq=batch.seq,
                timestamp=batch.timestamp,
                params=params,
                events=events,
                foreground=foreground,
                gains=gains,
            )

            self.batches_accepted += 1
            if self.state.mode == "round_robin":
                self.rr = advance_round_robin(self.rr, self.cfg.seed, self.cfg.background_prob)
            self.last_params = params
            self.state.version += 1
            snapshot = self._snapshot_locked()
        self._notify(snapshot)
        return result

    # ---- control path ----------------------------------------------------

    def handle_command(self, raw) -> dict:
        """Apply one control command; returns the reply message."""
        try:
            cmd = parse_command(raw)
        except CommandError as e:
            return {"type": "error", "error": str(e)}
        with self._lock:
            try:
                changed = self._apply_locked(cmd)
            except CommandError as e:
                return {"type": "error", "error": str(e)}
            if cmd["cmd"] == "get_state":
                return self._snapshot_locked()
            if changed:
                self.state.version += 1
                snapshot = self._snapshot_locked()
            else:
                snapshot = None
            reply = {"type": "ack", "cmd": cmd["cmd"], "version": self.state.version}
        if snapshot is not None:
            self._notify(snapshot)
        return reply

    def _apply_locked(self, cmd: dict) -> bool:
        name = cmd["cmd"]
        state = self.state
        if name == "get_state":
            return False
        if name == "set_mode":
            if cmd["mode"] == state.mode:
                return False
            state.mode = cmd["mode"]
            return True
        if name in ("pause_layer", "resume_layer"):
            layer = cmd["layer"]
            if layer not in self._layer_index:
                raise CommandError(f"unknown layer {layer!r}")
            if name == "pause_layer":
                if layer in state.paused:
                    return False
                state.paused.add(layer)
            else:
                if layer not in state.paused:
                    return False  # resuming a playing layer: no-op, success
                state.paused.discard(layer)
            return True
        if name == "select_layers":
            layers = cmd["layers"]
            for layer in layers:
                if layer not in self._layer_index:
                    raise CommandError(f"unknown layer {layer!r}")
            new = set(layers)
            if new == state.selected:
                return False
            state.selected = new
            return True
        if name == "set_window_n":
            self.scalers.set_window_n(cmd["metric"], cmd["n"])
            state.window_n[cmd["metric"]] = cmd["n"]
            return True
        raise CommandError(f"unknown command {name!r}")

    # ---- snapshots ---------------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            return self._snapshot_locked()

    def _snapshot_locked(self) -> dict:
        state = self.state
        layers = []
        for layer in self.order:
            if state.mode == "full_display":
                role = "foreground" if state.audible_in_full_display(layer) else "silent"
            else:
                role = self.rr.role_of(layer)
            layers.append({"id": layer, "paused": layer in state.paused, "role": role})
        partitions = []
        last = getattr(self, "last_params", None)
        if last:
            for pid in self.table.partition_ids:
                p = last[pid]
                partitions.append(
                    {
                        "id": pid,
                        "scaled_procs": p.scaled_procs,
                        "mem": p.memusage,
                        "scaled_ibtx": p.scaled_ibtx,
                    }
                )
        return {
            "type": "state",
            "version": state.version,
            "mode": state.mode,
            "layers": layers,
            "partitions": partitions,
        }
