"""Metrics wire format and batch processing.

One message per line, JSON, over a stream socket or a log file:

    {"type":"batch","seq":<int>,"ts":<unix-seconds float>,
     "nodes":[{"id":<str>,"partition":<str>,"procs":<int>,
               "mem":<float 0..1>,"ibtx":<float bytes/s>}, ...]}

Parsing is stateless; the smoothing/stale-fill state machine lives in
BatchCombiner, which is owned by the single ingestion task.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

WIRE_TYPE = "batch"


class ParseError(ValueError):
    """Malformed wire message; the message is dropped, the stream continues."""


@dataclass(frozen=True)
class NodeMetrics:
    node_id: str
    partition_id: str
    procs: float  # integer on the wire; fractional after batch averaging
    memusage: float  # fraction of physical memory in use, [0, 1]
    ibtx: float  # outgoing interconnect traffic, bytes/s


@dataclass(frozen=True)
class Batch:
    seq: int
    timestamp: float
    nodes: tuple[NodeMetrics, ...]

    def by_node(self) -> dict[str, NodeMetrics]:
        return {n.node_id: n for n in self.nodes}


@dataclass(frozen=True)
class PartitionEntry:
    partition_id: str
    node_count: int
    layer_id: str


class PartitionTable:
    """Ordered partition -> layer map; one layer per partition."""

    def __init__(self, entries: list[PartitionEntry]):
        self.entries = list(entries)
        self._by_id = {e.partition_id: e for e in self.entries}
        if len(self._by_id) != len(self.entries):
            raise ValueError("duplicate partition ids")
        layers = [e.layer_id for e in self.entries]
        if len(set(layers)) != len(layers):
            raise ValueError("layer ids must be unique")

    @classmethod
    def from_config(cls, partitions: list) -> "PartitionTable":
        return cls([PartitionEntry(pid, int(n), layer) for pid, n, layer in partitions])

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, partition_id: str) -> bool:
        return partition_id in self._by_id

    @property
    def partition_ids(self) -> list[str]:
        return [e.partition_id for e in self.entries]

    @property
    def layer_ids(self) -> list[str]:
        return [e.layer_id for e in self.entries]

    def layer_for(self, partition_id: str) -> str:
        return self._by_id[partition_id].layer_id

    def total_nodes(self) -> int:
        return sum(e.node_count for e in self.entries)


@dataclass
class ParseStats:
    messages: int = 0
    parse_errors: int = 0
    clamped_memusage: int = 0
    dropped_nodes: int = 0
    duplicate_nodes: int = 0


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_batch_message(raw: bytes | str, table: PartitionTable, stats: ParseStats | None = None) -> Batch:
    """Parse and validate one wire message into a Batch.

    Message-level problems raise ParseError. Node-level problems (unknown
    partition, bad field) drop the node and bump a warning counter; an
    out-of-range memusage is clamped to [0, 1] instead of dropped.
    """
    stats = stats if stats is not None else ParseStats()
    stats.messages += 1
    try:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e}") from e
        _require(isinstance(msg, dict), "message is not an object")
        _require(msg.get("type") == WIRE_TYPE, f"unexpected message type {msg.get('type')!r}")
        _require(_is_int(msg.get("seq")) and msg["seq"] >= 0, "seq must be a non-negative integer")
        _require(_is_num(msg.get("ts")), "ts must be a number")
        _require(isinstance(msg.get("nodes"), list), "nodes must be a list")
    except ParseError:
        stats.parse_errors += 1
        raise

    nodes: list[NodeMetrics] = []
    seen: set[str] = set()
    for entry in msg["nodes"]:
        node = _parse_node(entry, table, stats)
        if node is None:
            continue
        if node.node_id in seen:
            stats.duplicate_nodes += 1
            log.debug("duplicate node %s in seq %d, keeping first", node.node_id, msg["seq"])
            continue
        seen.add(node.node_id)
        nodes.append(node)

    if len(nodes) > table.total_nodes():
        stats.parse_errors += 1
        raise ParseError(f"{len(nodes)} nodes exceeds configured total {table.total_nodes()}")

    return Batch(seq=msg["seq"], timestamp=float(msg["ts"]), nodes=tuple(nodes))


def _parse_node(entry, table: PartitionTable, stats: ParseStats) -> NodeMetrics | None:
    if not isinstance(entry, dict):
        stats.dropped_nodes += 1
        return None
    node_id = entry.get("id")
    partition = entry.get("partition")
    procs = entry.get("procs")
    mem = entry.get("mem")
    ibtx = entry.get("ibtx")
    ok = (
        isinstance(node_id, str)
        and node_id
        and isinstance(partition, str)
        and _is_int(procs)
        and procs >= 0
        and _is_num(mem)
        and _is_num(ibtx)
        and ibtx >= 0
    )
    if not ok:
        stats.dropped_nodes += 1
        log.debug("dropping malformed node entry %r", entry)
        return None
    if partition not in table:
        stats.dropped_nodes += 1
        log.debug("dropping node %s: unknown partition %r", node_id, partition)
        return None
    mem = float(mem)
    if mem < 0.0 or mem > 1.0:
        stats.clamped_memusage += 1
        mem = min(max(mem, 0.0), 1.0)
    return NodeMetrics(node_id=node_id, partition_id=partition, procs=float(procs), memusage=mem, ibtx=float(ibtx))


def serialize_batch(batch: Batch) -> str:
    """One wire line (no trailing newline), field order as documented above."""
    nodes = []
    for n in batch.nodes:
        procs = int(n.procs) if float(n.procs).is_integer() else n.procs
        nodes.append({"id": n.node_id, "partition": n.partition_id, "procs": procs, "mem": n.memusage, "ibtx": n.ibtx})
    msg = {"type": WIRE_TYPE, "seq": batch.seq, "ts": batch.timestamp, "nodes": nodes}
    return json.dumps(msg, separators=(",", ":"))


def average_with_previous(current: Batch, previous: Batch | None) -> Batch:
    """Smooth a batch against the last averaged one.

    Per node present in both: arithmetic mean of each metric. Nodes only in
    current pass through; nodes only in previous are carried forward
    unchanged (stale-fill). Total function: never raises.
    """
    if previous is None:
        return current
    prev_nodes = previous.by_node()
    out: list[NodeMetrics] = []
    seen: set[str] = set()
    for cur in current.nodes:
        seen.add(cur.node_id)
        prev = prev_nodes.get(cur.node_id)
        if prev is None:
            out.append(cur)
        else:
            out.append(
                NodeMetrics(
                    node_id=cur.node_id,
                    partition_id=cur.partition_id,
                    procs=(cur.procs + prev.procs) / 2.0,
                    memusage=(cur.memusage + prev.memusage) / 2.0,
                    ibtx=(cur.ibtx + prev.ibtx) / 2.0,
                )
            )
    for prev in previous.nodes:
        if prev.node_id not in seen:
            out.append(prev)
    return Batch(seq=current.seq, timestamp=current.timestamp, nodes=tuple(out))


class BatchCombiner:
    """Owns the averaging state across batches.

    Tracks per-node missing streaks: a node absent for more than
    `missing_zero_after` consecutive batches is treated as reporting zeros
    rather than holding its last value forever. A seq regression (producer
    restart) resets all state and the regressed batch is accepted as-is.
    """

    def __init__(self, missing_zero_after: int = 4):
        self.missing_zero_after = missing_zero_after
        self.previous: Batch | None = None
        self.last_seq: int | None = None
        self._missing: dict[str, int] = {}

    def reset(self) -> None:
        self.previous = None
        self.last_seq = None
        self._missing.clear()

    def push(self, batch: Batch) -> Batch:
        if self.last_seq is not None and batch.seq <= self.last_seq:
            log.info("seq regression (%d after %d): resetting averaging state", batch.seq, self.last_seq)
            self.reset()
        self.last_seq = batch.seq

        prev = self.previous
        if prev is not None:
            reporting = {n.node_id for n in batch.nodes}
            adjusted: list[NodeMetrics] = []
            for node in prev.nodes:
                if node.node_id in reporting:
                    self._missing.pop(node.node_id, None)
                    adjusted.append(node)
                    continue
                streak = self._missing.get(node.node_id, 0) + 1
                self._missing[node.node_id] = streak
                if streak > self.missing_zero_after:
                    node = NodeMetrics(node.node_id, node.partition_id, 0.0, 0.0, 0.0)
                adjusted.append(node)
            prev = Batch(prev.seq, prev.timestamp, tuple(adjusted))

        averaged = average_with_previous(batch, prev)
        self.previous = averaged
        return averaged


def aggregate_partition(batch: Batch, table: PartitionTable) -> dict[str, tuple[float, float, float]]:
    """Arithmetic mean of (procs, memusage, ibtx) over each partition's
    reporting nodes. Every table partition appears in the output; a partition
    with no reporting nodes yields (0, 0, 0).
    """
    sums: dict[str, list[float]] = {pid: [0.0, 0.0, 0.0, 0.0] for pid in table.partition_ids}
    for node in batch.nodes:
        acc = sums.get(node.partition_id)
        if acc is None:
            continue
        acc[0] += node.procs
        acc[1] += node.memusage
        acc[2] += node.ibtx
        acc[3] += 1.0
    out: dict[str, tuple[float, float, float]] = {}
    for pid in table.partition_ids:
        s = sums[pid]
        if s[3] == 0:
            out[pid] = (0.0, 0.0, 0.0)
        else:
            out[pid] = (s[0] / s[3], s[1] / s[3], s[2] / s[3])
    return out
