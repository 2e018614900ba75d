"""Cluster activity simulator: plausible per-node metric batches in the wire
format, standing in for the live machine at desk scale and in tests.

Each node runs a small Markov chain over {idle, busy, io_heavy}. When a
node's dwell counter expires the next activity is drawn from the configured
transition row and fresh levels are drawn from that state's distributions.
Seeded runs are bit-reproducible.
"""

from __future__ import annotations

import argparse
import socket
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import DEFAULT_PARTITIONS
from .protocol import Batch, NodeMetrics, PartitionTable, serialize_batch

ACTIVITIES = ("idle", "busy", "io_heavy")

# level ranges: procs U{lo..hi}, mem U[lo,hi], ibtx U[lo,hi]
DEFAULT_LEVELS = {
    "idle": {"procs": (0, 0), "mem": (0.0, 0.05), "ibtx": (0.0, 0.0)},
    "busy": {"procs": (10, 200), "mem": (0.2, 0.9), "ibtx": (0.0, 1e6)},
    "io_heavy": {"procs": (10, 200), "mem": (0.2, 0.9), "ibtx": (1e7, 1e9)},
}

DEFAULT_TRANSITIONS = {
    "idle": {"idle": 0.85, "busy": 0.12, "io_heavy": 0.03},
    "busy": {"idle": 0.10, "busy": 0.78, "io_heavy": 0.12},
    "io_heavy": {"idle": 0.12, "busy": 0.38, "io_heavy": 0.50},
}

# batches spent in a state before the next transition draw
DEFAULT_DWELL = {"idle": (1, 1), "busy": (1, 1), "io_heavy": (1, 1)}


@dataclass(frozen=True)
class NodeSimState:
    node_id: str
    partition_id: str
    activity: str
    procs_level: int
    mem_level: float
    ibtx_level: float
    dwell_remaining: int


@dataclass
class SimConfig:
    partitions: list = field(default_factory=lambda: [list(p) for p in DEFAULT_PARTITIONS])
    transitions: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_TRANSITIONS.items()})
    levels: dict = field(default_factory=lambda: {k: {m: tuple(r) for m, r in v.items()} for k, v in DEFAULT_LEVELS.items()})
    dwell: dict = field(default_factory=lambda: dict(DEFAULT_DWELL))
    rng_seed: int = 0
    batch_interval: float = 15.0
    start_ts: float = 0.0
    initial_activity: str = "idle"

    def validate(self) -> None:
        for state, row in self.transitions.items():
            if state not in ACTIVITIES:
                raise ValueError(f"unknown activity {state!r}")
            total = sum(row.get(a, 0.0) for a in ACTIVITIES)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"transition row {state!r} sums to {total}, not 1")

    def transition_matrix(self) -> np.ndarray:
        return np.array([[self.transitions[a].get(b, 0.0) for b in ACTIVITIES] for a in ACTIVITIES])


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Left eigenvector of the transition matrix for eigenvalue 1, normalized."""
    n = matrix.shape[0]
    a = np.vstack([matrix.T - np.eye(n), np.ones(n)])
    b = np.concatenate([np.zeros(n), [1.0]])
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def _draw_levels(config: SimConfig, activity: str, rng: np.random.Generator) -> tuple[int, float, float]:
    lv = config.levels[activity]
    plo, phi = lv["procs"]
    procs = int(rng.integers(plo, phi + 1)) if phi > plo else int(plo)
    mlo, mhi = lv["mem"]
    mem = float(rng.uniform(mlo, mhi)) if mhi > mlo else float(mlo)
    ilo, ihi = lv["ibtx"]
    ibtx = float(rng.uniform(ilo, ihi)) if ihi > ilo else float(ilo)
    return procs, mem, ibtx


def _draw_dwell(config: SimConfig, activity: str, rng: np.random.Generator) -> int:
    dlo, dhi = config.dwell[activity]
    return int(rng.integers(dlo, dhi + 1)) if dhi > dlo else int(dlo)


def node_transition(state: NodeSimState, config: SimConfig, rng: np.random.Generator) -> NodeSimState:
    """Advance one node by one batch: decrement dwell; on expiry draw the
    next activity from the Markov row and redraw levels and dwell."""
    dwell = state.dwell_remaining - 1
    if dwell > 0:
        return replace(state, dwell_remaining=dwell)
    row = config.transitions[state.activity]
    probs = [row.get(a, 0.0) for a in ACTIVITIES]
    nxt = ACTIVITIES[int(rng.choice(len(ACTIVITIES), p=probs))]
    procs, mem, ibtx = _draw_levels(config, nxt, rng)
    return NodeSimState(
        node_id=state.node_id,
        partition_id=state.partition_id,
        activity=nxt,
        procs_level=procs,
        mem_level=mem,
        ibtx_level=ibtx,
        dwell_remaining=_draw_dwell(config, nxt, rng),
    )


class ClusterSim:
    """Whole-cluster simulator emitting one wire message per step."""

    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()
        self.config.validate()
        self.table = PartitionTable.from_config(self.config.partitions)
        self.rng = np.random.default_rng(self.config.rng_seed)
        self.seq = 0
        self.nodes: list[NodeSimState] = []
        for entry in self.table.entries:
            for i in range(entry.node_count):
                activity = self.config.initial_activity
                procs, mem, ibtx = _draw_levels(self.config, activity, self.rng)
                self.nodes.append(
                    NodeSimState(
                        node_id=f"{entry.partition_id}-{i:02d}",
                        partition_id=entry.partition_id,
                        activity=activity,
                        procs_level=procs,
                        mem_level=mem,
                        ibtx_level=ibtx,
                        dwell_remaining=_draw_dwell(self.config, activity, self.rng),
                    )
                )

    def step(self) -> str:
        """Advance every node one batch and return the wire-format line."""
        self.nodes = [node_transition(n, self.config, self.rng) for n in self.nodes]
        batch = Batch(
            seq=self.seq,
            timestamp=self.config.start_ts + self.seq * self.config.batch_interval,
            nodes=tuple(
                NodeMetrics(
                    node_id=n.node_id,
                    partition_id=n.partition_id,
                    procs=float(n.procs_level),
                    memusage=n.mem_level,
                    ibtx=n.ibtx_level,
                )
                for n in self.nodes
            ),
        )
        self.seq += 1
        return serialize_batch(batch)

    def run_lines(self, batches: int) -> list[str]:
        return [self.step() for _ in range(batches)]


def write_log(path: str, seed: int, batches: int, interval: float = 15.0, config: SimConfig | None = None) -> None:
    cfg = config or SimConfig()
    cfg.rng_seed = seed
    cfg.batch_interval = interval
    sim = ClusterSim(cfg)
    with open(path, "w") as f:
        for line in sim.run_lines(batches):
            f.write(line + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clusterbeat-sim", description="Emit simulated cluster metric batches.")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--interval", type=float, default=15.0, help="seconds between batches (sleep is paced unless --no-wait)")
    parser.add_argument("--batches", type=int, default=0, help="stop after N batches (0 = run forever)")
    parser.add_argument("--out", default="-", help="output: '-' for stdout, a file path, or host:port")
    parser.add_argument("--no-wait", action="store_true", help="emit as fast as possible")
    args = parser.parse_args(argv)

    cfg = SimConfig(rng_seed=args.seed, batch_interval=args.interval)
    sim = ClusterSim(cfg)

    sock = None
    if args.out == "-":
        out = sys.stdout
    elif ":" in args.out and not args.out.endswith(".log") and "/" not in args.out:
        host, port = args.out.rsplit(":", 1)
        sock = socket.create_connection((host, int(port)))
        out = sock.makefile("w")
    else:
        out = open(args.out, "w")

    try:
        n = 0
        while args.batches <= 0 or n < args.batches:
            out.write(sim.step() + "\n")
            out.flush()
            n += 1
            if not args.no_wait and (args.batches <= 0 or n < args.batches):
                time.sleep(args.interval)
    except (KeyboardInterrupt, BrokenPipeError):
        pass
    finally:
        if out is not sys.stdout:
            out.close()
        if sock is not None:
            sock.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
