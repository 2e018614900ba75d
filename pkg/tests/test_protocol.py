import json

import jsonschema
import pytest

from clusterbeat.protocol import (
    Batch,
    BatchCombiner,
    NodeMetrics,
    ParseError,
    ParseStats,
    aggregate_partition,
    average_with_previous,
    parse_batch_message,
    serialize_batch,
)

from conftest import batch_line, node_dict

# Independent schema oracle for the wire format.
WIRE_SCHEMA = {
    "type": "object",
    "required": ["type", "seq", "ts", "nodes"],
    "properties": {
        "type": {"const": "batch"},
        "seq": {"type": "integer", "minimum": 0},
        "ts": {"type": "number"},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "partition", "procs", "mem", "ibtx"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "partition": {"type": "string"},
                    "procs": {"type": "number", "minimum": 0},
                    "mem": {"type": "number", "minimum": 0.0, "maximum": 1.0},
                    "ibtx": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


def test_default_table_matches_cluster_layout(table):
    assert len(table) == 10
    counts = [e.node_count for e in table.entries]
    assert counts == [8, 48, 1, 8, 10, 3, 13, 1, 2, 1]
    assert table.total_nodes() == 95
    assert len(set(table.layer_ids)) == 10


def test_parse_empty_nodes(table):
    batch = parse_batch_message(batch_line(seq=3, ts=45.0), table)
    assert batch.seq == 3
    assert batch.nodes == ()


def test_parse_single_node_round_trip(table):
    line = batch_line(nodes=[node_dict(procs=0, mem=0.0, ibtx=0.0)])
    batch = parse_batch_message(line, table)
    assert len(batch.nodes) == 1
    n = batch.nodes[0]
    assert (n.procs, n.memusage, n.ibtx) == (0.0, 0.0, 0.0)
    assert n.partition_id == "gpu+cpu_sky"


def test_parse_clamps_memusage(table):
    stats = ParseStats()
    line = batch_line(nodes=[node_dict(mem=1.7)])
    batch = parse_batch_message(line, table, stats)
    assert batch.nodes[0].memusage == 1.0
    assert stats.clamped_memusage == 1
    # schema oracle: the re-serialized message must validate
    jsonschema.validate(json.loads(serialize_batch(batch)), WIRE_SCHEMA)


def test_parse_negative_memusage_clamps_to_zero(table):
    batch = parse_batch_message(batch_line(nodes=[node_dict(mem=-0.25)]), table)
    assert batch.nodes[0].memusage == 0.0


@pytest.mark.parametrize(
    "raw",
    [
        "not json at all",
        '{"type":"other","seq":0,"ts":0,"nodes":[]}',
        '{"seq":0,"ts":0,"nodes":[]}',
        '{"type":"batch","seq":-1,"ts":0,"nodes":[]}',
        '{"type":"batch","seq":0.5,"ts":0,"nodes":[]}',
        '{"type":"batch","seq":0,"ts":"x","nodes":[]}',
        '{"type":"batch","seq":0,"ts":0,"nodes":{}}',
        "[1,2,3]",
    ],
)
def test_parse_rejects_malformed_messages(table, raw):
    stats = ParseStats()
    with pytest.raises(ParseError):
        parse_batch_message(raw, table, stats)
    assert stats.parse_errors == 1


def test_parse_drops_unknown_partition(table):
    stats = ParseStats()
    line = batch_line(nodes=[node_dict(), node_dict(node_id="x", partition="nope")])
    batch = parse_batch_message(line, table, stats)
    assert len(batch.nodes) == 1
    assert stats.dropped_nodes == 1


def test_parse_drops_invalid_node_fields(table):
    stats = ParseStats()
    bad = [
        node_dict(node_id="a", procs=-3),
        node_dict(node_id="b", ibtx=-1.0),
        node_dict(node_id="c", procs=2.5),
        {"id": "d", "partition": "gpu+cpu_sky"},
        "not a node",
    ]
    batch = parse_batch_message(batch_line(nodes=bad), table, stats)
    assert batch.nodes == ()
    assert stats.dropped_nodes == 5


def test_parse_keeps_first_duplicate(table):
    stats = ParseStats()
    line = batch_line(nodes=[node_dict(procs=1), node_dict(procs=9)])
    batch = parse_batch_message(line, table, stats)
    assert len(batch.nodes) == 1
    assert batch.nodes[0].procs == 1.0
    assert stats.duplicate_nodes == 1


def test_parse_rejects_oversized_batch(table):
    nodes = [node_dict(node_id=f"n{i}", partition="cpu_sky") for i in range(96)]
    with pytest.raises(ParseError):
        parse_batch_message(batch_line(nodes=nodes), table)


def test_round_trip_stability(table):
    nodes = [
        node_dict(node_id="a", partition="cpu_sky", procs=17, mem=0.43, ibtx=1.5e6),
        node_dict(node_id="b", partition="gpu+cpu_zen4", procs=0, mem=0.01, ibtx=0.0),
    ]
    first = parse_batch_message(batch_line(seq=9, ts=135.0, nodes=nodes), table)
    again = parse_batch_message(serialize_batch(first), table)
    assert first == again
    jsonschema.validate(json.loads(serialize_batch(first)), WIRE_SCHEMA)


# ---- averaging -------------------------------------------------------------


def _node(node_id, procs, mem=0.5, ibtx=100.0, partition="cpu_sky"):
    return NodeMetrics(node_id, partition, float(procs), mem, ibtx)


def _batch(seq, *nodes):
    return Batch(seq=seq, timestamp=float(seq) * 15.0, nodes=tuple(nodes))


def test_average_first_batch_passthrough():
    cur = _batch(0, _node("a", 20))
    out = average_with_previous(cur, None)
    assert out is cur


def test_average_arithmetic_mean():
    prev = _batch(0, _node("a", 10, mem=0.2, ibtx=0.0))
    cur = _batch(1, _node("a", 20, mem=0.4, ibtx=50.0))
    out = average_with_previous(cur, prev)
    assert out.nodes[0].procs == 15.0
    assert out.nodes[0].memusage == pytest.approx(0.3)
    assert out.nodes[0].ibtx == 25.0


def reference_merge(current: Batch, previous: Batch | None) -> dict:
    """Independent dict-based merge for the stale-fill rule."""
    if previous is None:
        return {n.node_id: (n.procs, n.memusage, n.ibtx) for n in current.nodes}
    prev = {n.node_id: (n.procs, n.memusage, n.ibtx) for n in previous.nodes}
    out = {}
    for n in current.nodes:
        if n.node_id in prev:
            p = prev[n.node_id]
            out[n.node_id] = ((n.procs + p[0]) / 2, (n.memusage + p[1]) / 2, (n.ibtx + p[2]) / 2)
        else:
            out[n.node_id] = (n.procs, n.memusage, n.ibtx)
    for nid, vals in prev.items():
        if nid not in out:
            out[nid] = vals
    return out


def test_average_stale_fill_matches_reference_merge():
    prev = _batch(0, _node("x", 8), _node("y", 2))
    cur = _batch(1, _node("y", 6), _node("z", 4))
    out = average_with_previous(cur, prev)
    got = {n.node_id: (n.procs, n.memusage, n.ibtx) for n in out.nodes}
    assert got == reference_merge(cur, prev)
    assert got["x"] == (8.0, 0.5, 100.0)  # carried forward unchanged


def test_average_random_streams_match_reference(table):
    import numpy as np

    rng = np.random.default_rng(42)
    ids = [f"n{i}" for i in range(12)]
    prev = None
    for seq in range(200):
        present = [i for i in ids if rng.random() < 0.8]
        cur = _batch(seq, *(_node(i, rng.integers(0, 50), rng.random(), rng.random() * 1e6) for i in present))
        out = average_with_previous(cur, prev)
        got = {n.node_id: (n.procs, n.memusage, n.ibtx) for n in out.nodes}
        assert got == reference_merge(cur, prev)
        prev = out


def test_average_bounded_by_prev_and_cur():
    import numpy as np

    rng = np.random.default_rng(3)
    prev = None
    last = {}
    for seq in range(100):
        cur = _batch(seq, *(_node(f"n{i}", rng.integers(0, 100), rng.random(), rng.random() * 1e8) for i in range(5)))
        out = average_with_previous(cur, prev)
        cur_map = cur.by_node()
        for node in out.nodes:
            if node.node_id in cur_map and node.node_id in last:
                for attr in ("procs", "memusage", "ibtx"):
                    lo = min(getattr(cur_map[node.node_id], attr), getattr(last[node.node_id], attr))
                    hi = max(getattr(cur_map[node.node_id], attr), getattr(last[node.node_id], attr))
                    assert lo <= getattr(node, attr) <= hi
        prev = out
        last = out.by_node()


def test_combiner_zeros_after_extended_absence():
    combiner = BatchCombiner(missing_zero_after=4)
    combiner.push(_batch(0, _node("a", 16), _node("b", 4)))
    out = None
    for seq in range(1, 5):  # a missing for 4 batches: still stale-filled
        out = combiner.push(_batch(seq, _node("b", 4)))
        a = out.by_node()["a"]
        assert a.procs == 16.0
    out = combiner.push(_batch(5, _node("b", 4)))  # 5th consecutive miss: zeros
    a = out.by_node()["a"]
    assert (a.procs, a.memusage, a.ibtx) == (0.0, 0.0, 0.0)


def test_combiner_seq_regression_resets():
    combiner = BatchCombiner()
    combiner.push(_batch(10, _node("a", 100)))
    out = combiner.push(_batch(2, _node("a", 10)))  # producer restart
    assert out.by_node()["a"].procs == 10.0  # no averaging against stale state
    assert combiner.last_seq == 2


# ---- aggregation ------------------------------------------------------------


def test_aggregate_partition_mean(table):
    batch = _batch(
        0,
        _node("a", 2, mem=0.2, ibtx=10, partition="cpu_sky"),
        _node("b", 4, mem=0.4, ibtx=30, partition="cpu_sky"),
    )
    out = aggregate_partition(batch, table)
    assert out["cpu_sky"] == (3.0, pytest.approx(0.3), 20.0)


def test_aggregate_empty_partition_yields_zeros(table):
    out = aggregate_partition(_batch(0), table)
    assert len(out) == len(table)
    assert all(v == (0.0, 0.0, 0.0) for v in out.values())


def test_aggregate_full_default_batch_yields_ten_triples(table):
    nodes = []
    for entry in table.entries:
        for i in range(entry.node_count):
            nodes.append(_node(f"{entry.partition_id}-{i}", 10, partition=entry.partition_id))
    out = aggregate_partition(_batch(0, *nodes), table)
    assert len(out) == 10
    assert set(out.keys()) == set(table.partition_ids)


def test_aggregate_count_independent_of_reporting(table):
    batch = _batch(0, _node("only", 5, partition="cpu_zen3"))
    out = aggregate_partition(batch, table)
    assert len(out) == len(table)
    assert out["cpu_zen3"] == (5.0, 0.5, 100.0)
