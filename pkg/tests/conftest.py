import json

import pytest

from clusterbeat.config import Config
from clusterbeat.protocol import PartitionTable


@pytest.fixture
def table() -> PartitionTable:
    return PartitionTable.from_config(Config().partitions)


@pytest.fixture
def cfg() -> Config:
    return Config()


def node_dict(node_id="gpu+cpu_sky-00", partition="gpu+cpu_sky", procs=0, mem=0.0, ibtx=0.0):
    return {"id": node_id, "partition": partition, "procs": procs, "mem": mem, "ibtx": ibtx}


def batch_line(seq=0, ts=0.0, nodes=()):
    return json.dumps({"type": "batch", "seq": seq, "ts": ts, "nodes": list(nodes)})
