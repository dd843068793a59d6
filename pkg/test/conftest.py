"""
Shared fixtures: small hand-built graphs and random graph factories
"""

import numpy as np
import pytest

from agediffusion.models.graph import Graph, ingest_edge_list
from agediffusion.models.partition import NodePartition


def build_graph(lines):
    """Graph from 'src dst [weight]' strings"""
    return ingest_edge_list(lines)


def random_graph(n, mean_degree, seed, connected=True, weighted=False):
    """
    Random graph on n nodes with about n * mean_degree / 2 edges.

    With connected=True a random spanning path is laid first, so no node is
    isolated and the graph has a single component.
    """
    rng = np.random.default_rng(seed)
    m = int(n * mean_degree / 2)
    u = rng.integers(0, n, size=m)
    v = rng.integers(0, n, size=m)
    if connected:
        order = rng.permutation(n)
        u = np.concatenate([u, order[:-1]])
        v = np.concatenate([v, order[1:]])
    w = rng.uniform(0.5, 3.0, size=u.shape[0]) if weighted else None
    width = len(str(n - 1))
    ids = [f"v{i:0{width}d}" for i in range(n)]
    return Graph.from_index_edges(n, u, v, ids, w, weighted=weighted)


def random_partition(graph, seed_share, num_categories, seed, validation_share=0.0):
    """Random seeds and validation nodes with random labels"""
    rng = np.random.default_rng(seed)
    ids = graph.node_ids.tolist()
    draw = rng.random(len(ids))
    labels = rng.integers(0, num_categories, size=len(ids))
    seeds = {k: int(c) for k, c, d in zip(ids, labels, draw) if d < seed_share}
    validation = {k: int(c) for k, c, d in zip(ids, labels, draw)
                  if seed_share <= d < seed_share + validation_share}
    if not seeds:
        seeds = {ids[0]: int(labels[0])}
        validation.pop(ids[0], None)
    return NodePartition(seeds, validation, num_categories)


@pytest.fixture
def make_graph():
    return build_graph


@pytest.fixture
def make_random_graph():
    return random_graph


@pytest.fixture
def make_random_partition():
    return random_partition


@pytest.fixture
def path_graph():
    """s - a - b - c - d - e"""
    return build_graph(["s a", "a b", "b c", "c d", "d e"])


@pytest.fixture
def triangle():
    return build_graph(["x y", "y z", "x z"])
