"""
Graph pruning

Both prunes are single passes over the graph they receive: degree pruning
uses the original degrees and is not iterated; component pruning keeps the
connected components holding at least one seed.
"""

import logging

import numpy as np
from scipy.sparse.csgraph import connected_components

from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.graph import Graph
from agediffusion.models.partition import NodePartition

logger = logging.getLogger(__name__)

DEFAULT_PRUNE_CAP = 100


def prune_high_degree(graph: Graph, cap: int = DEFAULT_PRUNE_CAP) -> Graph:
    """
    Remove every node whose degree exceeds cap, with its incident edges.

    Nodes left isolated by the removal are kept.
    """
    if cap < 1:
        raise ConfigError(f"prune cap must be >= 1, got {cap}")
    keep = graph.degree() <= cap
    pruned = graph.induced_subgraph(keep)
    logger.info("Degree pruning complete: %s", {
        'cap': cap,
        'nodes_removed': graph.n - pruned.n,
        'edges_removed': graph.edge_count - pruned.edge_count,
    })
    return pruned


def component_labels(graph: Graph) -> np.ndarray:
    """Connected component id per node"""
    if graph.n == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = connected_components(graph.to_scipy(use_weights=False), directed=False)
    return labels


def prune_seedless_components(graph: Graph, partition: NodePartition) -> Graph:
    """
    Keep only the connected components that contain at least one seed.

    Raises:
        DataError: when no seed of the partition is in the graph
    """
    seed_mask = partition.bind(graph).seed_mask
    if not seed_mask.any():
        raise DataError("no seed node in the graph; every component would be pruned")
    labels = component_labels(graph)
    seeded = np.unique(labels[seed_mask])
    keep = np.isin(labels, seeded)
    pruned = graph.induced_subgraph(keep)
    logger.info("Component pruning complete: %s", {
        'components_kept': int(seeded.shape[0]),
        'components_total': int(labels.max()) + 1,
        'nodes_removed': graph.n - pruned.n,
    })
    return pruned
