"""
Dense Laplacian form of the propagation, used as an equivalence oracle

For each category a the neighbor average of the local update is D^-1 A g^a.
With h^a = D^(1/2) g^a it becomes the symmetric operator

    D^-1/2 (D - L) D^-1/2 = I - calL,   calL = D^-1/2 L D^-1/2,

so iterating

    h_t = (1 - lambda) h_0 + lambda (I - calL) h_{t-1}

and mapping back with g = D^-1/2 h reproduces the local update exactly on
any graph. Dense matrices limit this to small graphs; it only supports the
unmasked update and graphs without isolated nodes.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.graph import Graph
from agediffusion.models.propagation import (
    PartitionLike,
    PropagationConfig,
    ProbabilityTable,
    init_state,
)

ORACLE_MAX_NODES = 2000


@dataclass(frozen=True)
class OperatorMatrices:
    """
    Attributes:
        adjacency: A, A[i, j] = w[i, j]
        degree: D, diagonal (weighted) degree
        laplacian: L = D - A
        normalized_laplacian: calL = D^-1/2 L D^-1/2
    """

    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray
    normalized_laplacian: np.ndarray


def operator_matrices(graph: Graph, use_weights: bool = False) -> OperatorMatrices:
    if graph.n > ORACLE_MAX_NODES:
        raise ConfigError(f"dense operators are limited to {ORACLE_MAX_NODES} nodes, got {graph.n}")
    adjacency = graph.to_scipy(use_weights=use_weights).toarray()
    degrees = adjacency.sum(axis=1)
    if (degrees <= 0).any():
        raise DataError("graph has isolated nodes; D is not invertible")
    degree = np.diag(degrees)
    laplacian = degree - adjacency
    inv_sqrt = np.diag(1.0 / np.sqrt(degrees))
    return OperatorMatrices(adjacency, degree, laplacian, inv_sqrt @ laplacian @ inv_sqrt)


def laplacian_oracle_run(graph: Graph, partition: PartitionLike, cfg: PropagationConfig,
                         scheme: Optional[CategoryScheme] = None) -> ProbabilityTable:
    """Unmasked propagation computed category by category with dense matrices"""
    cfg.validate()
    if cfg.masked:
        raise ConfigError("the Laplacian oracle only covers the unmasked update")
    ops = operator_matrices(graph, cfg.use_weights)
    state = init_state(graph, partition, scheme)

    sqrt_deg = np.sqrt(np.diag(ops.degree))
    diffusion = np.eye(graph.n) - ops.normalized_laplacian
    result = np.empty_like(state.initial)
    for a in range(state.num_categories):
        h0 = sqrt_deg * state.initial[:, a]
        h = h0
        for _ in range(cfg.t_end):
            h = (1.0 - cfg.lam) * h0 + cfg.lam * (diffusion @ h)
        result[:, a] = h / sqrt_deg

    informed = state.informed.copy()
    for _ in range(cfg.t_end):
        informed = informed | (ops.adjacency @ informed.astype(np.float64) > 0)
    return ProbabilityTable(graph, result, informed, cfg.t_end)
