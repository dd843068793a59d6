"""
Reaction-diffusion propagation of age probability vectors

Every node carries a probability vector over the C age categories (a
ProbVector: one row of an (n, C) float64 array). Seeds start one-hot at
their category, all other nodes start uniform. Each iteration mixes the
node's initial vector (weight 1 - lambda) with the weighted mean of its
neighbors' previous vectors (weight lambda):

    g[x, t] = (1 - lambda) g[x, 0] + lambda sum_y w[y, x] g[y, t-1] / sum_y w[y, x]

In masked mode the mean only runs over neighbors that are already informed,
i.e. reached by seed information. A node is informed from the first
iteration where one of its neighbors was informed; seeds are informed from
the start. Updates are synchronous: iteration t reads iteration t - 1 only.
"""

import logging
import typing
from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numba
import numpy as np
from numba import njit, prange

from agediffusion.exceptions import ConfigError, DataError, InvariantViolation
from agediffusion.models.base_model import Model
from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.graph import Graph
from agediffusion.models.labeling import collapse_argmax
from agediffusion.models.partition import NodePartition, NodeRoles

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9


class PropagationConfig(Model):
    """
    Propagation parameters.

    Attributes:
        lam (float): reaction / diffusion mix lambda in [0, 1]
        t_end (int): number of iterations, >= 0
        masked (bool): mean field over informed neighbors only
        use_weights (bool): weight neighbors by w[y, x] instead of 1
    """

    field_types: typing.Dict[str, type] = {
        'lam': float,
        't_end': int,
        'masked': bool,
        'use_weights': bool,
    }

    attribute_map: typing.Dict[str, str] = {
        'lam': 'lambda',
        't_end': 'iterations',
        'masked': 'masked',
        'use_weights': 'use_weights',
    }

    def __init__(self, lam: float = 0.5, t_end: int = 30, masked: bool = True,
                 use_weights: bool = False):
        self.lam = lam
        self.t_end = t_end
        self.masked = masked
        self.use_weights = use_weights

    def validate(self) -> "PropagationConfig":
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.t_end < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.t_end}")
        return self


@dataclass
class PropagationState:
    """
    Attributes:
        current: (n, C) vectors at iteration t
        initial: (n, C) vectors at iteration 0
        informed: bool per node
        t: iteration counter
    """

    current: np.ndarray
    initial: np.ndarray
    informed: np.ndarray
    t: int = 0

    @property
    def num_categories(self) -> int:
        return int(self.initial.shape[1])


@dataclass(frozen=True)
class ProbabilityTable:
    """Final per-node vectors of a run, tied to the graph they live on"""

    graph: Graph
    probs: np.ndarray
    informed: np.ndarray
    t: int

    @property
    def num_categories(self) -> int:
        return int(self.probs.shape[1])


PartitionLike = Union[NodePartition, NodeRoles]
Observer = Callable[[PropagationState], None]


def bind_roles(graph: Graph, partition: PartitionLike) -> NodeRoles:
    roles = partition if isinstance(partition, NodeRoles) else partition.bind(graph)
    if roles.n != graph.n:
        raise DataError(f"partition covers {roles.n} nodes, graph has {graph.n}")
    return roles


def set_threads(threads: Optional[int]) -> None:
    """Numba worker count for the data-parallel kernels; None keeps the default"""
    if threads:
        numba.set_num_threads(min(int(threads), numba.config.NUMBA_NUM_THREADS))


@njit(parallel=True, cache=True)
def _diffusion_step(offsets, neighbors, weights, current, initial, informed,
                    lam, masked, use_weights, out, out_informed):
    n, c = current.shape
    for x in prange(n):
        for a in range(c):
            out[x, a] = 0.0
        total = 0.0
        reached = informed[x]
        # fixed CSR order per node keeps results independent of thread count
        for k in range(offsets[x], offsets[x + 1]):
            y = neighbors[k]
            if informed[y]:
                reached = True
            elif masked:
                continue
            w = weights[k] if use_weights else 1.0
            total += w
            for a in range(c):
                out[x, a] += w * current[y, a]
        out_informed[x] = reached
        if total == 0.0:
            for a in range(c):
                out[x, a] = initial[x, a]
            continue
        norm = 0.0
        for a in range(c):
            value = (1.0 - lam) * initial[x, a] + lam * out[x, a] / total
            out[x, a] = value
            norm += value
        for a in range(c):
            out[x, a] /= norm


def init_state(graph: Graph, partition: PartitionLike,
               scheme: Optional[CategoryScheme] = None) -> PropagationState:
    """
    Initial vectors: one-hot at a(x) for seeds, uniform 1/C otherwise.

    Args:
        graph: graph the state lives on
        partition: seed labels (NodePartition or NodeRoles bound to graph)
        scheme: category scheme; defaults to the partition's C
    """
    roles = bind_roles(graph, partition)
    c = scheme.num_categories if scheme is not None else roles.num_categories
    seed_mask = roles.seed_mask
    seed_labels = roles.label[seed_mask]
    if seed_labels.size and (seed_labels.min() < 0 or seed_labels.max() >= c):
        raise DataError(f"seed label outside [0, {c})")

    initial = np.full((graph.n, c), 1.0 / c)
    initial[seed_mask] = 0.0
    initial[np.flatnonzero(seed_mask), seed_labels] = 1.0
    return PropagationState(initial.copy(), initial, seed_mask.copy(), 0)


def _advance(state: PropagationState, graph: Graph, cfg: PropagationConfig,
             out: np.ndarray, out_informed: np.ndarray) -> PropagationState:
    if state.current.shape[0] != graph.n:
        raise DataError(f"state has {state.current.shape[0]} nodes, graph has {graph.n}")
    _diffusion_step(graph.offsets, graph.neighbors, graph.weights, state.current,
                    state.initial, state.informed, float(cfg.lam), bool(cfg.masked),
                    bool(cfg.use_weights), out, out_informed)
    return PropagationState(out, state.initial, out_informed, state.t + 1)


def step(state: PropagationState, graph: Graph, cfg: PropagationConfig) -> PropagationState:
    """One synchronous iteration; the input state is left untouched"""
    cfg.validate()
    out = np.empty_like(state.current)
    out_informed = np.empty_like(state.informed)
    return _advance(state, graph, cfg, out, out_informed)


def evolve(graph: Graph, partition: PartitionLike, cfg: PropagationConfig,
           scheme: Optional[CategoryScheme] = None,
           observer: Optional[Observer] = None) -> PropagationState:
    """
    Run t_end iterations from init_state with double buffering.

    observer, when given, is called with the state after initialization and
    after every iteration; it must not keep references to the arrays.
    """
    cfg.validate()
    state = init_state(graph, partition, scheme)
    if observer is not None:
        observer(state)
    spare = np.empty_like(state.current)
    spare_informed = np.empty_like(state.informed)
    for _ in range(cfg.t_end):
        previous = state
        state = _advance(previous, graph, cfg, spare, spare_informed)
        spare, spare_informed = previous.current, previous.informed
        if observer is not None:
            observer(state)
    return state


def run(graph: Graph, partition: PartitionLike, cfg: PropagationConfig,
        scheme: Optional[CategoryScheme] = None,
        observer: Optional[Observer] = None) -> ProbabilityTable:
    """
    Propagate seed information for cfg.t_end iterations.

    Returns:
        ProbabilityTable with the final vectors and informed flags
    """
    state = evolve(graph, partition, cfg, scheme, observer)
    logger.info("Propagation complete: %s", {
        'nodes': graph.n,
        'iterations': state.t,
        'lambda': cfg.lam,
        'masked': cfg.masked,
        'informed': int(state.informed.sum()),
    })
    return ProbabilityTable(graph, state.current, state.informed, state.t)


def check_normalized(probs: np.ndarray, tolerance: float = NORMALIZATION_TOLERANCE) -> None:
    """Raises InvariantViolation unless every row is a probability vector"""
    if probs.size == 0:
        return
    if (probs < 0).any() or (probs > 1 + tolerance).any():
        raise InvariantViolation("probability entry outside [0, 1]")
    if np.abs(probs.sum(axis=1) - 1.0).max() > tolerance:
        raise InvariantViolation("probability vector does not sum to 1")


def validation_accuracy(probs: np.ndarray, roles: NodeRoles) -> float:
    """Share of validation nodes whose argmax category equals their label"""
    mask = roles.validation_mask
    if not mask.any():
        raise DataError("empty validation set")
    predicted = collapse_argmax(probs).category
    return float((predicted[mask] == roles.label[mask]).mean())


def convergence_trace(graph: Graph, partition: PartitionLike, cfg: PropagationConfig,
                      evaluate: Optional[Callable[[PropagationState], float]] = None,
                      scheme: Optional[CategoryScheme] = None) -> List[float]:
    """
    Validation accuracy after every iteration, iteration 0 being the priors.

    Args:
        evaluate: maps a state to a score; defaults to argmax accuracy on
                  the validation nodes of partition

    Returns:
        list of length t_end + 1
    """
    roles = bind_roles(graph, partition)
    if evaluate is None:
        if roles.validation_count == 0:
            raise DataError("empty validation set")

        def evaluate(state: PropagationState) -> float:
            return validation_accuracy(state.current, roles)

    trace: List[float] = []
    evolve(graph, roles, cfg, scheme, observer=lambda state: trace.append(evaluate(state)))
    return trace
