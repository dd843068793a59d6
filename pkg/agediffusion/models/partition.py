"""
Ground truth labels and the seed / validation partition

Labels are keyed by external node id so a partition can be bound to any
graph that contains the nodes (before or after pruning). Binding produces
per-internal-id arrays used by the numerical code.
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Mapping, TextIO

import numpy as np

from agediffusion import util
from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.category_scheme import CategoryScheme, assign_category
from agediffusion.models.graph import Graph

logger = logging.getLogger(__name__)

LABEL_MODES = ('age', 'category')


class Role(IntEnum):
    UNKNOWN = 0
    SEED = 1
    VALIDATION = 2


NO_LABEL = -1


@dataclass(frozen=True)
class NodeRoles:
    """
    A partition bound to one graph.

    Attributes:
        role: int8 Role per internal id
        label: int64 category per internal id, NO_LABEL for unknown nodes
        num_categories: C
    """

    role: np.ndarray
    label: np.ndarray
    num_categories: int

    @property
    def n(self) -> int:
        return int(self.role.shape[0])

    @property
    def seed_mask(self) -> np.ndarray:
        return self.role == Role.SEED

    @property
    def validation_mask(self) -> np.ndarray:
        return self.role == Role.VALIDATION

    @property
    def seed_count(self) -> int:
        return int(self.seed_mask.sum())

    @property
    def validation_count(self) -> int:
        return int(self.validation_mask.sum())

    def permuted(self, perm: np.ndarray) -> "NodeRoles":
        """Roles after relabeling: new node i is old node perm[i]"""
        return NodeRoles(self.role[perm], self.label[perm], self.num_categories)


@dataclass(frozen=True)
class NodePartition:
    """
    Seed (N_S) and validation (N_V) nodes with their category labels.

    Attributes:
        seeds: external id -> category index
        validation: external id -> category index
        num_categories: C
    """

    seeds: Dict[str, int] = field(default_factory=dict)
    validation: Dict[str, int] = field(default_factory=dict)
    num_categories: int = 4

    def __post_init__(self):
        overlap = self.seeds.keys() & self.validation.keys()
        if overlap:
            raise DataError(f"{len(overlap)} nodes are both seed and validation")
        for labels in (self.seeds, self.validation):
            for node_id, category in labels.items():
                if not 0 <= category < self.num_categories:
                    raise DataError(
                        f"label {category} of node {node_id!r} outside [0, {self.num_categories})")

    @property
    def ground_truth(self) -> Dict[str, int]:
        merged = dict(self.seeds)
        merged.update(self.validation)
        return merged

    def restricted_to(self, graph: Graph) -> "NodePartition":
        """Drops the nodes that are not in graph"""
        return NodePartition(
            {k: c for k, c in self.seeds.items() if k in graph},
            {k: c for k, c in self.validation.items() if k in graph},
            self.num_categories,
        )

    def bind(self, graph: Graph) -> NodeRoles:
        """Per-internal-id role and label arrays; absent nodes are skipped"""
        role = np.zeros(graph.n, dtype=np.int8)
        label = np.full(graph.n, NO_LABEL, dtype=np.int64)
        index = graph.node_index
        missing = 0
        for labels, kind in ((self.seeds, Role.SEED), (self.validation, Role.VALIDATION)):
            for node_id, category in labels.items():
                x = index.get(node_id)
                if x is None:
                    missing += 1
                    continue
                role[x] = kind
                label[x] = category
        if missing:
            logger.debug("%d labeled nodes are not in %r", missing, graph)
        return NodeRoles(role, label, self.num_categories)


def split_ground_truth(
    labels: Mapping[str, int],
    seed_fraction: float,
    rng_seed: int,
    num_categories: int = 4,
) -> NodePartition:
    """
    Uniformly random seed / validation split of the labeled nodes.

    Nodes are put in sorted id order before shuffling so the split depends
    only on the label set and rng_seed. |Seed| = round(seed_fraction * |labels|)
    with halves rounded up, kept within [1, |labels| - 1].

    Args:
        labels: external id -> category
        seed_fraction: share of labeled nodes used as seeds, in (0, 1)
        rng_seed: seed of the split stream

    Returns:
        NodePartition
    """
    if not 0 < seed_fraction < 1:
        raise ConfigError(f"seed fraction must be in (0, 1), got {seed_fraction}")
    if len(labels) < 2:
        raise DataError(f"need at least 2 labeled nodes to split, got {len(labels)}")

    node_ids = sorted(labels)
    total = len(node_ids)
    seed_count = int(np.floor(seed_fraction * total + 0.5))
    seed_count = min(max(seed_count, 1), total - 1)

    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(total)
    seeds = {node_ids[i]: int(labels[node_ids[i]]) for i in order[:seed_count]}
    validation = {node_ids[i]: int(labels[node_ids[i]]) for i in order[seed_count:]}
    logger.info("Split %d labeled nodes: %d seeds, %d validation", total, len(seeds), len(validation))
    return NodePartition(seeds, validation, num_categories)


def restrict_labels(labels: Mapping[str, int], graph: Graph) -> Dict[str, int]:
    """Keeps the labels of nodes present in graph, warning about the rest"""
    kept = {k: v for k, v in labels.items() if k in graph}
    dropped = len(labels) - len(kept)
    if dropped:
        logger.warning("Dropping %d labeled nodes that are not in the edge list", dropped)
    return kept


def ingest_label_file(source: TextIO, mode: str = 'age') -> Dict[str, int]:
    """
    Read ``node_id<TAB>value`` lines.

    Args:
        source: iterable of text lines
        mode: 'age' (value in years) or 'category' (value is a category index)

    Returns:
        external id -> integer value (age in years or category index)
    """
    if mode not in LABEL_MODES:
        raise ConfigError(f"label mode must be one of {LABEL_MODES}, got {mode!r}")
    values: Dict[str, int] = {}
    for line_number, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        fields = stripped.split('\t') if '\t' in stripped else stripped.split()
        if len(fields) != 2:
            raise DataError(f"label line {line_number}: expected 'node_id<TAB>value'")
        node_id, raw = fields[0].strip(), fields[1].strip()
        try:
            number = float(raw)
        except ValueError:
            raise DataError(f"label line {line_number}: not a number: {raw!r}") from None
        if not number.is_integer() and mode == 'category':
            raise DataError(f"label line {line_number}: category must be an integer")
        if number < 0:
            raise DataError(f"label line {line_number}: negative {mode}: {raw}")
        if node_id in values:
            raise DataError(f"label line {line_number}: duplicate node {node_id!r}")
        values[node_id] = int(number)
    return values


def read_label_file(path, mode: str = 'age') -> Dict[str, int]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return ingest_label_file(f, mode)
    except OSError as e:
        raise DataError(f"cannot read label file {path}: {e}") from e


def write_label_file(values: Mapping[str, int], path) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for node_id in sorted(values):
            f.write(f"{node_id}\t{int(values[node_id])}\n")


def categorize(values: Mapping[str, int], mode: str, scheme: CategoryScheme) -> Dict[str, int]:
    """Turns label-file values into category indices"""
    if mode == 'age':
        return {k: assign_category(v, scheme) for k, v in values.items()}
    for node_id, category in values.items():
        if not 0 <= category < scheme.num_categories:
            raise DataError(
                f"category {category} of node {node_id!r} outside [0, {scheme.num_categories})")
    return dict(values)


def split_stream_seed(rng_seed: int) -> int:
    """Seed of the split stream derived from the global experiment seed"""
    return util.derive_seed(rng_seed, "split")
