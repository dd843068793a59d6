"""
Topological node metrics and stratified performance tables

Per node: SIN (seeds in neighborhood), DTS (hop distance to the nearest
seed) and degree. Performance ("hits") is measured on the validation nodes
that received a category, stratified by true age group, by one metric, or by
a pair of metrics.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.graph import Graph
from agediffusion.models.labeling import Assignment
from agediffusion.models.partition import NodeRoles
from agediffusion.models.propagation import PartitionLike, bind_roles

logger = logging.getLogger(__name__)

UNREACHABLE = -1
METRIC_NAMES = ('sin', 'dts', 'degree')
DEFAULT_POPULATION_FLOOR = 50


@dataclass(frozen=True)
class NodeMetrics:
    """
    Attributes:
        sin: number of seed neighbors
        dts: hops to the nearest seed, UNREACHABLE when none is reachable
        degree: neighbor count
    """

    sin: np.ndarray
    dts: np.ndarray
    degree: np.ndarray

    def values(self, which: str) -> np.ndarray:
        if which not in METRIC_NAMES:
            raise ConfigError(f"metric must be one of {METRIC_NAMES}, got {which!r}")
        return getattr(self, which)


@dataclass(frozen=True)
class MetricBin:
    """Inclusive integer range [low, high]; high None means unbounded"""

    low: int
    high: Optional[int] = None

    @property
    def label(self) -> str:
        if self.high is None:
            return f"{self.low}+"
        if self.high == self.low:
            return str(self.low)
        return f"{self.low}-{self.high}"

    def contains(self, values: np.ndarray) -> np.ndarray:
        inside = values >= self.low
        if self.high is not None:
            inside &= values <= self.high
        return inside


def parse_bins(spec: str) -> List[MetricBin]:
    """Reads bins like ``"0,1,2,3+"`` or ``"1-2,3-29,30-48"``"""
    bins = []
    for item in (part.strip() for part in spec.split(',')):
        if not item:
            continue
        try:
            if item.endswith('+'):
                bins.append(MetricBin(int(item[:-1])))
            elif '-' in item:
                low, high = item.split('-', 1)
                bins.append(MetricBin(int(low), int(high)))
            else:
                bins.append(MetricBin(int(item), int(item)))
        except ValueError:
            raise ConfigError(f"malformed bin {item!r} in {spec!r}") from None
    check_bins(bins)
    return bins


def exact_bins(values: Sequence[int], open_top: bool = False) -> List[MetricBin]:
    """One bin per value; with open_top the last one is unbounded"""
    values = sorted(values)
    bins = [MetricBin(v, v) for v in values]
    if open_top and bins:
        bins[-1] = MetricBin(values[-1])
    return bins


def check_bins(bins: Sequence[MetricBin]) -> None:
    if not bins:
        raise ConfigError("at least one bin is required")
    for b in bins:
        if b.high is not None and b.high < b.low:
            raise ConfigError(f"empty bin {b.label}")
    ordered = sorted(bins, key=lambda b: b.low)
    for prev, nxt in zip(ordered, ordered[1:]):
        if prev.high is None or prev.high >= nxt.low:
            raise DataError(f"bins {prev.label} and {nxt.label} overlap")


# Degree strata (1,2], (2,29], (29,48], (48,66], (66,100] over integer degrees
DEFAULT_DEGREE_BINS = parse_bins("1-2,3-29,30-48,49-66,67-100")
DEFAULT_SIN_BINS = exact_bins(range(5), open_top=True)
DEFAULT_DTS_VALUES = (1, 2, 3)


@njit(cache=True)
def _multi_source_bfs(offsets, neighbors, sources, dist):
    queue = np.empty(dist.shape[0], dtype=np.int64)
    tail = 0
    for s in sources:
        dist[s] = 0
        queue[tail] = s
        tail += 1
    head = 0
    while head < tail:
        x = queue[head]
        head += 1
        for k in range(offsets[x], offsets[x + 1]):
            y = neighbors[k]
            if dist[y] == -1:
                dist[y] = dist[x] + 1
                queue[tail] = y
                tail += 1


def compute_sin(graph: Graph, partition: PartitionLike) -> np.ndarray:
    """Number of seeds adjacent to each node"""
    seed_mask = bind_roles(graph, partition).seed_mask
    return np.bincount(graph.row_index(), weights=seed_mask[graph.neighbors],
                       minlength=graph.n).astype(np.int64)


def compute_dts(graph: Graph, partition: PartitionLike) -> np.ndarray:
    """Multi-source BFS distance from the seed set; UNREACHABLE when disconnected"""
    seed_mask = bind_roles(graph, partition).seed_mask
    if not seed_mask.any():
        raise DataError("distance to seeds needs at least one seed")
    dist = np.full(graph.n, UNREACHABLE, dtype=np.int64)
    _multi_source_bfs(graph.offsets, graph.neighbors, np.flatnonzero(seed_mask), dist)
    return dist


def compute_metrics(graph: Graph, partition: PartitionLike) -> NodeMetrics:
    roles = bind_roles(graph, partition)
    return NodeMetrics(compute_sin(graph, roles), compute_dts(graph, roles), graph.degree().astype(np.int64))


@dataclass(frozen=True)
class HitsRow:
    """
    Attributes:
        key: stratum, one entry per stratifying dimension
        population: evaluated validation nodes in the stratum
        hits: correctly predicted ones
        flagged: population below the table's floor
    """

    key: Tuple[str, ...]
    population: int
    hits: int
    flagged: bool = False

    @property
    def rate(self) -> float:
        return self.hits / self.population if self.population else 0.0


@dataclass(frozen=True)
class HitsTable:
    """
    Attributes:
        title: table name
        key_names: name of each stratum dimension
        rows: strata in display order
        denominator: evaluated nodes this table covers
        excluded: validation nodes left out (unassigned)
        best: best populated stratum, for joint tables
        floor: population floor used for flagging
    """

    title: str
    key_names: Tuple[str, ...]
    rows: List[HitsRow]
    denominator: int
    excluded: int = 0
    best: Optional[HitsRow] = None
    floor: int = 0

    @property
    def population(self) -> int:
        return sum(row.population for row in self.rows)

    @property
    def hits(self) -> int:
        return sum(row.hits for row in self.rows)

    @property
    def overall_rate(self) -> float:
        population = self.population
        return self.hits / population if population else 0.0

    def row(self, *key: str) -> HitsRow:
        for row in self.rows:
            if row.key == tuple(key):
                return row
        raise KeyError(key)


@dataclass(frozen=True)
class Evaluation:
    """Validation nodes that received a category, with the hit flag"""

    nodes: np.ndarray
    hit: np.ndarray
    excluded: int


def evaluate(assignment: Assignment, roles: NodeRoles) -> Evaluation:
    validation = roles.validation_mask
    if not validation.any():
        raise DataError("empty validation set")
    evaluated = validation & assignment.assigned_mask
    nodes = np.flatnonzero(evaluated)
    hit = assignment.category[nodes] == roles.label[nodes]
    return Evaluation(nodes, hit, int(validation.sum()) - int(nodes.shape[0]))


def _row(key: Tuple[str, ...], members: np.ndarray, ev: Evaluation, floor: int = 0) -> HitsRow:
    population = int(members.sum())
    return HitsRow(key, population, int(ev.hit[members].sum()), population < floor)


def hits_by_group(assignment: Assignment, roles: NodeRoles, scheme: CategoryScheme) -> HitsTable:
    """Hit rate per true age group of the validation nodes"""
    ev = evaluate(assignment, roles)
    truth = roles.label[ev.nodes]
    rows = [_row((label,), truth == a, ev) for a, label in enumerate(scheme.labels)]
    return HitsTable("hits_by_group", ("group",), rows, int(ev.nodes.shape[0]), ev.excluded)


def hits_by_metric(assignment: Assignment, roles: NodeRoles, metrics: NodeMetrics,
                   which: str, bins: Optional[Sequence[MetricBin]] = None) -> HitsTable:
    """
    Hit rate per bin of one metric.

    DTS tables get an explicit 'unreachable' row for nodes without a path
    to any seed.

    Raises:
        DataError: when bins overlap or leave an observed value uncovered
    """
    ev = evaluate(assignment, roles)
    values = metrics.values(which)[ev.nodes]
    reachable = values != UNREACHABLE if which == 'dts' else np.ones(values.shape[0], dtype=bool)
    if bins is None:
        bins = default_bins(which, values[reachable])
    check_bins(bins)

    rows = [_row((b.label,), b.contains(values) & reachable, ev) for b in bins]
    covered = sum(row.population for row in rows)
    if covered != int(reachable.sum()):
        raise DataError(f"{which} bins leave {int(reachable.sum()) - covered} nodes uncovered")
    if which == 'dts':
        rows.append(_row(("unreachable",), ~reachable, ev))
    return HitsTable(f"hits_by_{which}", (which,), rows, int(ev.nodes.shape[0]), ev.excluded)


def default_bins(which: str, values: np.ndarray) -> List[MetricBin]:
    if which == 'sin':
        return list(DEFAULT_SIN_BINS)
    if which == 'degree':
        top = int(values.max()) if values.size else 0
        bins = [MetricBin(0, 0)] + list(DEFAULT_DEGREE_BINS)
        if top > 100:
            bins.append(MetricBin(101))
        return bins
    top = int(values.max()) if values.size else 1
    return exact_bins(range(0, max(top, 1) + 1))


def joint_table(assignment: Assignment, roles: NodeRoles, metrics: NodeMetrics,
                row_bins: Optional[Sequence[MetricBin]] = None,
                col_values: Optional[Sequence[int]] = None,
                floor: int = DEFAULT_POPULATION_FLOOR,
                row_metric: str = 'degree', col_metric: str = 'dts') -> HitsTable:
    """
    Hit rates over a grid of two metrics, degree x DTS by default.

    Cells below the population floor are flagged and never reported as best.
    Nodes outside the grid are not counted.

    Args:
        row_bins: bins of row_metric (default degree strata)
        col_values: bins of col_metric, either MetricBin or exact ints
                    (default DTS 1, 2, 3)
        floor: minimum population for the best-cell search
    """
    ev = evaluate(assignment, roles)
    row_values = metrics.values(row_metric)[ev.nodes]
    col_values_arr = metrics.values(col_metric)[ev.nodes]
    row_bins = list(DEFAULT_DEGREE_BINS if row_bins is None else row_bins)
    col_bins = [b if isinstance(b, MetricBin) else MetricBin(int(b), int(b))
                for b in (DEFAULT_DTS_VALUES if col_values is None else col_values)]
    check_bins(row_bins)
    check_bins(col_bins)

    rows = []
    for rb in row_bins:
        in_row = rb.contains(row_values)
        for cb in col_bins:
            rows.append(_row((rb.label, cb.label), in_row & cb.contains(col_values_arr), ev, floor))
    eligible = [row for row in rows if not row.flagged and row.population > 0]
    best = max(eligible, key=lambda row: row.rate) if eligible else None
    return HitsTable(f"joint_{row_metric}_{col_metric}", (row_metric, col_metric), rows,
                     sum(row.population for row in rows), ev.excluded, best, floor)


@dataclass(frozen=True)
class DemographicsTable:
    """
    Age group shares next to hit rates.

    Attributes:
        labels: group labels
        predicted_share: share among all assigned nodes of the graph
        seed_share: share among seeds
        validation_share: share among validation nodes
        hit_rate: per-group hit rate on evaluated validation nodes
    """

    labels: Tuple[str, ...]
    predicted_share: np.ndarray
    seed_share: np.ndarray
    validation_share: np.ndarray
    hit_rate: np.ndarray
    overall_rate: float


def _shares(values: np.ndarray, c: int) -> np.ndarray:
    counts = np.bincount(values, minlength=c).astype(np.float64)
    return counts / counts.sum() if counts.sum() else counts


def demographics_table(assignment: Assignment, roles: NodeRoles, scheme: CategoryScheme) -> DemographicsTable:
    c = scheme.num_categories
    groups = hits_by_group(assignment, roles, scheme)
    return DemographicsTable(
        scheme.labels,
        _shares(assignment.category[assignment.assigned_mask], c),
        _shares(roles.label[roles.seed_mask], c),
        _shares(roles.label[roles.validation_mask], c),
        np.array([row.rate for row in groups.rows]),
        groups.overall_rate,
    )


def baselines(roles: NodeRoles, num_categories: int) -> Dict[str, float]:
    """
    Reference rates without graph information.

    uniform: random guessing, 1/C
    modal: labeling everyone with the most frequent seed category
    """
    validation = roles.label[roles.validation_mask]
    if validation.size == 0:
        raise DataError("empty validation set")
    seeds = roles.label[roles.seed_mask]
    modal = int(np.argmax(np.bincount(seeds, minlength=num_categories))) if seeds.size else 0
    return {
        'uniform': 1.0 / num_categories,
        'modal': float((validation == modal).mean()),
        'modal_category': modal,
    }


@dataclass(frozen=True)
class PopulationRow:
    label: str
    nodes: int
    seeds: int
    validation: int


def population_by_metric(metrics: NodeMetrics, roles: NodeRoles, which: str,
                         bins: Optional[Sequence[MetricBin]] = None) -> List[PopulationRow]:
    """Node, seed and validation counts per bin of one metric, over the whole graph"""
    values = metrics.values(which)
    reachable = values != UNREACHABLE if which == 'dts' else np.ones(values.shape[0], dtype=bool)
    if bins is None:
        bins = default_bins(which, values[reachable])
    check_bins(bins)
    seed, validation = roles.seed_mask, roles.validation_mask
    masks = [(b.label, b.contains(values) & reachable) for b in bins]
    if which == 'dts':
        masks.append(("unreachable", ~reachable))
    return [PopulationRow(label, int(m.sum()), int((m & seed).sum()), int((m & validation).sum()))
            for label, m in masks]
