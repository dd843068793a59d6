"""
Collapsing probability vectors into age categories

Three collapses are provided:
- argmax per node (ties go to the lowest category index),
- a confidence filter leaving low-confidence nodes unassigned,
- Population Pyramid Scaling (PPS): a greedy global collapse whose output
  category histogram matches a quota plan exactly.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
from numba import njit

from agediffusion.exceptions import ConfigError, DataError, InvariantViolation

logger = logging.getLogger(__name__)

UNASSIGNED = -1

SOURCE_ARGMAX = 0
SOURCE_PPS = 1
SOURCE_UNASSIGNED = 2
SOURCE_NAMES = ('argmax', 'pps', 'unassigned')

PPS_SCOPES = ('all', 'nonseed')
QUOTA_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Assignment:
    """
    Category per node.

    Attributes:
        category: int64 per node, UNASSIGNED when filtered out
        confidence: probability of the chosen category (kept for
                    unassigned nodes, as the value that failed the filter)
        source: int8 per node, index into SOURCE_NAMES
    """

    category: np.ndarray
    confidence: np.ndarray
    source: np.ndarray

    @property
    def n(self) -> int:
        return int(self.category.shape[0])

    @property
    def assigned_mask(self) -> np.ndarray:
        return self.category != UNASSIGNED

    def histogram(self, num_categories: int) -> np.ndarray:
        assigned = self.category[self.assigned_mask]
        return np.bincount(assigned, minlength=num_categories)


@dataclass(frozen=True)
class QuotaPlan:
    """Target count N_a per category"""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def num_categories(self) -> int:
        return int(self.counts.shape[0])


def _as_probs(table) -> np.ndarray:
    probs = getattr(table, 'probs', table)
    return np.asarray(probs, dtype=np.float64)


def collapse_argmax(table) -> Assignment:
    """
    Most probable category per node, lowest index on ties.

    Args:
        table: (n, C) array or anything with a ``probs`` attribute
    """
    probs = _as_probs(table)
    n = probs.shape[0]
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Assignment(empty, np.zeros(0), np.zeros(0, dtype=np.int8))
    category = np.argmax(probs, axis=1).astype(np.int64)
    confidence = probs[np.arange(n), category]
    return Assignment(category, confidence, np.full(n, SOURCE_ARGMAX, dtype=np.int8))


def filter_by_threshold(assignment: Assignment, tau: float) -> Assignment:
    """Nodes whose confidence is below tau become unassigned"""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")
    below = assignment.confidence < tau
    category = assignment.category.copy()
    source = assignment.source.copy()
    category[below] = UNASSIGNED
    source[below] = SOURCE_UNASSIGNED
    return Assignment(category, assignment.confidence, source)


def category_distribution(labels: Union[Mapping[str, int], np.ndarray],
                          num_categories: int) -> np.ndarray:
    """Share of each category among the given labels"""
    values = np.fromiter(labels.values(), dtype=np.int64) if isinstance(labels, Mapping) \
        else np.asarray(labels, dtype=np.int64)
    if values.size == 0:
        raise DataError("cannot take the distribution of an empty label set")
    counts = np.bincount(values, minlength=num_categories)
    return counts / counts.sum()


def compute_quotas(target_distribution: Sequence[float], n: int) -> QuotaPlan:
    """
    Largest-remainder apportionment of n nodes over the target fractions.

    Each category gets floor(n * f_a); the leftover units go to the largest
    remainders, lower category index first on ties. The counts sum to n.
    """
    fractions = np.asarray(target_distribution, dtype=np.float64)
    if (fractions < 0).any():
        raise DataError(f"negative fraction in target distribution: {fractions.tolist()}")
    if abs(fractions.sum() - 1.0) > QUOTA_TOLERANCE:
        raise DataError(f"target distribution sums to {fractions.sum()}, expected 1")
    if n < 0:
        raise DataError(f"cannot apportion {n} nodes")

    exact = fractions * n
    counts = np.floor(exact).astype(np.int64)
    remainders = exact - counts
    leftover = n - int(counts.sum())
    order = np.lexsort((np.arange(fractions.shape[0]), -remainders))
    counts[order[:leftover]] += 1
    return QuotaPlan(counts)


@njit(cache=True)
def _pps_scan(nodes, categories, quotas, n, assigned):
    filled = np.zeros(quotas.shape[0], dtype=np.int64)
    remaining = n
    for k in range(nodes.shape[0]):
        if remaining == 0:
            break
        i = nodes[k]
        a = categories[k]
        if assigned[i] != -1 or filled[a] >= quotas[a]:
            continue
        assigned[i] = a
        filled[a] += 1
        remaining -= 1
    return remaining


def pps_assign(table, quotas: QuotaPlan) -> Assignment:
    """
    Population Pyramid Scaling.

    All (node, category, p) tuples are scanned once in descending p (then
    ascending node, then ascending category); a node is assigned to the
    category of its first tuple whose group is still below quota.

    Raises:
        DataError: when the quota total differs from the node count
    """
    probs = _as_probs(table)
    n, c = probs.shape
    if quotas.total != n:
        raise DataError(f"quota total {quotas.total} differs from node count {n}")
    if quotas.num_categories != c:
        raise DataError(f"quota plan has {quotas.num_categories} categories, vectors have {c}")

    flat = probs.ravel()
    nodes = np.repeat(np.arange(n, dtype=np.int64), c)
    categories = np.tile(np.arange(c, dtype=np.int64), n)
    order = np.lexsort((categories, nodes, -flat))
    category = np.full(n, UNASSIGNED, dtype=np.int64)
    remaining = _pps_scan(nodes[order], categories[order], quotas.counts.astype(np.int64), n, category)
    if remaining:
        raise InvariantViolation(f"{remaining} nodes left unassigned by PPS")

    confidence = probs[np.arange(n), category] if n else np.zeros(0)
    return Assignment(category, confidence, np.full(n, SOURCE_PPS, dtype=np.int8))


def pps_collapse(table, seed_mask: np.ndarray, seed_labels: np.ndarray,
                 target_distribution: Sequence[float], scope: str = 'all') -> Assignment:
    """
    PPS over the prediction set with the chosen scope.

    Args:
        table: (n, C) vectors
        seed_mask: bool per node
        seed_labels: category per node (read where seed_mask is True)
        target_distribution: fractions per category
        scope: 'all' runs PPS over every node; 'nonseed' fixes seeds to
               their known label and runs PPS over the rest with the
               seeds' counts taken off the quotas
    """
    if scope not in PPS_SCOPES:
        raise ConfigError(f"PPS scope must be one of {PPS_SCOPES}, got {scope!r}")
    probs = _as_probs(table)
    n, c = probs.shape
    quotas = compute_quotas(target_distribution, n)
    if scope == 'all':
        return pps_assign(probs, quotas)

    seed_mask = np.asarray(seed_mask, dtype=bool)
    free = np.flatnonzero(~seed_mask)
    seed_hist = np.bincount(seed_labels[seed_mask], minlength=c)
    residual = quotas.counts - seed_hist
    if (residual < 0).any():
        logger.warning("Seeds exceed quotas for categories %s; re-apportioning the remainder",
                       np.flatnonzero(residual < 0).tolist())
        residual = np.clip(residual, 0, None)
        if free.shape[0] and residual.sum() > 0:
            residual = compute_quotas(residual / residual.sum(), free.shape[0]).counts
        else:
            residual = compute_quotas(np.full(c, 1.0 / c), free.shape[0]).counts
    partial = pps_assign(probs[free], QuotaPlan(residual))

    category = np.empty(n, dtype=np.int64)
    category[seed_mask] = seed_labels[seed_mask]
    category[free] = partial.category
    confidence = probs[np.arange(n), category] if n else np.zeros(0)
    return Assignment(category, confidence, np.full(n, SOURCE_PPS, dtype=np.int8))


def retention_threshold(assignment: Assignment, validation_mask: np.ndarray,
                        min_fraction: float) -> float:
    """
    Largest tau that keeps at least min_fraction of the validation nodes.

    Returns the confidence of the ceil(min_fraction * |N_V|)-th most
    confident validation node; filtering at that tau keeps that node and
    every node at least as confident.
    """
    if not 0.0 < min_fraction <= 1.0:
        raise ConfigError(f"retention fraction must be in (0, 1], got {min_fraction}")
    confidences = np.sort(assignment.confidence[np.asarray(validation_mask, dtype=bool)])[::-1]
    if confidences.size == 0:
        raise DataError("empty validation set")
    keep = int(np.ceil(min_fraction * confidences.size))
    return float(confidences[keep - 1])
