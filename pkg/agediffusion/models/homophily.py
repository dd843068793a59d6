"""
Age assortativity of the ground-truth subgraph

C counts links between users of age i and age j over ordered pairs, so an
undirected edge between two ages i != j adds one to C[i, j] and one to
C[j, i], and an edge within age i adds two to C[i, i]; sum(C) = 2 |E_GT|.
R is the expected count under independence with the same total mass.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np
from scipy import stats

from agediffusion import util
from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.graph import Graph

logger = logging.getLogger(__name__)

NO_AGE = -1
DEFAULT_EPS = 0.5
DEFAULT_SHUFFLES = 100

AgeRange = Tuple[int, int]


@dataclass(frozen=True)
class AgeMatrix:
    """
    Square matrix indexed by age in years.

    Attributes:
        age_min: age of row / column 0
        values: (k, k) array, row i is age age_min + i
    """

    age_min: int
    values: np.ndarray

    @property
    def age_max(self) -> int:
        return self.age_min + self.values.shape[0] - 1

    @property
    def age_range(self) -> AgeRange:
        return self.age_min, self.age_max

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.age_min, self.age_max + 1)

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    def at(self, i: int, j: int):
        return self.values[i - self.age_min, j - self.age_min]

    def diagonal_contrast(self) -> Tuple[float, float]:
        """Mean of the diagonal and mean of the off-diagonal entries"""
        k = self.values.shape[0]
        diagonal = np.diag(self.values)
        if k < 2:
            return float(diagonal.mean()), float('nan')
        off = (self.values.sum() - diagonal.sum()) / (k * k - k)
        return float(diagonal.mean()), float(off)


@dataclass(frozen=True)
class GapProfile:
    """Link count per absolute age difference, index = delta in years"""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, delta: int) -> int:
        return int(self.counts[delta]) if 0 <= delta < self.counts.shape[0] else 0


@dataclass(frozen=True)
class Regression:
    """Least-squares fit of the age of y on the age of x over linked ordered pairs"""

    r: float
    slope: float
    intercept: float
    n_pairs: int


@dataclass(frozen=True)
class ShuffleTest:
    """
    Mean |log-difference| against its label-permutation null distribution.

    Attributes:
        observed: statistic on the actual ages
        null_values: statistic on each shuffled copy
        bound: null mean + 3 standard deviations
    """

    observed: float
    null_values: np.ndarray

    @property
    def null_mean(self) -> float:
        return float(self.null_values.mean())

    @property
    def null_std(self) -> float:
        return float(self.null_values.std())

    @property
    def bound(self) -> float:
        return self.null_mean + 3.0 * self.null_std

    @property
    def within_bound(self) -> bool:
        return self.observed <= self.bound


def age_vector(graph: Graph, ages: Mapping[str, int]) -> np.ndarray:
    """Age per internal id, NO_AGE for nodes without a label"""
    values = np.full(graph.n, NO_AGE, dtype=np.int64)
    index = graph.node_index
    for node_id, age in ages.items():
        x = index.get(node_id)
        if x is not None:
            values[x] = int(age)
    return values


def _as_vector(graph: Graph, ages) -> np.ndarray:
    if isinstance(ages, Mapping):
        return age_vector(graph, ages)
    ages = np.asarray(ages, dtype=np.int64)
    if ages.shape[0] != graph.n:
        raise DataError(f"age vector covers {ages.shape[0]} nodes, graph has {graph.n}")
    return ages


def labeled_range(ages: np.ndarray) -> AgeRange:
    labeled = ages[ages != NO_AGE]
    if labeled.size == 0:
        raise DataError("no labeled node")
    return int(labeled.min()), int(labeled.max())


def labeled_edges(graph: Graph, ages) -> Tuple[np.ndarray, np.ndarray]:
    """Ages of both endpoints of every edge whose endpoints are both labeled"""
    ages = _as_vector(graph, ages)
    u, v, _ = graph.edges()
    keep = (ages[u] != NO_AGE) & (ages[v] != NO_AGE)
    return ages[u[keep]], ages[v[keep]]


def communication_matrix(graph: Graph, ages, age_range: Optional[AgeRange] = None) -> AgeMatrix:
    """
    Ordered-pair link counts between ages over the labeled subgraph.

    Args:
        graph: graph
        ages: external id -> years, or per-node array with NO_AGE
        age_range: (min, max) of the index; defaults to the labeled ages
    """
    ages = _as_vector(graph, ages)
    low, high = age_range or labeled_range(ages)
    size = high - low + 1
    au, av = labeled_edges(graph, ages)
    if au.size and (min(au.min(), av.min()) < low or max(au.max(), av.max()) > high):
        raise DataError(f"linked ages fall outside {low}-{high}")
    forward = (au - low) * size + (av - low)
    backward = (av - low) * size + (au - low)
    counts = np.bincount(forward, minlength=size * size) + np.bincount(backward, minlength=size * size)
    return AgeMatrix(low, counts.reshape(size, size).astype(np.int64))


def null_matrix(ages, total_links: float, age_range: Optional[AgeRange] = None) -> AgeMatrix:
    """
    R[i, j] = (|N(i)| / |N|) (|N(j)| / |N|) total_links over the labeled nodes.

    Args:
        ages: ages of the labeled population (NO_AGE entries are skipped)
        total_links: mass of the matching C matrix, 2 |E_GT| for ordered pairs
    """
    ages = np.asarray(ages, dtype=np.int64)
    low, high = age_range or labeled_range(ages)
    labeled = ages[ages != NO_AGE]
    if labeled.size == 0:
        raise DataError("no labeled node")
    if labeled.min() < low or labeled.max() > high:
        raise DataError(f"ages fall outside {low}-{high}")
    shares = np.bincount(labeled - low, minlength=high - low + 1) / labeled.size
    return AgeMatrix(low, np.outer(shares, shares) * float(total_links))


def log_difference(c_matrix: AgeMatrix, r_matrix: AgeMatrix, eps: float = DEFAULT_EPS) -> AgeMatrix:
    """log(C + eps) - log(R + eps), the social effect beyond the population mix"""
    if c_matrix.age_range != r_matrix.age_range:
        raise DataError(f"age ranges differ: {c_matrix.age_range} vs {r_matrix.age_range}")
    if eps < 0:
        raise ConfigError(f"eps must be >= 0, got {eps}")
    with np.errstate(divide='ignore'):
        diff = np.log(c_matrix.values + eps) - np.log(r_matrix.values + eps)
    return AgeMatrix(c_matrix.age_min, diff)


def social_effect(graph: Graph, ages, eps: float = DEFAULT_EPS) -> Tuple[AgeMatrix, AgeMatrix, AgeMatrix]:
    """C, R and their log-difference on a shared age range"""
    ages = _as_vector(graph, ages)
    age_range = labeled_range(ages)
    c_matrix = communication_matrix(graph, ages, age_range)
    r_matrix = null_matrix(ages, c_matrix.mass, age_range)
    return c_matrix, r_matrix, log_difference(c_matrix, r_matrix, eps)


def gap_profile(graph: Graph, ages) -> GapProfile:
    """Histogram of |age_u - age_v|, each labeled edge counted once"""
    au, av = labeled_edges(graph, ages)
    return GapProfile(np.bincount(np.abs(au - av)).astype(np.int64))


def linked_age_regression(graph: Graph, ages) -> Regression:
    """
    Regress the age of one endpoint on the age of the other over both
    orientations of every labeled edge.

    Raises:
        DataError: fewer than 2 labeled edges, or a single age among them
    """
    au, av = labeled_edges(graph, ages)
    if au.size < 2:
        raise DataError(f"regression needs at least 2 labeled edges, got {au.size}")
    x = np.concatenate([au, av]).astype(np.float64)
    y = np.concatenate([av, au]).astype(np.float64)
    if np.ptp(x) == 0:
        raise DataError("all linked nodes have the same age; regression is undefined")
    fit = stats.linregress(x, y)
    return Regression(float(fit.rvalue), float(fit.slope), float(fit.intercept), int(x.size))


def shuffle_ages(ages: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Permutes the ages among the labeled nodes; unlabeled nodes stay unlabeled"""
    shuffled = np.array(ages, dtype=np.int64, copy=True)
    labeled = np.flatnonzero(shuffled != NO_AGE)
    shuffled[labeled] = rng.permutation(shuffled[labeled])
    return shuffled


def mean_abs_log_difference(graph: Graph, ages, eps: float = DEFAULT_EPS) -> float:
    return float(np.abs(social_effect(graph, ages, eps)[2].values).mean())


def shuffle_test(graph: Graph, ages, shuffles: int = DEFAULT_SHUFFLES, rng_seed: int = 0,
                 eps: float = DEFAULT_EPS) -> ShuffleTest:
    """
    Permutation null of the mean absolute log-difference.

    Each shuffle redistributes the observed ages over the labeled nodes and
    recomputes C, R and their log-difference on the same graph.
    """
    if shuffles < 1:
        raise ConfigError(f"shuffles must be >= 1, got {shuffles}")
    ages = _as_vector(graph, ages)
    rng = np.random.default_rng(util.derive_seed(rng_seed, "homophily.shuffle"))
    observed = mean_abs_log_difference(graph, ages, eps)
    null_values = np.array([mean_abs_log_difference(graph, shuffle_ages(ages, rng), eps)
                            for _ in range(shuffles)])
    result = ShuffleTest(observed, null_values)
    logger.info("Shuffle test complete: %s", {
        'shuffles': shuffles,
        'observed': round(observed, 6),
        'null_mean': round(result.null_mean, 6),
        'bound': round(result.bound, 6),
    })
    return result
