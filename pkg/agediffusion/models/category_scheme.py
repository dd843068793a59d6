"""
Age category scheme

Ordered cut points split ages into C half-open bins
[edge_k, edge_{k+1}); the first bin is unbounded below and the last one
unbounded above. The default scheme gives the four marketing groups
<25, 25-34, 35-49 and 50+.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from agediffusion.exceptions import ConfigError, DataError

DEFAULT_AGE_EDGES = (25, 35, 50)


@dataclass(frozen=True)
class CategoryScheme:
    """Ordered age cut points defining C = len(edges) + 1 categories"""

    edges: Tuple[float, ...] = DEFAULT_AGE_EDGES

    def __post_init__(self):
        edges = tuple(float(e) if not float(e).is_integer() else int(e) for e in self.edges)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ConfigError(f"age bin edges must be strictly increasing: {edges}")
        object.__setattr__(self, 'edges', edges)

    @property
    def num_categories(self) -> int:
        return len(self.edges) + 1

    @property
    def labels(self) -> Tuple[str, ...]:
        """Human readable bin labels, e.g. ('<25', '25-34', '35-49', '50+')"""
        if not self.edges:
            return ("all",)
        labels = [f"<{self.edges[0]}"]
        for low, high in zip(self.edges, self.edges[1:]):
            if isinstance(low, int) and isinstance(high, int):
                labels.append(f"{low}-{high - 1}")
            else:
                labels.append(f"{low}-{high}")
        labels.append(f"{self.edges[-1]}+")
        return tuple(labels)

    def label(self, category: int) -> str:
        return self.labels[category]

    def assign(self, age: float) -> int:
        return assign_category(age, self)

    @classmethod
    def from_edges(cls, edges: Sequence[float]) -> "CategoryScheme":
        return cls(tuple(edges))


def assign_category(age: float, scheme: CategoryScheme) -> int:
    """
    Map an age in years to its category index.

    Args:
        age: age in years, must be >= 0
        scheme: category scheme

    Returns:
        index k of the bin [edge_k, edge_{k+1}) holding age
    """
    if age < 0:
        raise DataError(f"negative age: {age}")
    return int(np.searchsorted(scheme.edges, age, side='right'))


def assign_categories(ages: np.ndarray, scheme: CategoryScheme) -> np.ndarray:
    """Vectorized assign_category"""
    ages = np.asarray(ages, dtype=np.float64)
    if ages.size and ages.min() < 0:
        raise DataError(f"negative age: {ages.min()}")
    return np.searchsorted(np.asarray(scheme.edges, dtype=np.float64), ages, side='right').astype(np.int64)
