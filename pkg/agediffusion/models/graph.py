"""
Communication graph

An immutable, symmetric, self-loop free graph stored in CSR form. Internal
node ids are dense (0..n-1) and follow the sorted order of the external
tokens read from the edge list, so the internal numbering does not depend on
the order of the input lines.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, TextIO, Tuple

import numpy as np
import scipy.sparse as sp

from agediffusion.exceptions import DataError, EdgeListParseError, InvariantViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EdgeListSchema:
    """
    How edge-list lines are split.

    Attributes:
        delimiter: field separator; None splits on any run of whitespace
        weighted: True requires a weight column, False forbids it,
                  None accepts lines with or without one
        comment: prefix of comment lines
    """

    delimiter: Optional[str] = None
    weighted: Optional[bool] = None
    comment: str = '#'


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class Graph:
    """
    Symmetric sparse adjacency in CSR form.

    Attributes:
        offsets (np.ndarray): int64, length n + 1
        neighbors (np.ndarray): int64 flat neighbor list, sorted per node
        weights (np.ndarray): float64 weight per neighbor entry
        node_ids (np.ndarray): external id (str) per internal id
        weighted (bool): whether the input carried a weight column
    """

    def __init__(
        self,
        offsets: np.ndarray,
        neighbors: np.ndarray,
        weights: np.ndarray,
        node_ids: Sequence[str],
        weighted: bool = False,
    ):
        self.offsets = _readonly(np.asarray(offsets, dtype=np.int64))
        self.neighbors = _readonly(np.asarray(neighbors, dtype=np.int64))
        self.weights = _readonly(np.asarray(weights, dtype=np.float64))
        self.node_ids = _readonly(np.asarray(node_ids, dtype=str).reshape(-1))
        self.weighted = bool(weighted)
        self._index: Optional[Dict[str, int]] = None
        if self.offsets.shape[0] != self.node_ids.shape[0] + 1:
            raise InvariantViolation("offsets and node ids disagree on the node count")

    @classmethod
    def empty(cls) -> "Graph":
        return cls(np.zeros(1, dtype=np.int64), np.zeros(0), np.zeros(0), [])

    @classmethod
    def from_index_edges(
        cls,
        n: int,
        u: np.ndarray,
        v: np.ndarray,
        node_ids: Sequence[str],
        w: Optional[np.ndarray] = None,
        weighted: bool = False,
    ) -> "Graph":
        """
        Build a graph from internal-id endpoint arrays.

        Self-loops are dropped, both directions are inserted and duplicate
        pairs collapse to one entry carrying the maximum weight.
        """
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.ones(u.shape[0]) if w is None else np.asarray(w, dtype=np.float64)

        loops = u == v
        if loops.any():
            logger.debug("Dropping %d self-loops", int(loops.sum()))
            u, v, w = u[~loops], v[~loops], w[~loops]

        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        ws = np.concatenate([w, w])
        # rows, then cols, then heaviest first so the first of a run is the max
        order = np.lexsort((-ws, cols, rows))
        rows, cols, ws = rows[order], cols[order], ws[order]
        first = np.ones(rows.shape[0], dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        rows, cols, ws = rows[first], cols[first], ws[first]

        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(offsets, cols, ws, node_ids, weighted=weighted)

    @classmethod
    def from_token_edges(
        cls,
        src: Sequence[str],
        dst: Sequence[str],
        w: Optional[Sequence[float]] = None,
        weighted: bool = False,
    ) -> "Graph":
        """Build a graph from external-id endpoint lists"""
        m = len(src)
        if m == 0:
            return cls.empty()
        tokens = np.asarray(list(src) + list(dst), dtype=str)
        ids, inverse = np.unique(tokens, return_inverse=True)
        inverse = inverse.reshape(-1)
        return cls.from_index_edges(
            len(ids), inverse[:m], inverse[m:], ids,
            None if w is None else np.asarray(w, dtype=np.float64),
            weighted=weighted,
        )

    @property
    def n(self) -> int:
        return int(self.node_ids.shape[0])

    @property
    def edge_count(self) -> int:
        """Number of undirected edges m"""
        return int(self.neighbors.shape[0] // 2)

    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    def row_index(self) -> np.ndarray:
        """Source node of every CSR entry"""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degree())

    def neighbors_of(self, x: int) -> np.ndarray:
        return self.neighbors[self.offsets[x]:self.offsets[x + 1]]

    def index_of(self, node_id: str) -> int:
        """Internal id of an external id; KeyError when absent"""
        return self.node_index[str(node_id)]

    @property
    def node_index(self) -> Dict[str, int]:
        if self._index is None:
            self._index = {node_id: i for i, node_id in enumerate(self.node_ids.tolist())}
        return self._index

    def __contains__(self, node_id) -> bool:
        return str(node_id) in self.node_index

    def edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected edges (u < v) in CSR order with their weights"""
        rows = self.row_index()
        upper = rows < self.neighbors
        return rows[upper], self.neighbors[upper], self.weights[upper]

    def to_scipy(self, use_weights: bool = True) -> sp.csr_matrix:
        data = self.weights if use_weights else np.ones_like(self.weights)
        return sp.csr_matrix(
            (np.array(data), np.array(self.neighbors), np.array(self.offsets)),
            shape=(self.n, self.n),
        )

    def induced_subgraph(self, keep: np.ndarray) -> "Graph":
        """
        Subgraph induced by the nodes where keep is True.

        Survivors are re-indexed in their original order, so external ids
        stay sorted and neighbor lists stay sorted.
        """
        keep = np.asarray(keep, dtype=bool)
        if keep.shape[0] != self.n:
            raise DataError("keep mask does not match the node count")
        new_index = np.cumsum(keep, dtype=np.int64) - 1
        rows = self.row_index()
        entry_keep = keep[rows] & keep[self.neighbors]
        new_rows = new_index[rows[entry_keep]]
        new_n = int(keep.sum())
        offsets = np.zeros(new_n + 1, dtype=np.int64)
        np.cumsum(np.bincount(new_rows, minlength=new_n), out=offsets[1:])
        return Graph(
            offsets,
            new_index[self.neighbors[entry_keep]],
            self.weights[entry_keep],
            self.node_ids[keep],
            weighted=self.weighted,
        )

    def check_invariants(self) -> None:
        """Full scan of the structural invariants; raises InvariantViolation"""
        deg = self.degree()
        if (deg < 0).any():
            raise InvariantViolation("offsets are not non-decreasing")
        rows = self.row_index()
        if (rows == self.neighbors).any():
            raise InvariantViolation("self-loop present")
        same_row = rows[1:] == rows[:-1]
        if (self.neighbors[1:][same_row] <= self.neighbors[:-1][same_row]).any():
            raise InvariantViolation("neighbor list not strictly sorted")
        forward = np.lexsort((self.neighbors, rows))
        backward = np.lexsort((rows, self.neighbors))
        if not (np.array_equal(rows[forward], self.neighbors[backward])
                and np.array_equal(self.neighbors[forward], rows[backward])
                and np.array_equal(self.weights[forward], self.weights[backward])):
            raise InvariantViolation("adjacency is not symmetric")
        if (self.weights <= 0).any():
            raise InvariantViolation("non-positive edge weight")

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.edge_count}, weighted={self.weighted})"


def _parse_weight(field: str, line_number: int) -> float:
    try:
        weight = float(field)
    except ValueError:
        raise EdgeListParseError(f"weight is not a number: {field!r}", line_number) from None
    if not math.isfinite(weight) or weight <= 0:
        raise EdgeListParseError(f"weight must be a finite number > 0, got {field!r}", line_number)
    return weight


def ingest_edge_list(source: Iterable[str], schema: EdgeListSchema = EdgeListSchema()) -> Graph:
    """
    Read an edge list into a symmetric, deduplicated, self-loop free Graph.

    Args:
        source: iterable of text lines (an open file works)
        schema: delimiter and weight column handling

    Returns:
        Graph; duplicate pairs in either direction collapse to one
        undirected edge that keeps the maximum weight
    """
    src, dst, weights = [], [], []
    saw_weights = False
    for line_number, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(schema.comment):
            continue
        if schema.delimiter is None:
            fields = stripped.split()
        else:
            fields = [field.strip() for field in stripped.split(schema.delimiter)]
        if len(fields) not in (2, 3) or not all(fields):
            raise EdgeListParseError(f"expected 'src dst [weight]', got {stripped!r}", line_number)
        if len(fields) == 3:
            if schema.weighted is False:
                raise EdgeListParseError("unexpected weight column", line_number)
            weights.append(_parse_weight(fields[2], line_number))
            saw_weights = True
        else:
            if schema.weighted:
                raise EdgeListParseError("missing weight column", line_number)
            weights.append(1.0)
        src.append(fields[0])
        dst.append(fields[1])

    graph = Graph.from_token_edges(src, dst, weights, weighted=saw_weights)
    logger.info("Ingested %d lines into %r", len(src), graph)
    return graph


def read_edge_list(path, schema: EdgeListSchema = EdgeListSchema()) -> Graph:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return ingest_edge_list(f, schema)
    except OSError as e:
        raise DataError(f"cannot read edge list {path}: {e}") from e


def export_edge_list(graph: Graph, stream: TextIO, delimiter: str = '\t') -> int:
    """
    Write the graph as a deterministic sorted edge list.

    Each undirected edge is written once as (u, v) with u < v in internal
    order; the weight column is written only for weighted graphs.

    Returns:
        number of lines written
    """
    u, v, w = graph.edges()
    ids = graph.node_ids
    if graph.weighted:
        lines = [f"{a}{delimiter}{b}{delimiter}{float(x)!r}\n"
                 for a, b, x in zip(ids[u].tolist(), ids[v].tolist(), w.tolist())]
    else:
        lines = [f"{a}{delimiter}{b}\n" for a, b in zip(ids[u].tolist(), ids[v].tolist())]
    stream.writelines(lines)
    return len(lines)


def write_edge_list(graph: Graph, path) -> int:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        return export_edge_list(graph, f)
