"""
Synthetic age-labeled communication graphs

Ages are drawn from a population pyramid; each pair of nodes is linked
independently with probability kappa * k(|age_u - age_v|), with kappa
calibrated so the expected mean degree of the observable graph matches the
target. Nodes sharing an integer age and client flag form a block, so the
edge count of every block pair is a single binomial draw followed by a
uniform choice of distinct pairs.
"""

import logging
import os
import typing
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from agediffusion import util
from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.base_model import Model
from agediffusion.models.graph import Graph, write_edge_list
from agediffusion.models.partition import write_label_file

logger = logging.getLogger(__name__)

PYRAMIDS = ('bimodal', 'uniform')
KERNELS = ('exponential', 'constant')


class SynthConfig(Model):
    """
    Generator parameters.

    Attributes:
        n (int): node count
        mean_degree (float): target mean degree of the observable graph
        pyramid (str): 'bimodal' (two normals) or 'uniform' integer ages
        age_min (int): youngest age
        age_max (int): oldest age
        modes (List[float]): centers of the two normals
        sigma (float): spread of each normal
        mode_weight (float): probability of drawing from the first normal
        kernel (str): 'exponential' exp(-delta / scale) or 'constant'
        scale (float): decay scale of the exponential kernel, in years
        bump_weight (float): height of the generational bump, 0 disables it
        bump_gap (float): age gap the bump is centered on
        bump_width (float): standard deviation of the bump
        client_fraction (float): share of nodes whose links are observed
        labeled_fraction (float): share of clients whose age is known
        rng_seed (int): global experiment seed
        output (str): output directory
    """

    field_types: typing.Dict[str, type] = {
        'n': int,
        'mean_degree': float,
        'pyramid': str,
        'age_min': int,
        'age_max': int,
        'modes': List[float],
        'sigma': float,
        'mode_weight': float,
        'kernel': str,
        'scale': float,
        'bump_weight': float,
        'bump_gap': float,
        'bump_width': float,
        'client_fraction': float,
        'labeled_fraction': float,
        'rng_seed': int,
        'output': str,
    }

    attribute_map: typing.Dict[str, str] = {name: name for name in field_types}

    def __init__(self, n: int = 10000, mean_degree: float = 6.0, pyramid: str = 'bimodal',
                 age_min: int = 18, age_max: int = 80, modes: Optional[List[float]] = None,
                 sigma: float = 9.0, mode_weight: float = 0.55, kernel: str = 'exponential',
                 scale: float = 5.0, bump_weight: float = 0.0, bump_gap: float = 25.0,
                 bump_width: float = 3.0, client_fraction: float = 1.0,
                 labeled_fraction: float = 0.2, rng_seed: int = 0, output: str = 'synth'):
        self.n = n
        self.mean_degree = mean_degree
        self.pyramid = pyramid
        self.age_min = age_min
        self.age_max = age_max
        self.modes = [22.0, 60.0] if modes is None else list(modes)
        self.sigma = sigma
        self.mode_weight = mode_weight
        self.kernel = kernel
        self.scale = scale
        self.bump_weight = bump_weight
        self.bump_gap = bump_gap
        self.bump_width = bump_width
        self.client_fraction = client_fraction
        self.labeled_fraction = labeled_fraction
        self.rng_seed = rng_seed
        self.output = output

    def validate(self) -> "SynthConfig":
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.mean_degree <= 0:
            raise ConfigError(f"mean_degree must be > 0, got {self.mean_degree}")
        if self.pyramid not in PYRAMIDS:
            raise ConfigError(f"pyramid must be one of {PYRAMIDS}, got {self.pyramid!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.age_max < self.age_min or self.age_min < 0:
            raise ConfigError(f"invalid age range {self.age_min}-{self.age_max}")
        if len(self.modes) != 2:
            raise ConfigError(f"bimodal pyramid needs two modes, got {self.modes}")
        if self.sigma <= 0 or self.scale <= 0 or self.bump_width <= 0:
            raise ConfigError("sigma, scale and bump_width must be > 0")
        if not 0.0 <= self.mode_weight <= 1.0:
            raise ConfigError(f"mode_weight must be in [0, 1], got {self.mode_weight}")
        if self.bump_weight < 0:
            raise ConfigError(f"bump_weight must be >= 0, got {self.bump_weight}")
        if not 0.0 < self.client_fraction <= 1.0:
            raise ConfigError(f"client_fraction must be in (0, 1], got {self.client_fraction}")
        if not 0.0 < self.labeled_fraction <= 1.0:
            raise ConfigError(f"labeled_fraction must be in (0, 1], got {self.labeled_fraction}")
        if self.mean_degree > self.n - 1:
            raise DataError(f"mean degree {self.mean_degree} is infeasible with {self.n} nodes")
        return self


@dataclass(frozen=True)
class SyntheticGraph:
    """
    Attributes:
        graph: all n nodes, isolated ones included
        ages: age in years per internal id
        clients: bool per internal id
        labeled: bool per internal id, the nodes whose age is published
    """

    graph: Graph
    ages: np.ndarray
    clients: np.ndarray
    labeled: np.ndarray

    @property
    def node_ids(self) -> np.ndarray:
        return self.graph.node_ids

    def age_labels(self, mask: Optional[np.ndarray] = None) -> Dict[str, int]:
        mask = self.labeled if mask is None else mask
        return {node_id: int(age) for node_id, age
                in zip(self.node_ids[mask].tolist(), self.ages[mask].tolist())}

    def clients_graph(self) -> Graph:
        return self.graph.induced_subgraph(self.clients)


def node_ids(n: int) -> List[str]:
    """Zero-padded ids so lexicographic and generation order agree"""
    width = len(str(n - 1))
    return [f"n{i:0{width}d}" for i in range(n)]


def kernel_values(cfg: SynthConfig, gaps: np.ndarray) -> np.ndarray:
    gaps = np.asarray(gaps, dtype=np.float64)
    if cfg.kernel == 'constant':
        base = np.ones_like(gaps)
    else:
        base = np.exp(-gaps / cfg.scale)
    if cfg.bump_weight:
        base = base + cfg.bump_weight * np.exp(-(gaps - cfg.bump_gap) ** 2 / (2.0 * cfg.bump_width ** 2))
    return base


def sample_ages(cfg: SynthConfig) -> np.ndarray:
    """
    i.i.d. integer ages in [age_min, age_max].

    The bimodal pyramid redraws samples falling outside the age range until
    every age is inside it, then rounds to whole years.
    """
    cfg.validate()
    rng = np.random.default_rng(util.derive_seed(cfg.rng_seed, "synth.ages"))
    if cfg.pyramid == 'uniform':
        return rng.integers(cfg.age_min, cfg.age_max + 1, size=cfg.n, dtype=np.int64)

    ages = np.empty(cfg.n, dtype=np.float64)
    pending = np.arange(cfg.n)
    while pending.size:
        first = rng.random(pending.size) < cfg.mode_weight
        centers = np.where(first, cfg.modes[0], cfg.modes[1])
        draw = np.rint(rng.normal(centers, cfg.sigma))
        ages[pending] = draw
        pending = pending[(draw < cfg.age_min) | (draw > cfg.age_max)]
    return ages.astype(np.int64)


def _triangle_pairs(index: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Maps k in [0, m(m-1)/2) to the k-th pair (i, j), i < j, ordered by j"""
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * index.astype(np.float64))) / 2.0).astype(np.int64)
    # float rounding can land one off near triangular numbers
    j -= (j * (j - 1) // 2) > index
    j += ((j + 1) * j // 2) <= index
    return index - j * (j - 1) // 2, j


def generate_graph(cfg: SynthConfig, ages: Optional[np.ndarray] = None) -> SyntheticGraph:
    """
    Sample the graph for the given ages (sample_ages(cfg) when omitted).

    Links between two non-clients are never generated, as they would not be
    observed.

    Raises:
        DataError: when the target mean degree cannot be reached
    """
    cfg.validate()
    ages = sample_ages(cfg) if ages is None else np.asarray(ages, dtype=np.int64)
    n = ages.shape[0]
    if n != cfg.n:
        raise DataError(f"got {n} ages for n={cfg.n}")

    client_rng = np.random.default_rng(util.derive_seed(cfg.rng_seed, "synth.clients"))
    clients = np.ones(n, dtype=bool) if cfg.client_fraction >= 1.0 \
        else client_rng.random(n) < cfg.client_fraction

    age_low = int(ages.min())
    block = (ages - age_low) * 2 + clients.astype(np.int64)
    num_blocks = int(block.max()) + 1
    order = np.argsort(block, kind='stable')
    sizes = np.bincount(block, minlength=num_blocks)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    block_age = np.arange(num_blocks) // 2 + age_low
    block_client = np.arange(num_blocks) % 2 == 1

    a, b = np.triu_indices(num_blocks)
    observable = (block_client[a] | block_client[b]) & (sizes[a] > 0) & (sizes[b] > 0)
    a, b = a[observable], b[observable]
    pairs = np.where(a == b, sizes[a] * (sizes[a] - 1) // 2, sizes[a] * sizes[b])
    affinity = kernel_values(cfg, np.abs(block_age[a] - block_age[b]))

    target_edges = cfg.mean_degree * n / 2.0
    expected = float((pairs * affinity).sum())
    if expected <= 0:
        raise DataError("no observable node pair has a positive link probability")
    if target_edges > pairs.sum():
        raise DataError(f"mean degree {cfg.mean_degree} needs more edges than observable pairs")
    kappa = target_edges / expected
    prob = kappa * affinity
    clipped = prob > 1.0
    if clipped.any():
        logger.warning("Link probability clipped at 1 for %d block pairs; mean degree will fall short",
                       int(clipped.sum()))
        prob = np.minimum(prob, 1.0)

    edge_rng = np.random.default_rng(util.derive_seed(cfg.rng_seed, "synth.edges"))
    counts = edge_rng.binomial(pairs, prob)
    us, vs = [], []
    for block_a, block_b, total, m in zip(a.tolist(), b.tolist(), pairs.tolist(), counts.tolist()):
        if m == 0:
            continue
        chosen = edge_rng.choice(total, size=m, replace=False)
        members_a = order[starts[block_a]:starts[block_a + 1]]
        if block_a == block_b:
            i, j = _triangle_pairs(chosen)
            us.append(members_a[i])
            vs.append(members_a[j])
        else:
            members_b = order[starts[block_b]:starts[block_b + 1]]
            us.append(members_a[chosen // sizes[block_b]])
            vs.append(members_b[chosen % sizes[block_b]])

    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64)
    graph = Graph.from_index_edges(n, u, v, node_ids(n))

    label_rng = np.random.default_rng(util.derive_seed(cfg.rng_seed, "synth.labels"))
    labeled = clients & (label_rng.random(n) < cfg.labeled_fraction)

    logger.info("Synthetic graph generated: %s", {
        'nodes': n,
        'edges': graph.edge_count,
        'mean_degree': round(2.0 * graph.edge_count / n, 4),
        'target_mean_degree': cfg.mean_degree,
        'clients': int(clients.sum()),
        'labeled': int(labeled.sum()),
    })
    return SyntheticGraph(graph, ages, clients, labeled)


def write_synthetic(synthetic: SyntheticGraph, output) -> Dict[str, str]:
    """
    Write edges.tsv and labels.tsv, plus clients.tsv and edges_clients.tsv
    when not every node is a client.

    Returns:
        artifact name -> path
    """
    os.makedirs(output, exist_ok=True)
    paths = {
        'edges': os.path.join(output, 'edges.tsv'),
        'labels': os.path.join(output, 'labels.tsv'),
    }
    write_edge_list(synthetic.graph, paths['edges'])
    write_label_file(synthetic.age_labels(), paths['labels'])
    if not synthetic.clients.all():
        paths['clients'] = os.path.join(output, 'clients.tsv')
        paths['edges_clients'] = os.path.join(output, 'edges_clients.tsv')
        with open(paths['clients'], 'w', encoding='utf-8', newline='\n') as f:
            f.writelines(f"{node_id}\n" for node_id in synthetic.node_ids[synthetic.clients].tolist())
        write_edge_list(synthetic.clients_graph(), paths['edges_clients'])
    return paths
