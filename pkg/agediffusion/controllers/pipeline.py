"""
Shared pipeline stages: ingest, prune and split
"""

import contextlib
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Type, TypeVar

from agediffusion import util
from agediffusion.exceptions import ConfigError, DataError, InvariantViolation, StageError
from agediffusion.models.base_model import Model
from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.graph import Graph, read_edge_list
from agediffusion.models.metrics import UNREACHABLE, NodeMetrics, compute_metrics
from agediffusion.models.partition import (
    NodePartition,
    NodeRoles,
    categorize,
    read_label_file,
    restrict_labels,
    split_ground_truth,
    split_stream_seed,
)
from agediffusion.models.propagation import set_threads
from agediffusion.models.pruning import prune_high_degree, prune_seedless_components
from agediffusion.models.run_config import RunConfig
from agediffusion.models.synth import SynthConfig, generate_graph, write_synthetic

logger = logging.getLogger(__name__)

NUM_THREADS = os.getenv('AGEDIFFUSION_NUM_THREADS', '')

M = TypeVar('M', bound=Model)


@contextlib.contextmanager
def pipeline_stage(name: str) -> Iterator[None]:
    """Runs a stage, tagging any failure with the stage name"""
    logger.debug("Stage %s started", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e
    logger.debug("Stage %s complete", name)


def load_config(klass: Type[M], config_path: Optional[str] = None,
                overrides: Optional[Dict[str, object]] = None) -> M:
    """Defaults, then the key = value file, then non-None overrides"""
    raw = util.read_key_value_file(config_path) if config_path else {}
    return klass.from_dict(raw).updated(overrides or {})


def configure_threads(threads: Optional[int]) -> None:
    """The 'threads' setting wins over AGEDIFFUSION_NUM_THREADS"""
    if threads is None and NUM_THREADS.strip():
        try:
            threads = int(NUM_THREADS)
        except ValueError:
            raise ConfigError(f"AGEDIFFUSION_NUM_THREADS is not an integer: {NUM_THREADS!r}") from None
    set_threads(threads)


@dataclass(frozen=True)
class Inputs:
    """
    Attributes:
        graph: graph as read, before any pruning
        values: label-file values (ages or categories) of nodes in the graph
        labels: category per labeled node of the graph
        paths: input name -> path
    """

    graph: Graph
    values: Dict[str, int]
    labels: Dict[str, int]
    paths: Dict[str, str]


@dataclass(frozen=True)
class PreparedRun:
    """
    Attributes:
        inputs: what was read
        graph: graph after both prunes
        partition: seed / validation split of the labeled nodes
        roles: partition bound to graph
        metrics: SIN, DTS and degree on graph
        scheme: age categories
    """

    inputs: Inputs
    graph: Graph
    partition: NodePartition
    roles: NodeRoles
    metrics: NodeMetrics
    scheme: CategoryScheme


def materialize_synthetic(cfg: RunConfig) -> Dict[str, str]:
    """Generates the graph described by cfg.synth under <output>/synth"""
    synth_cfg = load_config(SynthConfig, cfg.synth,
                            {'output': os.path.join(cfg.output, 'synth'), 'rng_seed': cfg.rng_seed})
    paths = write_synthetic(generate_graph(synth_cfg), synth_cfg.output)
    logger.info("Synthetic inputs written to %s", synth_cfg.output)
    return paths


def ingest(cfg: RunConfig) -> Inputs:
    with pipeline_stage('synth'):
        paths = materialize_synthetic(cfg) if cfg.synth else {'edges': cfg.edges, 'labels': cfg.labels}
    with pipeline_stage('ingest'):
        graph = read_edge_list(paths['edges'])
        values = restrict_labels(read_label_file(paths['labels'], cfg.label_mode), graph)
        labels = categorize(values, cfg.label_mode, cfg.scheme)
    return Inputs(graph, values, labels, {'edges': paths['edges'], 'labels': paths['labels']})


def prepare(cfg: RunConfig, inputs: Optional[Inputs] = None) -> PreparedRun:
    """
    Ingest, degree prune, split the surviving labels, then drop components
    without seeds.

    Raises:
        StageError: tagged with the failing stage
    """
    inputs = inputs or ingest(cfg)
    scheme = cfg.scheme

    with pipeline_stage('prune'):
        graph = prune_high_degree(inputs.graph, cfg.prune_cap)
        labels = {k: c for k, c in inputs.labels.items() if k in graph}
        logger.info("Labeled nodes after degree pruning: %d of %d", len(labels), len(inputs.labels))

    with pipeline_stage('split'):
        partition = split_ground_truth(labels, cfg.seed_fraction, split_stream_seed(cfg.rng_seed),
                                       scheme.num_categories)

    with pipeline_stage('prune'):
        graph = prune_seedless_components(graph, partition)
        roles = partition.bind(graph)

    with pipeline_stage('metrics'):
        metrics = compute_metrics(graph, roles)
        unreachable = int((metrics.dts == UNREACHABLE).sum())
        if unreachable:
            raise InvariantViolation(f"{unreachable} nodes unreachable from every seed after pruning")

    logger.info("Prepared run: %s", {
        'nodes': graph.n,
        'edges': graph.edge_count,
        'seeds': roles.seed_count,
        'validation': roles.validation_count,
    })
    return PreparedRun(inputs, graph, partition, roles, metrics, scheme)


def require_validation(prepared: PreparedRun) -> None:
    if prepared.roles.validation_count == 0:
        raise StageError('evaluate', DataError("empty validation set after pruning"))