import logging
import os
from typing import Dict, List

from agediffusion import tables
from agediffusion.controllers.pipeline import configure_threads, pipeline_stage, prepare
from agediffusion.models import metrics
from agediffusion.models.run_config import RunConfig

logger = logging.getLogger(__name__)


def cmd_metrics(cfg: RunConfig) -> Dict[str, List[metrics.PopulationRow]]:
    """
    Node metrics of the pruned graph and the population per SIN, DTS and
    degree bin, without propagating.
    """
    with pipeline_stage('config'):
        cfg.validate()
        configure_threads(cfg.threads)
    prepared = prepare(cfg)

    populations = {}
    with pipeline_stage('write'):
        tables.write_node_metrics(os.path.join(cfg.output, 'node_metrics.tsv'),
                                  prepared.graph.node_ids, prepared.metrics)
        for which in metrics.METRIC_NAMES:
            rows = metrics.population_by_metric(prepared.metrics, prepared.roles, which, cfg.bins(which))
            populations[which] = rows
            tables.write(tables.table_path(cfg.output, f'population_by_{which}', cfg.format),
                         [which, 'nodes', 'seeds', 'validation'],
                         [[r.label, r.nodes, r.seeds, r.validation] for r in rows], cfg.format)
    logger.info("Metrics written to %s", cfg.output)
    return populations
