import logging
import os
from typing import Dict

import numpy as np

from agediffusion import tables, util
from agediffusion.controllers.pipeline import ingest, pipeline_stage
from agediffusion.exceptions import ConfigError
from agediffusion.models import homophily
from agediffusion.models.run_config import RunConfig

logger = logging.getLogger(__name__)


def cmd_homophily(cfg: RunConfig) -> Dict[str, object]:
    """
    Age assortativity of the labeled subgraph, before any pruning.

    Writes communication_matrix, null_matrix, log_difference, gap_profile and
    regression.tsv (regression plus the label-shuffle test). With
    shuffle_labels the ages are permuted over the labeled nodes first.
    """
    with pipeline_stage('config'):
        cfg.validate()
        if cfg.label_mode != 'age':
            raise ConfigError("homophily needs ages in years (label_mode = age)")
    inputs = ingest(cfg)
    graph = inputs.graph

    with pipeline_stage('homophily'):
        ages = homophily.age_vector(graph, inputs.values)
        if cfg.shuffle_labels:
            rng = np.random.default_rng(util.derive_seed(cfg.rng_seed, "homophily.labels"))
            ages = homophily.shuffle_ages(ages, rng)
            logger.info("Ages shuffled over %d labeled nodes", int((ages != homophily.NO_AGE).sum()))
        c_matrix, r_matrix, log_diff = homophily.social_effect(graph, ages, cfg.eps)
        profile = homophily.gap_profile(graph, ages)
        regression = homophily.linked_age_regression(graph, ages)
        shuffle = homophily.shuffle_test(graph, ages, cfg.shuffles, cfg.rng_seed, cfg.eps)
        diagonal, off_diagonal = log_diff.diagonal_contrast()

    out, fmt = cfg.output, cfg.format
    with pipeline_stage('write'):
        tables.write_matrix(tables.table_path(out, 'communication_matrix', fmt), c_matrix, fmt, integer=True)
        tables.write_matrix(tables.table_path(out, 'null_matrix', fmt), r_matrix, fmt)
        tables.write_matrix(tables.table_path(out, 'log_difference', fmt), log_diff, fmt)
        tables.write_gap_profile(tables.table_path(out, 'gap_profile', fmt), profile, fmt)
        tables.write_regression(os.path.join(out, 'regression.tsv'), regression, shuffle, {
            'labeled_edges': profile.total,
            'diagonal_mean': tables.fmt_rate(diagonal),
            'off_diagonal_mean': tables.fmt_rate(off_diagonal),
            'shuffled_labels': int(cfg.shuffle_labels),
        })

    summary = {
        'r': regression.r,
        'slope': regression.slope,
        'labeled_edges': profile.total,
        'mean_abs_log_difference': shuffle.observed,
        'null_bound': shuffle.bound,
    }
    logger.info("Homophily complete: %s", summary)
    return summary
