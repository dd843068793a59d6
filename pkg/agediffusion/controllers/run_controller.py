import datetime
import hashlib
import logging
import os
import platform
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numba
import numpy as np
import scipy
from dateutil import tz

import agediffusion
from agediffusion import encoder, tables, util
from agediffusion.controllers.pipeline import (
    PreparedRun,
    configure_threads,
    pipeline_stage,
    prepare,
    require_validation,
)
from agediffusion.exceptions import ConfigError
from agediffusion.models import labeling, metrics, propagation
from agediffusion.models.labeling import Assignment
from agediffusion.models.metrics import HitsTable
from agediffusion.models.propagation import PropagationConfig, PropagationState, ProbabilityTable
from agediffusion.models.run_config import RunConfig

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = {'lambda': 'lambda', 't_end': 'iterations', 'iterations': 'iterations', 'tau': 'tau'}


@dataclass(frozen=True)
class RunResult:
    """
    Attributes:
        table: final probability vectors
        assignment: collapsed (and tau-filtered) categories
        groups: hit rates by true age group
        convergence: validation accuracy after each iteration
    """

    table: ProbabilityTable
    assignment: Assignment
    groups: HitsTable
    convergence: List[float]

    @property
    def accuracy(self) -> float:
        return self.groups.overall_rate


@dataclass(frozen=True)
class SweepRow:
    value: float
    accuracy: float
    assigned: int
    denominator: int


def propagate(prepared: PreparedRun, cfg: PropagationConfig, trace: Optional[List[float]] = None) -> ProbabilityTable:
    roles = prepared.roles
    observer = None
    if trace is not None and roles.validation_count:
        def observer(state: PropagationState) -> None:
            trace.append(propagation.validation_accuracy(state.current, roles))

    with pipeline_stage('propagate'):
        table = propagation.run(prepared.graph, roles, cfg, prepared.scheme, observer)
        propagation.check_normalized(table.probs)
    return table


def collapse(prepared: PreparedRun, table: ProbabilityTable, cfg: RunConfig) -> Assignment:
    """argmax or PPS, then the confidence filter"""
    roles = prepared.roles
    with pipeline_stage('label'):
        if cfg.pps:
            source = roles.label[roles.seed_mask] if cfg.pps_target == 'seeds' \
                else roles.label[roles.seed_mask | roles.validation_mask]
            target = labeling.category_distribution(source, prepared.scheme.num_categories)
            assignment = labeling.pps_collapse(table, roles.seed_mask, roles.label, target, cfg.pps_scope)
        else:
            assignment = labeling.collapse_argmax(table)
        return labeling.filter_by_threshold(assignment, cfg.tau)


def run_pipeline(prepared: PreparedRun, cfg: RunConfig) -> RunResult:
    require_validation(prepared)
    trace: List[float] = []
    table = propagate(prepared, cfg.propagation, trace)
    assignment = collapse(prepared, table, cfg)
    with pipeline_stage('evaluate'):
        groups = metrics.hits_by_group(assignment, prepared.roles, prepared.scheme)
    logger.info("Run complete: %s", {
        'accuracy': round(groups.overall_rate, 6),
        'evaluated': groups.denominator,
        'unassigned': groups.excluded,
    })
    return RunResult(table, assignment, groups, trace)


def _write_outputs(prepared: PreparedRun, result: RunResult, cfg: RunConfig) -> Dict[str, str]:
    out, fmt = cfg.output, cfg.format
    roles, node_metrics, scheme = prepared.roles, prepared.metrics, prepared.scheme
    ids = prepared.graph.node_ids
    written = {}
    with pipeline_stage('write'):
        written['probabilities'] = tables.write_probabilities(
            os.path.join(out, 'probabilities.tsv'), result.table, scheme)
        written['assignments'] = tables.write_assignments(
            os.path.join(out, 'assignments.tsv'), ids, result.assignment, scheme)
        written['hits_by_group'] = tables.write_hits(
            tables.table_path(out, 'hits_by_group', fmt), result.groups, fmt)
        for which in metrics.METRIC_NAMES:
            table = metrics.hits_by_metric(result.assignment, roles, node_metrics, which, cfg.bins(which))
            written[f'hits_by_{which}'] = tables.write_hits(
                tables.table_path(out, f'hits_by_{which}', fmt), table, fmt)
        joint = metrics.joint_table(result.assignment, roles, node_metrics, cfg.bins('degree'),
                                    cfg.joint_columns, cfg.population_floor)
        written['joint_degree_dts'] = tables.write_hits(
            tables.table_path(out, 'joint_degree_dts', fmt), joint, fmt)
        sin_degree = metrics.joint_table(
            result.assignment, roles, node_metrics, cfg.bins('sin') or metrics.DEFAULT_SIN_BINS,
            cfg.bins('degree') or metrics.DEFAULT_DEGREE_BINS, cfg.population_floor,
            row_metric='sin', col_metric='degree')
        written['joint_sin_degree'] = tables.write_hits(
            tables.table_path(out, 'joint_sin_degree', fmt), sin_degree, fmt)
        written['demographics'] = tables.write_demographics(
            tables.table_path(out, 'demographics', fmt),
            metrics.demographics_table(result.assignment, roles, scheme), fmt)
        base = metrics.baselines(roles, scheme.num_categories)
        written['baselines'] = tables.write_key_values(os.path.join(out, 'baselines.tsv'), {
            'accuracy': tables.fmt_rate(result.accuracy),
            'uniform': tables.fmt_rate(base['uniform']),
            'modal': tables.fmt_rate(base['modal']),
            'modal_group': scheme.label(int(base['modal_category'])),
            'validation': result.groups.denominator,
        })
        written['node_metrics'] = tables.write_node_metrics(
            os.path.join(out, 'node_metrics.tsv'), ids, node_metrics)
        written['convergence'] = tables.write(
            os.path.join(out, 'convergence.tsv'), ['iteration', 'accuracy'],
            [[t, tables.fmt_rate(acc)] for t, acc in enumerate(result.convergence)])
    return written


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(encoder.dumps(cfg).encode('utf-8')).hexdigest()


def write_manifest(cfg: RunConfig, prepared: PreparedRun, written: Dict[str, str],
                   summary: Dict[str, object]) -> str:
    """manifest.json: config and its hash, input and output hashes, versions"""
    manifest = {
        'config': cfg,
        'config_sha256': config_hash(cfg),
        'inputs': {name: {'path': path, 'sha256': util.sha256_file(path)}
                   for name, path in prepared.inputs.paths.items()},
        'outputs': {name: {'path': os.path.basename(path), 'sha256': util.sha256_file(path)}
                    for name, path in sorted(written.items())},
        'versions': {
            'agediffusion': agediffusion.__version__,
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'numba': numba.__version__,
            'python': platform.python_version(),
        },
        'summary': summary,
        'created': datetime.datetime.now(tz.tzutc()),
    }
    path = os.path.join(cfg.output, 'manifest.json')
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(encoder.dumps(manifest))
    return path


def cmd_run(cfg: RunConfig) -> Dict[str, object]:
    """
    Full pipeline: ingest, prune, split, propagate, label, evaluate, write.

    Returns:
        summary dict (also stored in the manifest)
    """
    with pipeline_stage('config'):
        cfg.validate()
        configure_threads(cfg.threads)
    prepared = prepare(cfg)
    result = run_pipeline(prepared, cfg)
    written = _write_outputs(prepared, result, cfg)
    base = metrics.baselines(prepared.roles, prepared.scheme.num_categories)
    summary = {
        'accuracy': result.accuracy,
        'evaluated': result.groups.denominator,
        'unassigned': result.groups.excluded,
        'nodes': prepared.graph.n,
        'seeds': prepared.roles.seed_count,
        'uniform_baseline': base['uniform'],
        'modal_baseline': base['modal'],
    }
    with pipeline_stage('write'):
        write_manifest(cfg, prepared, written, summary)
    return summary


def parse_values(values) -> List[float]:
    if isinstance(values, str):
        values = [v for v in values.split(',') if v.strip()]
    try:
        return [float(v) for v in values]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got {values!r}") from None


def cmd_sweep(cfg: RunConfig, parameter: str, values: Sequence) -> List[SweepRow]:
    """
    One pipeline run per value on a shared graph and split.

    Writes sweep_<parameter>.tsv with the validation accuracy, the number of
    assigned validation nodes and the validation denominator per value.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMETERS)}, got {parameter!r}")
    values = parse_values(values)
    if len(values) < 2:
        raise ConfigError(f"a sweep needs at least 2 values, got {len(values)}")
    key = SWEEP_PARAMETERS[parameter]
    if key == 'iterations' and not all(float(v).is_integer() for v in values):
        raise ConfigError(f"iterations must be whole numbers, got {values}")

    with pipeline_stage('config'):
        cfg.validate()
        configs = [cfg.updated({key: int(v) if key == 'iterations' else v}) for v in values]
        for c in configs:
            c.validate(require_inputs=False)
        configure_threads(cfg.threads)
    prepared = prepare(cfg)
    require_validation(prepared)

    rows = []
    shared_table = propagate(prepared, cfg.propagation) if key == 'tau' else None
    for value, run_cfg in zip(values, configs):
        table = shared_table if shared_table is not None else propagate(prepared, run_cfg.propagation)
        assignment = collapse(prepared, table, run_cfg)
        with pipeline_stage('evaluate'):
            groups = metrics.hits_by_group(assignment, prepared.roles, prepared.scheme)
        rows.append(SweepRow(value, groups.overall_rate, groups.denominator,
                             prepared.roles.validation_count))
        logger.info("Sweep %s=%s: accuracy %.6f over %d nodes", key, value, groups.overall_rate,
                    groups.denominator)

    with pipeline_stage('write'):
        tables.write(os.path.join(cfg.output, f'sweep_{key}.tsv'),
                     [key, 'accuracy', 'assigned', 'denominator'],
                     [[f"{r.value:g}", tables.fmt_rate(r.accuracy), r.assigned, r.denominator]
                      for r in rows])
    return rows
