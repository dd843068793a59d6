"""
Table writers

Every artifact is a plain-text table: TSV for machines, or aligned columns
for reading. Footer lines start with '#' so readers that skip comments can
load either form.
"""

import os
from typing import Iterable, List, Optional, Sequence

import numpy as np

from agediffusion.exceptions import ConfigError
from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.homophily import AgeMatrix, GapProfile, Regression, ShuffleTest
from agediffusion.models.labeling import SOURCE_NAMES, Assignment
from agediffusion.models.metrics import UNREACHABLE, DemographicsTable, HitsTable, NodeMetrics
from agediffusion.models.propagation import ProbabilityTable

FORMATS = ('tsv', 'text')
EXTENSIONS = {'tsv': '.tsv', 'text': '.txt'}
NOT_ASSIGNED = 'NA'


def check_format(fmt: str) -> str:
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {fmt!r}")
    return fmt


def table_path(output: str, name: str, fmt: str = 'tsv') -> str:
    return os.path.join(output, name + EXTENSIONS[check_format(fmt)])


def render(header: Sequence[str], rows: Iterable[Sequence[str]], fmt: str = 'tsv',
           footer: Sequence[str] = ()) -> str:
    rows = [[str(cell) for cell in row] for row in rows]
    header = [str(cell) for cell in header]
    if check_format(fmt) == 'tsv':
        lines = ['\t'.join(header)] + ['\t'.join(row) for row in rows]
    else:
        widths = [len(cell) for cell in header]
        for row in rows:
            widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
        lines = ['  '.join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
                 for line in [header] + rows]
    lines += [f"# {note}" for note in footer]
    return '\n'.join(lines) + '\n'


def write(path: str, header: Sequence[str], rows: Iterable[Sequence[str]], fmt: str = 'tsv',
          footer: Sequence[str] = ()) -> str:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(render(header, rows, fmt, footer))
    return path


def fmt_prob(value: float) -> str:
    return f"{value:.9f}"


def fmt_rate(value: float) -> str:
    return f"{value:.6f}"


def probability_rows(table: ProbabilityTable) -> List[List[str]]:
    ids = table.graph.node_ids.tolist()
    return [[node_id] + [fmt_prob(p) for p in row] + [str(int(flag))]
            for node_id, row, flag in zip(ids, table.probs.tolist(), table.informed.tolist())]


def write_probabilities(path: str, table: ProbabilityTable, scheme: CategoryScheme,
                        fmt: str = 'tsv') -> str:
    header = ['node_id'] + [f"p_{label}" for label in scheme.labels] + ['informed']
    return write(path, header, probability_rows(table), fmt)


def assignment_rows(node_ids: np.ndarray, assignment: Assignment,
                    scheme: CategoryScheme) -> List[List[str]]:
    labels = scheme.labels
    return [[node_id, labels[c] if c >= 0 else NOT_ASSIGNED, fmt_prob(conf), SOURCE_NAMES[s]]
            for node_id, c, conf, s in zip(node_ids.tolist(), assignment.category.tolist(),
                                           assignment.confidence.tolist(), assignment.source.tolist())]


def write_assignments(path: str, node_ids: np.ndarray, assignment: Assignment,
                      scheme: CategoryScheme, fmt: str = 'tsv') -> str:
    header = ['node_id', 'label', 'confidence', 'source']
    return write(path, header, assignment_rows(node_ids, assignment, scheme), fmt)


def write_hits(path: str, table: HitsTable, fmt: str = 'tsv') -> str:
    """
    One row per stratum with population, share of the denominator, hits and
    rate. Single-key tables end with an overall row.
    """
    denominator = table.denominator
    header = list(table.key_names) + ['population', 'share', 'hits', 'rate']
    if table.floor:
        header.append('below_floor')
    rows = []
    for row in table.rows:
        share = row.population / denominator if denominator else 0.0
        cells = list(row.key) + [row.population, fmt_rate(share), row.hits, fmt_rate(row.rate)]
        if table.floor:
            cells.append(int(row.flagged))
        rows.append(cells)
    if len(table.key_names) == 1:
        rows.append(['overall', table.population, fmt_rate(1.0 if table.population else 0.0),
                     table.hits, fmt_rate(table.overall_rate)])
    footer = [f"denominator={denominator} excluded={table.excluded}"]
    if table.floor:
        best = table.best
        footer.append(f"floor={table.floor} best=" + (
            'none' if best is None else f"{'|'.join(best.key)} rate={fmt_rate(best.rate)}"))
    return write(path, header, rows, fmt, footer)


def write_demographics(path: str, table: DemographicsTable, fmt: str = 'tsv') -> str:
    header = ['group', 'predicted_share', 'seed_share', 'validation_share', 'hit_rate']
    rows = [[label, fmt_rate(p), fmt_rate(s), fmt_rate(v), fmt_rate(h)]
            for label, p, s, v, h in zip(table.labels, table.predicted_share, table.seed_share,
                                         table.validation_share, table.hit_rate)]
    return write(path, header, rows, fmt, [f"overall_rate={fmt_rate(table.overall_rate)}"])


def write_node_metrics(path: str, node_ids: np.ndarray, metrics: NodeMetrics) -> str:
    rows = [[node_id, sin, 'unreachable' if dts == UNREACHABLE else dts, degree]
            for node_id, sin, dts, degree in zip(node_ids.tolist(), metrics.sin.tolist(),
                                                 metrics.dts.tolist(), metrics.degree.tolist())]
    return write(path, ['node_id', 'sin', 'dts', 'degree'], rows)


def write_key_values(path: str, values: dict) -> str:
    return write(path, ['key', 'value'], [[k, v] for k, v in values.items()])


def write_matrix(path: str, matrix: AgeMatrix, fmt: str = 'tsv', integer: bool = False) -> str:
    cell = (lambda x: str(int(x))) if integer else (lambda x: f"{x:.6f}")
    header = ['age'] + [str(a) for a in matrix.ages.tolist()]
    rows = [[str(age)] + [cell(x) for x in row]
            for age, row in zip(matrix.ages.tolist(), matrix.values.tolist())]
    return write(path, header, rows, fmt)


def write_gap_profile(path: str, profile: GapProfile, fmt: str = 'tsv') -> str:
    rows = [[delta, int(count)] for delta, count in enumerate(profile.counts.tolist())]
    return write(path, ['delta', 'links'], rows, fmt)


def write_regression(path: str, regression: Regression, shuffle: Optional[ShuffleTest] = None,
                     extra: Optional[dict] = None) -> str:
    values = {
        'r': fmt_rate(regression.r),
        'slope': fmt_rate(regression.slope),
        'intercept': fmt_rate(regression.intercept),
        'n_pairs': regression.n_pairs,
    }
    values.update(extra or {})
    if shuffle is not None:
        values.update({
            'mean_abs_log_difference': fmt_rate(shuffle.observed),
            'null_mean': fmt_rate(shuffle.null_mean),
            'null_std': fmt_rate(shuffle.null_std),
            'null_bound': fmt_rate(shuffle.bound),
            'shuffles': int(shuffle.null_values.shape[0]),
        })
    return write_key_values(path, values)
