"""
Tests for SIN / DTS / degree and the hits tables
"""

import networkx as nx
import numpy as np
import pytest

from agediffusion.exceptions import ConfigError, DataError
from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.labeling import UNASSIGNED, Assignment, collapse_argmax
from agediffusion.models.metrics import (
    UNREACHABLE,
    MetricBin,
    NodeMetrics,
    baselines,
    compute_dts,
    compute_metrics,
    compute_sin,
    default_bins,
    demographics_table,
    hits_by_group,
    hits_by_metric,
    joint_table,
    parse_bins,
    population_by_metric,
)
from agediffusion.models.partition import NodePartition, NodeRoles, Role
from agediffusion.models.propagation import PropagationConfig, run


@pytest.fixture
def toy():
    """
    Six nodes: node 0 is a seed, nodes 1-5 are validation nodes and node 5
    is left unassigned.
    """
    roles = NodeRoles(
        np.array([Role.SEED] + [Role.VALIDATION] * 5, dtype=np.int8),
        np.array([0, 0, 1, 1, 2, 3], dtype=np.int64),
        4,
    )
    category = np.array([0, 0, 1, 0, 2, UNASSIGNED], dtype=np.int64)
    assignment = Assignment(category, np.full(6, 0.5), np.zeros(6, dtype=np.int8))
    node_metrics = NodeMetrics(
        sin=np.array([0, 1, 1, 0, 0, 0]),
        dts=np.array([0, 1, 1, 2, UNREACHABLE, 3]),
        degree=np.array([5, 1, 2, 3, 40, 120]),
    )
    return roles, assignment, node_metrics


def brute_force_sin(graph, seeds):
    return [sum(1 for y in graph.neighbors_of(x).tolist() if graph.node_ids[y] in seeds)
            for x in range(graph.n)]


class TestNodeMetrics:

    def test_star(self, make_graph):
        graph = make_graph(["c l1", "c l2", "c l3", "c x", "z z"])
        partition = NodePartition({"l1": 0, "l2": 1, "l3": 2})
        node_metrics = compute_metrics(graph, partition)
        index = graph.node_index
        assert node_metrics.sin[index["c"]] == 3
        assert node_metrics.sin[index["z"]] == 0
        assert node_metrics.sin[index["l1"]] == 0
        assert node_metrics.degree[index["c"]] == 4
        assert node_metrics.dts[index["x"]] == 2
        assert node_metrics.dts[index["z"]] == UNREACHABLE

    def test_dts_on_path(self, make_graph):
        graph = make_graph(["s a", "a b", "c d"])
        dts = compute_dts(graph, NodePartition({"s": 0}))
        index = graph.node_index
        assert [int(dts[index[k]]) for k in ("s", "a", "b", "c", "d")] == [0, 1, 2, -1, -1]

    def test_sin_matches_brute_force(self, make_random_graph, make_random_partition):
        for seed in range(5):
            graph = make_random_graph(150, 5, seed, connected=False)
            partition = make_random_partition(graph, 0.2, 4, seed)
            assert compute_sin(graph, partition).tolist() == brute_force_sin(graph, partition.seeds)

    def test_dts_matches_networkx(self, make_random_graph, make_random_partition):
        for seed in range(5):
            graph = make_random_graph(200, 2, seed, connected=False)
            partition = make_random_partition(graph, 0.02, 4, seed)
            oracle = nx.Graph()
            oracle.add_nodes_from(range(graph.n))
            u, v, _ = graph.edges()
            oracle.add_edges_from(zip(u.tolist(), v.tolist()))
            sources = {graph.index_of(k) for k in partition.seeds}
            lengths = nx.multi_source_dijkstra_path_length(oracle, sources)
            expected = [lengths.get(x, UNREACHABLE) for x in range(graph.n)]
            assert compute_dts(graph, partition).tolist() == expected

    def test_dts_needs_seeds(self, triangle):
        with pytest.raises(DataError):
            compute_dts(triangle, NodePartition({}, {"x": 0}))

    def test_unknown_metric(self, toy):
        with pytest.raises(ConfigError):
            toy[2].values('closeness')


class TestBins:

    def test_parse(self):
        assert [b.label for b in parse_bins("0,1,2,3+")] == ["0", "1", "2", "3+"]
        assert [b.label for b in parse_bins("1-2, 3-29,30-48")] == ["1-2", "3-29", "30-48"]
        assert parse_bins("4+")[0] == MetricBin(4)

    def test_contains(self):
        values = np.array([0, 1, 2, 5, 100])
        assert MetricBin(1, 2).contains(values).tolist() == [False, True, True, False, False]
        assert MetricBin(5).contains(values).tolist() == [False, False, False, True, True]

    def test_errors(self):
        with pytest.raises(ConfigError):
            parse_bins("a-b")
        with pytest.raises(ConfigError):
            parse_bins("")
        with pytest.raises(ConfigError):
            parse_bins("5-3")
        with pytest.raises(DataError):
            parse_bins("1-5,3-8")
        with pytest.raises(DataError):
            parse_bins("3+,5")

    def test_default_degree_bins(self):
        labels = [b.label for b in default_bins('degree', np.array([1, 50]))]
        assert labels == ["0", "1-2", "3-29", "30-48", "49-66", "67-100"]
        assert default_bins('degree', np.array([150]))[-1].label == "101+"

    def test_default_dts_bins(self):
        assert [b.label for b in default_bins('dts', np.array([1, 4]))] == ["0", "1", "2", "3", "4"]


class TestHits:

    def test_by_group(self, toy):
        roles, assignment, _ = toy
        table = hits_by_group(assignment, roles, CategoryScheme())
        assert table.denominator == 4
        assert table.excluded == 1
        assert table.hits == 3
        assert table.overall_rate == 0.75
        assert [(r.population, r.hits) for r in table.rows] == [(1, 1), (2, 1), (1, 1), (0, 0)]
        assert table.row("25-34").rate == 0.5
        assert table.row("50+").rate == 0.0

    def test_by_dts(self, toy):
        table = hits_by_metric(toy[1], toy[0], toy[2], 'dts')
        assert [r.key[0] for r in table.rows] == ["0", "1", "2", "unreachable"]
        assert [(r.population, r.hits) for r in table.rows] == [(0, 0), (2, 2), (1, 0), (1, 1)]
        assert table.population == table.denominator

    def test_by_degree(self, toy):
        table = hits_by_metric(toy[1], toy[0], toy[2], 'degree')
        assert table.row("1-2").population == 2
        assert table.row("3-29").hits == 0
        assert table.row("30-48").rate == 1.0
        assert table.population == 4

    def test_by_sin(self, toy):
        table = hits_by_metric(toy[1], toy[0], toy[2], 'sin')
        assert [r.key[0] for r in table.rows] == ["0", "1", "2", "3", "4+"]
        assert table.row("0").population == 2
        assert table.row("1").population == 2

    def test_uncovered_values(self, toy):
        with pytest.raises(DataError):
            hits_by_metric(toy[1], toy[0], toy[2], 'degree', parse_bins("1-2"))

    def test_empty_validation(self, toy):
        roles = NodeRoles(np.array([Role.SEED, Role.UNKNOWN], dtype=np.int8), np.array([0, -1]), 4)
        with pytest.raises(DataError):
            hits_by_group(collapse_argmax(np.full((2, 4), 0.25)), roles, CategoryScheme())


class TestJointTable:

    def test_floor_and_best(self, toy):
        table = joint_table(toy[1], toy[0], toy[2], floor=2)
        cell = table.row("1-2", "1")
        assert (cell.population, cell.hits, cell.flagged) == (2, 2, False)
        assert table.row("3-29", "2").flagged
        assert table.row("49-66", "3").population == 0
        assert table.best == cell
        assert table.denominator == 3
        assert len(table.rows) == 15

    def test_no_best_when_all_flagged(self, toy):
        assert joint_table(toy[1], toy[0], toy[2], floor=3).best is None

    def test_single_cell_equals_overall(self, make_random_graph, make_random_partition):
        graph = make_random_graph(300, 5, 12)
        roles = make_random_partition(graph, 0.3, 4, 12, validation_share=0.3).bind(graph)
        assignment = collapse_argmax(run(graph, roles, PropagationConfig()))
        node_metrics = compute_metrics(graph, roles)
        joint = joint_table(assignment, roles, node_metrics, [MetricBin(0)], [MetricBin(0)], floor=0)
        overall = hits_by_group(assignment, roles, CategoryScheme())
        assert len(joint.rows) == 1
        assert joint.rows[0].hits == overall.hits
        assert joint.overall_rate == overall.overall_rate

    def test_sin_by_degree(self, toy):
        table = joint_table(toy[1], toy[0], toy[2], parse_bins("0,1+"), parse_bins("1-2,3-100"),
                            floor=0, row_metric='sin', col_metric='degree')
        assert table.key_names == ("sin", "degree")
        assert table.row("1+", "1-2").population == 2
        assert table.row("0", "3-100").population == 2


class TestSummaries:

    def test_baselines(self, toy):
        base = baselines(toy[0], 4)
        assert base['uniform'] == 0.25
        assert base['modal_category'] == 0
        assert base['modal'] == pytest.approx(0.2)

    def test_demographics(self, toy):
        roles, assignment, _ = toy
        demo = demographics_table(assignment, roles, CategoryScheme())
        np.testing.assert_allclose(demo.predicted_share, [0.6, 0.2, 0.2, 0.0])
        np.testing.assert_allclose(demo.seed_share, [1, 0, 0, 0])
        np.testing.assert_allclose(demo.validation_share, [0.2, 0.4, 0.2, 0.2])
        np.testing.assert_allclose(demo.hit_rate, [1.0, 0.5, 1.0, 0.0])
        assert demo.overall_rate == 0.75

    def test_population_by_dts(self, toy):
        rows = population_by_metric(toy[2], toy[0], 'dts')
        assert [(r.label, r.nodes, r.seeds, r.validation) for r in rows] == [
            ("0", 1, 1, 0), ("1", 2, 0, 2), ("2", 1, 0, 1), ("3", 1, 0, 1), ("unreachable", 1, 0, 1)]
