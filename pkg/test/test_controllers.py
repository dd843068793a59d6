"""
End-to-end tests of the subcommands and the command line

Tests cover:
  - Golden outputs on a hand-iterated path graph
  - Determinism of every written table
  - Manifest contents
  - Exit codes and stage names of failures
  - sweep, homophily, metrics and synth subcommands
  - Config precedence (defaults < config file < flags)
"""

import json
import os

import pytest

from agediffusion import __main__ as cli
from agediffusion.controllers import pipeline
from agediffusion.controllers.homophily_controller import cmd_homophily
from agediffusion.controllers.metrics_controller import cmd_metrics
from agediffusion.controllers.pipeline import configure_threads, load_config, pipeline_stage
from agediffusion.controllers.run_controller import cmd_run, cmd_sweep, parse_values
from agediffusion.exceptions import ConfigError, StageError
from agediffusion.models.run_config import RunConfig
from agediffusion.models.synth import SynthConfig, generate_graph, write_synthetic

PATH_EDGES = ["s a", "a b", "b c", "c d", "d e"]

# Hand-iterated masked diffusion on s-a-b-c-d-e, lambda 0.5, after five steps.
# All labels fall in '<25', so each row is [p, q, q, q] with p + 3q = 1; keyed by seed pair.
GOLDEN_PATH = {
    ('e', 's'): {'s': 0.712890625, 'a': 0.3876953125, 'b': 0.314453125,
                 'c': 0.314453125, 'd': 0.3876953125, 'e': 0.712890625},
    ('c', 's'): {'s': 0.7158203125, 'a': 0.4169921875, 'b': 0.4140625,
                 'c': 0.71728515625, 'd': 0.39208984375, 'e': 0.3408203125},
    ('c', 'e'): {'s': 0.28515625, 'a': 0.3203125, 'b': 0.390625,
                 'c': 0.7421875, 'd': 0.501953125, 'e': 0.765625},
}


def write_inputs(directory, edges, labels):
    directory.mkdir(parents=True, exist_ok=True)
    edges_path = directory / "edges.tsv"
    labels_path = directory / "labels.tsv"
    edges_path.write_text("".join(line + "\n" for line in edges))
    labels_path.write_text("".join(f"{k}\t{v}\n" for k, v in labels.items()))
    return str(edges_path), str(labels_path)


def read_rows(path):
    with open(path) as f:
        return [line.rstrip("\n").split("\t") for line in f if not line.startswith("#")]


@pytest.fixture(scope="module")
def synthetic_inputs(tmp_path_factory):
    directory = tmp_path_factory.mktemp("synth")
    paths = write_synthetic(generate_graph(SynthConfig(n=1500, rng_seed=3)), str(directory))
    return paths['edges'], paths['labels']


@pytest.fixture
def path_inputs(tmp_path):
    # both labels fall in '<25', so whichever becomes the seed the other one is a hit
    return write_inputs(tmp_path / "in", PATH_EDGES, {"s": 20, "e": 22})


@pytest.fixture
def three_label_path(tmp_path):
    # three labels split into two seeds and one validation node
    return write_inputs(tmp_path / "in", PATH_EDGES, {"s": 20, "c": 21, "e": 22})


class TestRun:

    def test_golden_path(self, three_label_path, tmp_path):
        edges, labels = three_label_path
        out = str(tmp_path / "out")
        summary = cmd_run(RunConfig(edges=edges, labels=labels, output=out, t_end=5))
        assert summary['seeds'] == 2
        assert summary['evaluated'] == 1
        assert summary['accuracy'] == 1.0

        dts = {row[0]: row[2] for row in read_rows(os.path.join(out, 'node_metrics.tsv'))[1:]}
        seeds = tuple(sorted(node for node, d in dts.items() if d == '0'))
        expected = GOLDEN_PATH[seeds]

        rows = read_rows(os.path.join(out, 'probabilities.tsv'))
        assert rows[0] == ['node_id', 'p_<25', 'p_25-34', 'p_35-49', 'p_50+', 'informed']
        assert len(rows) == 7
        for row in rows[1:]:
            p = expected[row[0]]
            q = (1.0 - p) / 3
            assert all(len(cell.split('.')[1]) == 9 for cell in row[1:5])
            assert [float(cell) for cell in row[1:5]] == pytest.approx([p, q, q, q], abs=1e-9)
            assert row[5] == '1'

        assignments = read_rows(os.path.join(out, 'assignments.tsv'))
        assert assignments[0] == ['node_id', 'label', 'confidence', 'source']
        assert {row[1] for row in assignments[1:]} == {'<25'}

        convergence = read_rows(os.path.join(out, 'convergence.tsv'))
        assert len(convergence) == 1 + 6

    def test_outputs_written(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        out = str(tmp_path / "out")
        cmd_run(RunConfig(edges=edges, labels=labels, output=out, format='text'))
        names = set(os.listdir(out))
        for name in ('probabilities.tsv', 'assignments.tsv', 'baselines.tsv', 'node_metrics.tsv',
                     'convergence.tsv', 'manifest.json', 'hits_by_group.txt', 'hits_by_sin.txt',
                     'hits_by_dts.txt', 'hits_by_degree.txt', 'joint_degree_dts.txt',
                     'joint_sin_degree.txt', 'demographics.txt'):
            assert name in names

    def test_deterministic(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        outputs = []
        for k in range(2):
            out = str(tmp_path / f"out{k}")
            cmd_run(RunConfig(edges=edges, labels=labels, output=out, pps=True, rng_seed=5))
            outputs.append(out)
        files = sorted(os.listdir(outputs[0]))
        assert files == sorted(os.listdir(outputs[1]))
        for name in files:
            if name == 'manifest.json':
                continue
            with open(os.path.join(outputs[0], name)) as a, open(os.path.join(outputs[1], name)) as b:
                assert a.read() == b.read(), name

    def test_split_depends_on_rng_seed(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        contents = []
        for seed in (1, 2):
            out = str(tmp_path / f"seed{seed}")
            cmd_run(RunConfig(edges=edges, labels=labels, output=out, rng_seed=seed))
            with open(os.path.join(out, 'node_metrics.tsv')) as f:
                contents.append(f.read())
        assert contents[0] != contents[1]

    def test_manifest(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        out = str(tmp_path / "out")
        summary = cmd_run(RunConfig(edges=edges, labels=labels, output=out))
        with open(os.path.join(out, 'manifest.json')) as f:
            manifest = json.load(f)
        assert set(manifest) == {'config', 'config_sha256', 'inputs', 'outputs', 'versions',
                                 'summary', 'created'}
        assert manifest['config']['lambda'] == 0.5
        assert manifest['config']['iterations'] == 30
        assert set(manifest['inputs']) == {'edges', 'labels'}
        assert len(manifest['inputs']['edges']['sha256']) == 64
        assert manifest['outputs']['probabilities']['path'] == 'probabilities.tsv'
        assert manifest['summary']['accuracy'] == pytest.approx(summary['accuracy'])
        assert 'numba' in manifest['versions']

    def test_better_than_uniform(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        summary = cmd_run(RunConfig(edges=edges, labels=labels, output=str(tmp_path / "out")))
        assert summary['accuracy'] > summary['uniform_baseline']

    def test_hits_by_group_file(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        out = str(tmp_path / "out")
        summary = cmd_run(RunConfig(edges=edges, labels=labels, output=out))
        with open(os.path.join(out, 'hits_by_group.tsv')) as f:
            lines = f.read().splitlines()
        assert lines[0] == "group\tpopulation\tshare\thits\trate"
        overall = lines[5].split("\t")
        assert overall[0] == 'overall'
        assert int(overall[1]) == summary['evaluated']
        assert lines[-1] == f"# denominator={summary['evaluated']} excluded=0"

    def test_tau_above_reachable_confidence(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        # a non-seed never exceeds (1 - lambda) / C + lambda = 0.625
        summary = cmd_run(RunConfig(edges=edges, labels=labels, output=str(tmp_path / "out"), tau=0.7))
        assert summary['evaluated'] == 0
        assert summary['unassigned'] > 0
        assert summary['accuracy'] == 0.0


class TestFailures:

    def test_missing_file_is_config_stage(self, tmp_path):
        cfg = RunConfig(edges=str(tmp_path / "none.tsv"), labels=str(tmp_path / "none.tsv"),
                        output=str(tmp_path / "out"))
        with pytest.raises(StageError) as ctx:
            cmd_run(cfg)
        assert ctx.value.stage == 'config'
        assert ctx.value.exit_code == 2

    def test_malformed_edges_is_ingest_stage(self, tmp_path):
        edges, labels = write_inputs(tmp_path, ["a b", "lonely"], {"a": 20, "b": 30})
        with pytest.raises(StageError) as ctx:
            cmd_run(RunConfig(edges=edges, labels=labels, output=str(tmp_path / "out")))
        assert ctx.value.stage == 'ingest'
        assert ctx.value.exit_code == 3

    def test_validation_lost_to_pruning(self, tmp_path):
        edges, labels = write_inputs(tmp_path, ["a b", "c d"], {"a": 20, "c": 30})
        with pytest.raises(StageError) as ctx:
            cmd_run(RunConfig(edges=edges, labels=labels, output=str(tmp_path / "out")))
        assert ctx.value.stage == 'evaluate'
        assert ctx.value.exit_code == 3

    def test_unexpected_errors_are_internal(self):
        with pytest.raises(StageError) as ctx:
            with pipeline_stage('propagate'):
                raise KeyError('boom')
        assert ctx.value.stage == 'propagate'
        assert ctx.value.exit_code == 4
        assert isinstance(ctx.value.cause, KeyError)

    def test_stage_errors_pass_through(self):
        inner = StageError('ingest', ConfigError('bad'))
        with pytest.raises(StageError) as ctx:
            with pipeline_stage('outer'):
                raise inner
        assert ctx.value is inner

    def test_thread_environment(self, monkeypatch):
        monkeypatch.setattr(pipeline, 'NUM_THREADS', 'many')
        with pytest.raises(ConfigError):
            configure_threads(None)
        monkeypatch.setattr(pipeline, 'NUM_THREADS', '')
        configure_threads(None)


class TestSweep:

    def test_tau_monotone(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        out = str(tmp_path / "out")
        rows = cmd_sweep(RunConfig(edges=edges, labels=labels, output=out), 'tau', '0,0.4,0.6,0.9')
        assigned = [row.assigned for row in rows]
        assert assigned == sorted(assigned, reverse=True)
        assert len({row.denominator for row in rows}) == 1
        table = read_rows(os.path.join(out, 'sweep_tau.tsv'))
        assert table[0] == ['tau', 'accuracy', 'assigned', 'denominator']
        assert [r[0] for r in table[1:]] == ['0', '0.4', '0.6', '0.9']

    def test_iterations(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        out = str(tmp_path / "out")
        rows = cmd_sweep(RunConfig(edges=edges, labels=labels, output=out), 't_end', [0, 10])
        assert os.path.isfile(os.path.join(out, 'sweep_iterations.tsv'))
        assert rows[0].value == 0

    def test_fractional_iterations_rejected(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        out = str(tmp_path / "out")
        with pytest.raises(ConfigError):
            cmd_sweep(RunConfig(edges=edges, labels=labels, output=out), 'iterations', '2.5,5')
        assert not os.path.exists(os.path.join(out, 'sweep_iterations.tsv'))

    def test_needs_two_values(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        with pytest.raises(ConfigError):
            cmd_sweep(RunConfig(edges=edges, labels=labels, output=str(tmp_path)), 'lambda', '0.5')

    def test_unknown_parameter(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_sweep(RunConfig(output=str(tmp_path)), 'seed_fraction', '0.5,0.6')

    def test_bad_values(self):
        assert parse_values("0.1, 0.2,") == [0.1, 0.2]
        with pytest.raises(ConfigError):
            parse_values("0.1,high")

    def test_out_of_range_value(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        with pytest.raises(StageError) as ctx:
            cmd_sweep(RunConfig(edges=edges, labels=labels, output=str(tmp_path)), 'lambda', '0.5,1.5')
        assert ctx.value.exit_code == 2


class TestHomophily:

    @pytest.fixture
    def toy(self, tmp_path):
        # d has no age, so only a-b and b-c count
        edges, labels = write_inputs(tmp_path / "in", ["a b", "b c", "c d"], {"a": 30, "b": 30, "c": 32})
        return RunConfig(edges=edges, labels=labels, output=str(tmp_path / "out"), shuffles=3)

    def test_exact_tables(self, toy):
        summary = cmd_homophily(toy)
        out = toy.output
        assert read_rows(os.path.join(out, 'communication_matrix.tsv')) == [
            ['age', '30', '31', '32'],
            ['30', '2', '0', '1'],
            ['31', '0', '0', '0'],
            ['32', '1', '0', '0'],
        ]
        assert read_rows(os.path.join(out, 'null_matrix.tsv')) == [
            ['age', '30', '31', '32'],
            ['30', '1.777778', '0.000000', '0.888889'],
            ['31', '0.000000', '0.000000', '0.000000'],
            ['32', '0.888889', '0.000000', '0.444444'],
        ]
        assert read_rows(os.path.join(out, 'gap_profile.tsv')) == [
            ['delta', 'links'], ['0', '1'], ['1', '0'], ['2', '1']]
        regression = dict(read_rows(os.path.join(out, 'regression.tsv'))[1:])
        assert regression['r'] == '-0.333333'
        assert regression['slope'] == '-0.333333'
        assert regression['intercept'] == '40.666667'
        assert regression['n_pairs'] == '4'
        assert regression['labeled_edges'] == '2'
        assert regression['shuffles'] == '3'
        assert regression['shuffled_labels'] == '0'
        assert summary['labeled_edges'] == 2

    def test_needs_ages(self, toy):
        with pytest.raises(StageError) as ctx:
            cmd_homophily(toy.updated({'label_mode': 'category'}))
        assert ctx.value.exit_code == 2

    def test_shuffled_labels_flag(self, synthetic_inputs, tmp_path):
        edges, labels = synthetic_inputs
        cfg = RunConfig(edges=edges, labels=labels, output=str(tmp_path / "out"), shuffles=5)
        plain = cmd_homophily(cfg)
        shuffled = cmd_homophily(cfg.updated({'shuffle_labels': True}))
        assert shuffled['r'] < plain['r']


class TestMetricsCommand:

    def test_path(self, path_inputs, tmp_path):
        edges, labels = path_inputs
        out = str(tmp_path / "out")
        populations = cmd_metrics(RunConfig(edges=edges, labels=labels, output=out))
        rows = read_rows(os.path.join(out, 'node_metrics.tsv'))
        assert rows[0] == ['node_id', 'sin', 'dts', 'degree']
        assert sorted(int(row[2]) for row in rows[1:]) == [0, 1, 2, 3, 4, 5]
        dts = {row.label: row.nodes for row in populations['dts']}
        assert dts == {'0': 1, '1': 1, '2': 1, '3': 1, '4': 1, '5': 1, 'unreachable': 0}
        degree = {row.label: row.nodes for row in populations['degree']}
        assert degree['1-2'] == 6
        assert os.path.isfile(os.path.join(out, 'population_by_sin.tsv'))
        assert not os.path.exists(os.path.join(out, 'probabilities.tsv'))


class TestConfig:

    def test_precedence(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("# run settings\nlambda = 0.3\niterations = 4\nmasked = no\n")
        cfg = load_config(RunConfig, str(path), {'lambda': 0.7, 'iterations': None})
        assert cfg.lam == 0.7
        assert cfg.t_end == 4
        assert cfg.masked is False
        assert cfg.seed_fraction == 0.75

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("lamda = 0.3\n")
        with pytest.raises(ConfigError):
            load_config(RunConfig, str(path))

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("lambda 0.3\n")
        with pytest.raises(ConfigError):
            load_config(RunConfig, str(path))

    def test_bins(self):
        cfg = RunConfig(degree_bins="1-5,6+")
        assert [b.label for b in cfg.bins('degree')] == ["1-5", "6+"]
        assert cfg.bins('sin') is None
        assert [b.label for b in cfg.joint_columns] == ["1", "2", "3"]

    def test_validate_ranges(self, tmp_path):
        for overrides in ({'seed_fraction': 1.0}, {'prune_cap': 0}, {'format': 'csv'},
                          {'pps_scope': 'some'}, {'label_mode': 'decade'}, {'age_bins': [50, 25]},
                          {'threads': 0}, {'shuffles': 0}):
            with pytest.raises(ConfigError):
                RunConfig(output=str(tmp_path), **overrides).validate(require_inputs=False)


class TestCommandLine:

    def test_run_exit_zero(self, path_inputs, tmp_path):
        edges, labels = path_inputs
        out = str(tmp_path / "out")
        assert cli.main(['run', '--edges', edges, '--labels', labels, '-o', out, '--iterations', '2']) == 0
        assert os.path.isfile(os.path.join(out, 'manifest.json'))

    def test_missing_file_exit_two(self, tmp_path):
        missing = str(tmp_path / "missing.tsv")
        assert cli.main(['run', '--edges', missing, '--labels', missing, '-o', str(tmp_path)]) == 2

    def test_bad_parameter_exit_two(self, path_inputs, tmp_path):
        edges, labels = path_inputs
        assert cli.main(['run', '--edges', edges, '--labels', labels, '-o', str(tmp_path),
                         '--lambda', '2']) == 2

    def test_bad_data_exit_three(self, tmp_path):
        edges, labels = write_inputs(tmp_path / "in", ["a b 0"], {"a": 20, "b": 30})
        assert cli.main(['run', '--edges', edges, '--labels', labels, '-o', str(tmp_path / "out")]) == 3

    def test_sweep_single_value_exit_two(self, path_inputs, tmp_path):
        edges, labels = path_inputs
        assert cli.main(['sweep', '--edges', edges, '--labels', labels, '-o', str(tmp_path),
                         '--param', 'tau', '--values', '0.5']) == 2

    def test_config_file_and_flags(self, path_inputs, tmp_path):
        edges, labels = path_inputs
        conf = tmp_path / "run.conf"
        conf.write_text(f"edges = {edges}\nlabels = {labels}\nlambda = 0.3\niterations = 4\n")
        out = str(tmp_path / "out")
        assert cli.main(['run', '--config', str(conf), '-o', out, '--iterations', '6', '--unmasked']) == 0
        with open(os.path.join(out, 'manifest.json')) as f:
            config = json.load(f)['config']
        assert config['lambda'] == 0.3
        assert config['iterations'] == 6
        assert config['masked'] is False

    def test_synth_then_run(self, tmp_path):
        synth_out = str(tmp_path / "synth")
        assert cli.main(['synth', '-n', '800', '--client-fraction', '0.6', '-o', synth_out]) == 0
        assert sorted(os.listdir(synth_out)) == ['clients.tsv', 'edges.tsv', 'edges_clients.tsv',
                                                 'labels.tsv']
        out = str(tmp_path / "run")
        assert cli.main(['metrics', '--edges', os.path.join(synth_out, 'edges.tsv'),
                         '--labels', os.path.join(synth_out, 'labels.tsv'), '-o', out]) == 0
        assert os.path.isfile(os.path.join(out, 'node_metrics.tsv'))

    def test_run_from_synth_config(self, tmp_path):
        conf = tmp_path / "synth.conf"
        conf.write_text("n = 1200\nmean_degree = 6\n")
        out = str(tmp_path / "out")
        assert cli.main(['run', '--synth', str(conf), '-o', out]) == 0
        assert os.path.isfile(os.path.join(out, 'synth', 'edges.tsv'))
        with open(os.path.join(out, 'manifest.json')) as f:
            manifest = json.load(f)
        assert manifest['inputs']['edges']['path'].endswith(os.path.join('synth', 'edges.tsv'))

    def test_synth_follows_run_seed(self, tmp_path):
        conf = tmp_path / "synth.conf"
        # the file seed is overridden by the run seed
        conf.write_text("n = 600\nmean_degree = 4\nrng_seed = 9\n")
        edges = []
        for seed in (1, 2, 2):
            out = str(tmp_path / f"seed{seed}_{len(edges)}")
            inputs = pipeline.ingest(RunConfig(synth=str(conf), output=out, rng_seed=seed))
            with open(inputs.paths['edges']) as f:
                edges.append(f.read())
        assert edges[0] != edges[1]
        assert edges[1] == edges[2]

    def test_homophily_command(self, tmp_path):
        edges, labels = write_inputs(tmp_path / "in", ["a b", "b c", "c d"], {"a": 30, "b": 30, "c": 32})
        out = str(tmp_path / "out")
        assert cli.main(['homophily', '--edges', edges, '--labels', labels, '-o', out,
                         '--shuffles', '2', '--format', 'text']) == 0
        assert os.path.isfile(os.path.join(out, 'communication_matrix.txt'))
        assert os.path.isfile(os.path.join(out, 'regression.tsv'))
