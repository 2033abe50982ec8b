import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

file = Path(__file__).resolve()
parent, root = file.parent, file.parents[1]
sys.path.append(str(root))

from app import constants
from app.config import resolve_config
from app.datagen import read_raster
from app.exceptions import ConfigurationError
from app.experiments import (
    RunReport,
    SeedResult,
    build_network,
    build_patterns,
    correlation_stats,
    cumulative_converged,
    desired_sidecar,
    emit_raster,
    run_custom,
    run_deep,
    run_xor,
)
from app.helpers import get_normad_app, read_csv, read_json
from app.network import Network, forward, load_checkpoint
from app.neuron import SpikeTrain
from app.normad import train

SMALL = {
    "EXPERIMENT_TOPOLOGY": "12,6,1",
    "EXPERIMENT_SEEDS": "0,1",
    "EXPERIMENT_EPOCH": 100.0,
    "LEARN_MAX_ITERATIONS": 3,
    "PROBLEM_INPUT_RATE": 50.0,
    "PROBLEM_OUTPUT_RATE": 30.0,
}


def setUpModule():
    get_normad_app()


def _result(seed, converged, iterations, correlations=None):
    correlations = correlations or [[0.0]]
    return SeedResult(seed=seed, converged=converged, iterations_to_convergence=iterations, patterns=["p"],
                      correlations=correlations, final_correlations=correlations[-1], checkpoint="",
                      correlation_csv="")


class TestHelpers(unittest.TestCase):

    def test_cumulative_converged(self):
        results = [_result(0, True, 0), _result(1, True, 2), _result(2, False, 4)]
        self.assertEqual(cumulative_converged(results, 3), [1, 1, 2, 2])
        self.assertEqual(cumulative_converged([], 2), [0, 0, 0])

    def test_correlation_stats_carries_converged_runs(self):
        results = [
            _result(0, True, 1, [[0.5, 0.2], [1.0, 1.0]]),
            _result(1, False, 4, [[0.1, 0.0], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8]]),
        ]
        mean, std = correlation_stats(results, 3)
        self.assertEqual(mean.shape, (4, 2))
        np.testing.assert_allclose(mean[0], [0.3, 0.1])
        np.testing.assert_allclose(mean[3], [0.85, 0.9])
        np.testing.assert_allclose(std[3], [0.15, 0.1])
        np.testing.assert_allclose(std[0], [0.2, 0.1])

    def test_desired_sidecar(self):
        self.assertEqual(desired_sidecar(Path("out/raster_3_01.csv")), Path("out/raster_3_01.desired.csv"))

    def test_build_patterns(self):
        xor = build_patterns(resolve_config("xor"), 0)
        self.assertEqual([p.name for p in xor], ["00", "01", "10", "11"])
        cfg = resolve_config("custom", overrides=SMALL)
        first, again, other = build_patterns(cfg, 0), build_patterns(cfg, 0), build_patterns(cfg, 1)
        self.assertEqual(len(first), 1)
        self.assertEqual(len(first[0].inputs), 12)
        self.assertEqual(first[0].inputs, again[0].inputs)
        self.assertNotEqual(first[0].inputs, other[0].inputs)

    def test_build_network(self):
        cfg = resolve_config("xor")
        net = build_network(cfg, 5)
        self.assertEqual(net.layer_sizes, [54, 54, 1])
        self.assertFalse(np.any(net.weights[1]))
        np.testing.assert_array_equal(net.weights[0], build_network(cfg, 5).weights[0])

    def test_runner_checks_experiment(self):
        cfg = resolve_config("custom", overrides=SMALL)
        with self.assertRaises(ConfigurationError):
            run_xor(cfg)
        with self.assertRaises(ConfigurationError):
            run_deep(cfg)


class TestDefaultCalibration(unittest.TestCase):

    def test_xor_hidden_layer_fires_before_every_desired_spike(self):
        cfg = resolve_config("xor")
        patterns = build_patterns(cfg, 0)
        for seed in cfg.seeds:
            net = build_network(cfg, seed)
            for pattern in patterns:
                desired_bin = int(pattern.desired.to_bins(cfg.dt)[0])
                record = forward(net, pattern.inputs, pattern.epoch)
                firsts = [int(t.to_bins(cfg.dt)[0]) for t in record.layers[0].spike_trains if len(t)]
                self.assertTrue(firsts, f"seed {seed}, pattern {pattern.name}: silent hidden layer")
                self.assertLessEqual(min(firsts), desired_bin - 2, f"seed {seed}, pattern {pattern.name}")

    def test_deep_hidden_layers_survive_training(self):
        cfg = resolve_config("deep", overrides={"EXPERIMENT_EPOCH": 200.0, "LEARN_MAX_ITERATIONS": 10})
        for seed in (0, 1):
            patterns = build_patterns(cfg, seed)
            net = build_network(cfg, seed)
            before = forward(net, patterns[0].inputs, cfg.epoch)
            report = train(net, patterns, cfg.learn)
            after = forward(report.network, patterns[0].inputs, cfg.epoch)
            for layer in range(cfg.n_layers - 1):
                initial = before.layers[layer].spike_count
                self.assertGreater(initial, 0)
                self.assertGreaterEqual(after.layers[layer].spike_count, initial / 4, f"seed {seed}, layer {layer}")


class TestEmitRaster(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_silent_output_is_header_only(self):
        record = forward(Network([3, 1]), [SpikeTrain((1.0,))] * 3, 20.0)
        written = emit_raster(record, self.dir / "r.csv", desired=SpikeTrain((10.0,)))
        self.assertEqual(written, [self.dir / "r.csv", self.dir / "r.desired.csv"])
        self.assertEqual((self.dir / "r.csv").read_text(), "neuron_id,spike_time_ms\n")
        self.assertEqual(read_raster(self.dir / "r.desired.csv"), [SpikeTrain((10.0,))])

    def test_hidden_layer(self):
        net = Network([2, 3, 1], weights=[np.full((3, 2), 20.0), np.zeros((1, 3))])
        record = forward(net, [SpikeTrain((1.0,)), SpikeTrain((2.0,))], 30.0)
        emit_raster(record, self.dir / "h.csv", layer=0)
        trains = read_raster(self.dir / "h.csv", n_neurons=3)
        self.assertEqual(trains, record.layers[0].spike_trains)
        self.assertTrue(all(len(t) > 0 for t in trains))
        self.assertFalse((self.dir / "h.desired.csv").exists())


class TestRunExperiment(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_custom_run_outputs(self):
        cfg = resolve_config("custom", overrides=SMALL)
        report = run_custom(cfg, self.dir / "a")
        out = self.dir / "a"
        self.assertEqual([r.seed for r in report.results], [0, 1])
        self.assertEqual(len(report.cumulative_converged), 4)
        for result in report.results:
            self.assertIn(result.iterations_to_convergence, range(5))
            self.assertEqual(result.converged, result.iterations_to_convergence <= 3)
            header, rows = read_csv(out / result.correlation_csv)
            self.assertEqual(header, ["iteration", "C_problem"])
            self.assertEqual(len(rows), len(result.correlations))
            self.assertTrue(all(0.0 <= float(row[1]) <= 1.0 for row in rows))
            self.assertEqual(read_csv(out / result.trajectory_csv)[0], ["iteration", "pattern", "spike_time_ms"])
            for raster in result.rasters:
                self.assertTrue((out / raster).is_file())
                self.assertTrue(desired_sidecar(out / raster).is_file())
            net = load_checkpoint(out / result.checkpoint, dt=cfg.dt)
            self.assertEqual(net.layer_sizes, [12, 6, 1])

        on_disk = RunReport.read(out / constants.REPORT_FILENAME)
        self.assertEqual(on_disk.to_dict(), read_json(out / constants.REPORT_FILENAME))
        self.assertEqual(on_disk.n_converged, report.n_converged)
        self.assertEqual(read_csv(out / "convergence.csv")[0], ["iteration", "converged"])
        header, rows = read_csv(out / "correlation_stats.csv")
        self.assertEqual(header, ["iteration", "mean_C_problem", "std_C_problem"])
        self.assertEqual([int(row[0]) for row in rows], [0, 1, 2, 3])
        self.assertTrue(all(0.0 <= float(row[1]) <= 1.0 and float(row[2]) >= 0.0 for row in rows))

    def test_reproducible(self):
        cfg = resolve_config("custom", overrides=SMALL)
        first = run_custom(cfg, self.dir / "a")
        second = run_custom(cfg, self.dir / "b")
        a, b = first.to_dict(), second.to_dict()
        a.pop("metadata")
        b.pop("metadata")
        self.assertEqual(a, b)
        for result in first.results:
            for name in (result.checkpoint, result.correlation_csv, result.trajectory_csv, *result.rasters):
                self.assertEqual((self.dir / "a" / name).read_bytes(), (self.dir / "b" / name).read_bytes())

    def test_worker_pool_matches_serial(self):
        serial = run_custom(resolve_config("custom", overrides=SMALL), self.dir / "a")
        pooled = run_custom(resolve_config("custom", overrides={**SMALL, "RUN_WORKERS": 2}), self.dir / "b")
        self.assertEqual([r.correlations for r in serial.results], [r.correlations for r in pooled.results])

    def test_ablation_shares_initial_dynamics(self):
        plastic = run_custom(resolve_config("custom", overrides=SMALL), self.dir / "a")
        frozen = run_custom(resolve_config("custom", overrides={**SMALL, "RUN_ABLATION": "output-only"}), self.dir / "b")
        for a, b in zip(plastic.results, frozen.results):
            self.assertEqual(a.correlations[0], b.correlations[0])
        self.assertEqual(list(frozen.config["learn"]["trainable"]), [False, True])

    def test_zero_iterations_keeps_initial_network(self):
        cfg = resolve_config("custom", overrides={**SMALL, "LEARN_MAX_ITERATIONS": 0, "EXPERIMENT_SEEDS": "4"})
        report = run_custom(cfg, self.dir)
        result = report.results[0]
        self.assertEqual(len(result.correlations), 1)
        self.assertIn(result.iterations_to_convergence, (0, 1))
        restored = load_checkpoint(self.dir / result.checkpoint)
        for w_saved, w_initial in zip(restored.weights, build_network(cfg, 4).weights):
            np.testing.assert_array_equal(w_saved, w_initial)

    def test_xor_run(self):
        cfg = resolve_config("xor", overrides={"EXPERIMENT_SEEDS": "0", "LEARN_MAX_ITERATIONS": 2})
        report = run_xor(cfg, self.dir)
        result = report.results[0]
        self.assertEqual(result.patterns, ["00", "01", "10", "11"])
        self.assertEqual(result.rasters, [f"raster_0_{name}.csv" for name in result.patterns])
        self.assertEqual(read_raster(self.dir / "raster_0_01.desired.csv"), [SpikeTrain((10.0,))])
        self.assertEqual(len(result.final_correlations), 4)
        matrix = np.array(result.final_correlation_matrix)
        self.assertEqual(matrix.shape, (4, 4))
        np.testing.assert_allclose(np.diag(matrix), result.final_correlations, atol=1e-9)
        header = read_csv(self.dir / "correlation_stats.csv")[0]
        self.assertEqual(header[:3], ["iteration", "mean_C_00", "std_C_00"])
        self.assertEqual(len(header), 9)
        self.assertEqual(report.config["topology"], [54, 54, 1])
        self.assertEqual(report.criterion, 1.0)


if __name__ == "__main__":
    unittest.main()
