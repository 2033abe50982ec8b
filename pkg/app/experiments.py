# -*- coding: utf-8 -*-

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from app import constants
from app.config import ExperimentConfig
from app.datagen import ProblemSpec, random_problem, write_raster, xor_dataset
from app.exceptions import ConfigurationError
from app.helpers import get_normad_app, read_json, write_csv, write_json
from app.metrics import correlation_matrix
from app.network import ForwardRecord, Network, forward, init_weights, save_checkpoint
from app.normad import Pattern, train

"""
Experiment runner: one training run per seed (XOR) or per seeded problem (deep
and custom), the report that gathers them and the files each run emits.
"""


@dataclass
class SeedResult:
    """
    Outcome of one seed. File names are relative to the run's output
    directory.
    """

    seed: int
    converged: bool
    iterations_to_convergence: int
    patterns: list
    correlations: list
    final_correlations: list
    checkpoint: str
    correlation_csv: str
    rasters: list = field(default_factory=list)
    trajectory_csv: str = ""
    final_correlation_matrix: list = field(default_factory=list)


@dataclass
class RunReport:
    experiment: str
    ablation: str
    criterion: float
    max_iterations: int
    results: list
    cumulative_converged: list
    config: dict
    metadata: dict = field(default_factory=dict)

    @property
    def n_converged(self) -> int:
        return sum(1 for r in self.results if r.converged)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        values = dict(data)
        values["results"] = [SeedResult(**r) for r in data["results"]]
        return cls(**values)

    def write(self, path) -> Path:
        path = Path(path)
        write_json(path, self.to_dict())
        return path

    @classmethod
    def read(cls, path) -> "RunReport":
        return cls.from_dict(read_json(path))


def build_patterns(cfg: ExperimentConfig, seed: int) -> list:
    """
    Training patterns of one run: the four XOR patterns, or one Poisson problem
    drawn from `seed`.
    """
    if cfg.dataset == "xor":
        return [p.to_pattern() for p in xor_dataset(cfg.topology[0] // 3, cfg.epoch, cfg.dt)]
    spec = ProblemSpec(
        n_inputs=cfg.topology[0],
        input_rate=cfg.input_rate,
        output_rate=cfg.output_rate,
        epoch=cfg.epoch,
        seed=seed,
        dt=cfg.dt,
    )
    inputs, desired = random_problem(spec)
    return [Pattern(inputs=inputs, desired=desired, epoch=cfg.epoch, name="problem")]


def build_network(cfg: ExperimentConfig, seed: int) -> Network:
    net = Network(cfg.topology, lif=cfg.lif, kernels=cfg.kernels, weight_scale=cfg.weight_scale, dt=cfg.dt)
    return init_weights(net, cfg.init, seed)


def emit_raster(record: ForwardRecord, path, desired=None, layer: int = -1) -> list:
    """
    Write the spike trains of one layer of a forward pass (the output by
    default) as a raster CSV, plus a `.desired.csv` sidecar holding the desired
    train when one is given.

    Args:
        record (ForwardRecord): Forward pass.
        path: Raster file, ending in `.csv`.
        desired (SpikeTrain): Optional desired output train.
        layer (int): Index into the record's layers.

    Returns:
        list: Paths of the written files.
    """
    path = Path(path)
    written = [write_raster(path, record.layers[layer].spike_trains)]
    if desired is not None:
        written.append(write_raster(desired_sidecar(path), [desired]))
    return written


def desired_sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.desired.csv")


def _run_seed(cfg: ExperimentConfig, seed: int, out_dir: str) -> SeedResult:
    app = get_normad_app()
    out = Path(out_dir)
    patterns = build_patterns(cfg, seed)
    net = build_network(cfg, seed)
    report = train(net, patterns, cfg.learn)

    correlation_csv = f"correlation_{seed}.csv"
    write_csv(
        out / correlation_csv,
        ["iteration"] + [f"C_{p.name}" for p in patterns],
        [[k] + row for k, row in enumerate(report.correlations)],
    )
    trajectory_csv = f"raster_{seed}_trajectory.csv"
    write_csv(
        out / trajectory_csv,
        ["iteration", "pattern", "spike_time_ms"],
        [
            [k, patterns[j].name, t]
            for k, per_pattern in enumerate(report.output_spikes)
            for j, times in enumerate(per_pattern)
            for t in times
        ],
    )
    rasters, outputs = [], []
    for pattern in patterns:
        record = forward(report.network, pattern.inputs, pattern.epoch)
        outputs.append(record.output_spikes)
        raster = f"raster_{seed}_{pattern.name}.csv"
        emit_raster(record, out / raster, desired=pattern.desired)
        rasters.append(raster)
    checkpoint = f"checkpoint_{seed}.bin"
    save_checkpoint(report.network, out / checkpoint, seed=seed)

    if report.converged:
        app.logger.info(f"run | seed {seed}: converged after {report.iterations_to_convergence} iterations")
    else:
        app.logger.info(f"run | seed {seed}: not converged within {cfg.learn.max_iterations} iterations")
    return SeedResult(
        seed=seed,
        converged=report.converged,
        iterations_to_convergence=report.iterations_to_convergence,
        patterns=[p.name for p in patterns],
        correlations=report.correlations,
        final_correlations=report.correlations[-1],
        checkpoint=checkpoint,
        correlation_csv=correlation_csv,
        rasters=rasters,
        trajectory_csv=trajectory_csv,
        final_correlation_matrix=correlation_matrix(
            [p.desired for p in patterns], outputs, cfg.kernels, cfg.dt, cfg.epoch
        ).tolist(),
    )


def cumulative_converged(results: list, max_iterations: int) -> list:
    """
    Number of runs converged by each iteration 0..max_iterations.
    """
    curve = [0] * (max_iterations + 1)
    for result in results:
        if result.converged:
            for k in range(result.iterations_to_convergence, max_iterations + 1):
                curve[k] += 1
    return curve


def correlation_stats(results: list, max_iterations: int) -> tuple:
    """
    Per-pattern mean and standard deviation of C across runs at each iteration
    0..max_iterations. A run that stopped early keeps its last row.

    Returns:
        tuple: (mean, std), each of shape (max_iterations + 1, n_patterns).
    """
    padded = []
    for result in results:
        rows = np.asarray(result.correlations, dtype=float)[: max_iterations + 1]
        tail = np.repeat(rows[-1:], max_iterations + 1 - len(rows), axis=0)
        padded.append(np.vstack([rows, tail]))
    stacked = np.stack(padded)
    return stacked.mean(axis=0), stacked.std(axis=0)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    """
    Train one network per seed, write every run's files and `report.json` into
    the output directory, and return the report. Seeds run in a process pool
    when more than one worker is configured; results are ordered by seed.

    Args:
        cfg (ExperimentConfig): Resolved configuration.
        out_dir: Output directory; defaults to `cfg.out_dir`.

    Returns:
        RunReport: The assembled report.

    Raises:
        OSError: If the output directory cannot be created or written.
    """
    app = get_normad_app()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    app.logger.info(
        f"run | {cfg.experiment}: topology {cfg.topology}, ablation {cfg.ablation}, "
        f"{len(cfg.seeds)} seed(s), up to {cfg.learn.max_iterations} iterations"
    )
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_seed, cfg, seed, str(out)) for seed in cfg.seeds]
            results = [f.result() for f in futures]
    else:
        results = [_run_seed(cfg, seed, str(out)) for seed in cfg.seeds]
    results.sort(key=lambda r: r.seed)

    report = RunReport(
        experiment=cfg.experiment,
        ablation=cfg.ablation,
        criterion=cfg.learn.convergence_c,
        max_iterations=cfg.learn.max_iterations,
        results=results,
        cumulative_converged=cumulative_converged(results, cfg.learn.max_iterations),
        config=cfg.to_dict(),
        metadata={"created": datetime.now(timezone.utc).isoformat(), "rng": constants.RNG_ALGORITHM},
    )
    write_csv(out / "convergence.csv", ["iteration", "converged"], enumerate(report.cumulative_converged))
    mean, std = correlation_stats(results, cfg.learn.max_iterations)
    names = results[0].patterns
    write_csv(
        out / "correlation_stats.csv",
        ["iteration"] + [f"{stat}_C_{name}" for name in names for stat in ("mean", "std")],
        [[k] + [float(v) for pair in zip(m, s) for v in pair] for k, (m, s) in enumerate(zip(mean, std))],
    )
    path = report.write(out / constants.REPORT_FILENAME)
    app.logger.info(f"run | {cfg.experiment}: {report.n_converged}/{len(results)} converged, report written to {path}")
    return report


def _require_experiment(cfg: ExperimentConfig, name: str) -> None:
    if cfg.experiment != name:
        raise ConfigurationError("experiment", f"expected a {name} configuration, got {cfg.experiment!r}")


def run_xor(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    """
    XOR on a 54 -> hidden -> 1 network, converged when every pattern reaches
    the criterion (C = 1.0 by default).
    """
    _require_experiment(cfg, "xor")
    return run_experiment(cfg, out_dir)


def run_deep(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    """
    One seeded Poisson problem per seed on a multi-layer network, converged at
    C >= 0.98 by default.
    """
    _require_experiment(cfg, "deep")
    return run_experiment(cfg, out_dir)


def run_custom(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    _require_experiment(cfg, "custom")
    return run_experiment(cfg, out_dir)
