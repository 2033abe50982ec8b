# -*- coding: utf-8 -*-

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app import constants
from app.exceptions import ConfigurationError
from app.helpers import get_normad_app, read_csv, require_positive, write_csv
from app.neuron import SpikeTrain, bins_to_spike_times, epoch_bins

"""
Training problems: seeded Poisson spike trains, the delay-ramp XOR patterns,
and the CSV raster format shared with the experiment outputs.
"""


def rng_stream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """
    Independent generator for sub-stream (stream, index) of a seed. Philox is
    counter-based, so the draws do not depend on the platform or on how many
    other streams were used.
    """
    if seed < 0:
        raise ConfigurationError("seed", f"must be >= 0, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream), int(index)])))


def poisson_train(rate: float, epoch: float, rng: np.random.Generator, dt: float = constants.SIM_DT) -> SpikeTrain:
    """
    Homogeneous Poisson train from exponential inter-arrival times, kept within
    [0, epoch) and snapped down to the grid. Spikes falling into an occupied
    bin are dropped.

    Args:
        rate (float): Rate in spikes/s.
        epoch (float): Epoch length (ms).
        rng (np.random.Generator): Stream to draw from.
        dt (float): Grid step (ms).

    Returns:
        SpikeTrain: Grid-aligned spike times.
    """
    require_positive("rate", rate, allow_zero=True)
    n_bins = epoch_bins(epoch, dt)
    if rate == 0.0:
        return SpikeTrain()
    mean_isi = 1000.0 / rate
    chunk = max(16, int(2 * epoch / mean_isi) + 16)
    times = np.cumsum(rng.exponential(mean_isi, size=chunk))
    while times[-1] < epoch:
        times = np.concatenate([times, times[-1] + np.cumsum(rng.exponential(mean_isi, size=chunk))])
    bins = np.floor(times[times < epoch] / dt).astype(np.int64)
    bins = np.unique(bins[bins < n_bins])
    return SpikeTrain.from_bins(bins, dt)


@dataclass(frozen=True)
class XorPattern:
    """
    One row of the XOR truth table in delay-ramp encoding: a bias population
    that always fires, one population per input bit that fires only when the bit
    is set, and a single desired spike (early for 1, late for 0).
    """

    label: tuple
    inputs: tuple
    desired: SpikeTrain
    epoch: float = constants.XOR_EPOCH

    @property
    def target(self) -> int:
        return self.label[0] ^ self.label[1]

    @property
    def name(self) -> str:
        return f"{self.label[0]}{self.label[1]}"

    def to_pattern(self):
        from app.normad import Pattern
        return Pattern(inputs=self.inputs, desired=self.desired, epoch=self.epoch, name=self.name)


def _ramp(onset: float, size: int, step: float, dt: float) -> list:
    bins = np.rint((onset + step * np.arange(size)) / dt).astype(np.int64)
    return [SpikeTrain(bins_to_spike_times([b], dt)) for b in bins]


def xor_dataset(population_size: int = constants.XOR_POPULATION_SIZE, epoch: float = constants.XOR_EPOCH,
                dt: float = constants.SIM_DT) -> list:
    """
    The four XOR patterns, ordered (0,0), (0,1), (1,0), (1,1). Neuron k of the
    bias population fires at k ms, neuron k of an active input population at
    onset + k ms.

    Returns:
        list: Four XorPattern objects over 3 * population_size input neurons.
    """
    if population_size < 1:
        raise ConfigurationError("population_size", f"must be >= 1, got {population_size}")
    last = constants.XOR_INPUT_ONSET + constants.XOR_RAMP_STEP * (population_size - 1)
    if epoch <= max(last, constants.XOR_LATE_SPIKE):
        raise ConfigurationError("EXPERIMENT_EPOCH", f"the XOR epoch must exceed {max(last, constants.XOR_LATE_SPIKE)} ms")
    bias = _ramp(0.0, population_size, constants.XOR_RAMP_STEP, dt)
    active = _ramp(constants.XOR_INPUT_ONSET, population_size, constants.XOR_RAMP_STEP, dt)
    silent = [SpikeTrain()] * population_size
    patterns = []
    for a in (0, 1):
        for b in (0, 1):
            inputs = tuple(bias + (active if a else silent) + (active if b else silent))
            spike = constants.XOR_EARLY_SPIKE if a ^ b else constants.XOR_LATE_SPIKE
            patterns.append(XorPattern(label=(a, b), inputs=inputs, desired=SpikeTrain((spike,)), epoch=epoch))
    return patterns


@dataclass(frozen=True)
class ProblemSpec:
    n_inputs: int = 100
    input_rate: float = constants.PROBLEM_INPUT_RATE
    output_rate: float = constants.PROBLEM_OUTPUT_RATE
    epoch: float = constants.PROBLEM_EPOCH
    seed: int = 0
    dt: float = constants.SIM_DT

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ConfigurationError("n_inputs", f"must be >= 1, got {self.n_inputs}")
        require_positive("PROBLEM_INPUT_RATE", self.input_rate, allow_zero=True)
        require_positive("PROBLEM_OUTPUT_RATE", self.output_rate, allow_zero=True)
        require_positive("EXPERIMENT_EPOCH", self.epoch)
        if self.seed < 0:
            raise ConfigurationError("seed", f"must be >= 0, got {self.seed}")


def random_problem(spec: ProblemSpec) -> tuple:
    """
    Draw one training problem: n_inputs Poisson input trains and one desired
    Poisson train, each from its own sub-stream of the seed. An empty desired
    train is redrawn from the next sub-stream.

    Args:
        spec (ProblemSpec): Problem parameters.

    Returns:
        tuple: (inputs as a tuple of SpikeTrain, desired SpikeTrain).

    Raises:
        ConfigurationError: If no non-empty desired train was drawn within the
            resampling budget.
    """
    app = get_normad_app()
    inputs = tuple(
        poisson_train(spec.input_rate, spec.epoch, rng_stream(spec.seed, constants.RNG_STREAM_INPUTS, i), spec.dt)
        for i in range(spec.n_inputs)
    )
    if spec.output_rate == 0.0:
        return inputs, SpikeTrain()
    for attempt in range(constants.PROBLEM_MAX_RESAMPLES):
        desired = poisson_train(spec.output_rate, spec.epoch, rng_stream(spec.seed, constants.RNG_STREAM_DESIRED, attempt), spec.dt)
        if len(desired):
            if attempt:
                app.logger.debug(f"random_problem | seed {spec.seed}: desired train redrawn {attempt} times")
            return inputs, desired
    raise ConfigurationError("PROBLEM_OUTPUT_RATE", f"no desired spike in {constants.PROBLEM_MAX_RESAMPLES} draws at {spec.output_rate} spikes/s")


def write_raster(path, trains: list) -> Path:
    """
    Write spike trains as CSV rows (neuron_id, spike_time_ms), ordered by neuron
    and time. An empty raster is a header-only file.
    """
    rows = [(i, float(t)) for i, train in enumerate(trains) for t in train]
    write_csv(path, constants.RASTER_HEADER, rows)
    return Path(path)


def read_raster(path, n_neurons: int = None) -> list:
    """
    Read a raster written by `write_raster`.

    Args:
        path: CSV file.
        n_neurons (int): Number of trains to return; defaults to the highest
            neuron id plus one.

    Returns:
        list: SpikeTrain per neuron.

    Raises:
        ConfigurationError: On a wrong header or malformed rows.
    """
    header, rows = read_csv(path)
    if tuple(header) != constants.RASTER_HEADER:
        raise ConfigurationError("raster", f"{path}: expected header {constants.RASTER_HEADER}, got {header}")
    spikes = {}
    try:
        for neuron, time in rows:
            spikes.setdefault(int(neuron), []).append(float(time))
    except ValueError as err:
        raise ConfigurationError("raster", f"{path}: malformed row - {err}") from err
    if n_neurons is None:
        n_neurons = max(spikes, default=-1) + 1
    if spikes and (min(spikes) < 0 or max(spikes) >= n_neurons):
        raise ConfigurationError("raster", f"{path}: neuron ids outside [0, {n_neurons})")
    return [SpikeTrain(tuple(spikes.get(i, ()))) for i in range(n_neurons)]
