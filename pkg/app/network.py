# -*- coding: utf-8 -*-

import json
import math
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from app import constants
from app.exceptions import CheckpointError, ConfigurationError, DimensionError
from app.helpers import get_normad_app, require_positive
from app.kernels import KernelParams, TimeSeries
from app.neuron import (
    LifParams,
    SpikeTrain,
    compute_c,
    compute_d_hat_from_spikes,
    epoch_bins,
    simulate_layer,
)

"""
Fully connected feedforward network N_0 -> N_1 -> ... -> 1, its forward pass,
weight initialization and the checkpoint codec.
"""

INIT_SCHEMES = ("zeros", "gaussian-excinh", "uniform-excinh")


@dataclass
class Network:
    """
    Layer sizes [N_0, ..., N_L] and weight matrices W_l of shape (N_l, N_{l-1}).
    Weights are in arbitrary units; `weight_scale` (pA per unit) turns them into
    synaptic current.
    """

    layer_sizes: list
    weights: list = None
    lif: LifParams = field(default_factory=LifParams)
    kernels: KernelParams = field(default_factory=KernelParams)
    weight_scale: float = constants.NETWORK_WEIGHT_SCALE
    dt: float = constants.SIM_DT

    def __post_init__(self):
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ConfigurationError("topology", f"need at least two positive layer sizes, got {self.layer_sizes}")
        if self.layer_sizes[-1] != 1:
            raise ConfigurationError("topology", f"the output layer must hold exactly one neuron, got {self.layer_sizes[-1]}")
        require_positive("weight_scale", self.weight_scale)
        require_positive("dt", self.dt)
        if not math.isclose(self.lif.tau_l, self.kernels.tau_l, rel_tol=1e-9):
            raise ConfigurationError(
                "kernels.tau_l", f"must equal lif.cm / lif.g_l ({self.kernels.tau_l} != {self.lif.tau_l})"
            )
        if self.weights is None:
            self.weights = [np.zeros(shape) for shape in self.shapes]
        self.weights = [np.array(w, dtype=np.float64) for w in self.weights]
        if len(self.weights) != self.n_layers:
            raise DimensionError(f"Network | {len(self.weights)} weight matrices for {self.n_layers} layers")
        for l, (w, shape) in enumerate(zip(self.weights, self.shapes), start=1):
            if w.shape != shape:
                raise DimensionError(f"Network | W_{l} has shape {w.shape}, expected {shape}")
            if not np.all(np.isfinite(w)):
                raise ConfigurationError(f"weights[{l}]", "all weights must be finite")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def shapes(self) -> list:
        return [(self.layer_sizes[l], self.layer_sizes[l - 1]) for l in range(1, len(self.layer_sizes))]

    def copy(self) -> "Network":
        return replace(self, layer_sizes=list(self.layer_sizes), weights=[w.copy() for w in self.weights])


@dataclass(frozen=True)
class InitScheme:
    """
    Per-layer initialization. `gaussian-excinh` draws magnitudes |N(mu, sigma)|,
    `uniform-excinh` draws U(0, w_max); in both a presynaptic neuron is wholly
    excitatory with probability `excitatory_fraction`, else inhibitory.
    """

    name: str = "zeros"
    mu: float = constants.INIT_MU
    sigma: float = constants.INIT_SIGMA
    w_max: float = constants.INIT_W_MAX
    excitatory_fraction: float = constants.INIT_EXCITATORY_FRACTION

    def __post_init__(self):
        if self.name not in INIT_SCHEMES:
            raise ConfigurationError("init.scheme", f"unknown scheme {self.name!r}; expected one of {INIT_SCHEMES}")
        require_positive("init.sigma", self.sigma, allow_zero=True)
        require_positive("init.w_max", self.w_max, allow_zero=True)
        if not 0.0 <= self.excitatory_fraction <= 1.0:
            raise ConfigurationError("init.excitatory_fraction", f"must lie in [0, 1], got {self.excitatory_fraction}")


@dataclass(frozen=True)
class EncodedInputs:
    """
    Signals derived from the input layer's spike trains. They do not depend on
    the weights, so a training loop computes them once per pattern.
    """

    trains: tuple
    c: TimeSeries
    d_hat: TimeSeries


@dataclass
class LayerRecord:
    """
    Signals of layer l captured during a forward pass: the synaptic input signals
    from layer l-1, their h_hat-filtered versions (mV per weight unit) and the
    trace of every neuron.
    """

    c_in: TimeSeries
    d_hat: TimeSeries
    traces: list

    @property
    def spike_trains(self) -> list:
        return [trace.spikes for trace in self.traces]

    @property
    def spike_count(self) -> int:
        return sum(len(trace.spikes) for trace in self.traces)


@dataclass
class ForwardRecord:
    layers: list
    epoch: float

    @property
    def output_spikes(self) -> SpikeTrain:
        return self.layers[-1].traces[0].spikes

    @property
    def dt(self) -> float:
        return self.layers[0].c_in.dt

    @property
    def n_bins(self) -> int:
        return self.layers[0].c_in.n_bins


def encode_inputs(net: Network, inputs: list, epoch: float) -> EncodedInputs:
    """
    Compute the input layer's synaptic signals for `forward`.

    Raises:
        DimensionError: If the number of trains differs from N_0.
    """
    if len(inputs) != net.layer_sizes[0]:
        raise DimensionError(f"encode_inputs | {len(inputs)} input trains for N_0 = {net.layer_sizes[0]}")
    c = compute_c(inputs, net.kernels, net.dt, epoch)
    d_hat = compute_d_hat_from_spikes(inputs, net.kernels, net.dt, epoch)
    return EncodedInputs(tuple(inputs), c, TimeSeries(net.dt, d_hat.values * net.weight_scale))


def forward(net: Network, inputs, epoch: float) -> ForwardRecord:
    """
    Propagate spike trains through the network layer by layer: synaptic signals
    of the incoming trains, aggregate current per neuron, LIF simulation, and the
    emitted trains feed the next layer. Deterministic for fixed weights and
    inputs.

    Args:
        net (Network): The network.
        inputs: N_0 SpikeTrains, or an `EncodedInputs` from `encode_inputs`.
        epoch (float): Epoch length T (ms).

    Returns:
        ForwardRecord: Per-layer signals and traces.

    Raises:
        DimensionError: If the number of inputs differs from N_0.
    """
    encoded = inputs if isinstance(inputs, EncodedInputs) else encode_inputs(net, inputs, epoch)
    if encoded.c.n_bins != epoch_bins(epoch, net.dt):
        raise DimensionError(f"forward | encoded inputs span {encoded.c.n_bins} bins, epoch needs {epoch_bins(epoch, net.dt)}")
    layers = []
    c, d_hat = encoded.c, encoded.d_hat
    for w in net.weights:
        current = TimeSeries(net.dt, net.weight_scale * (w @ np.atleast_2d(c.values)))
        traces = simulate_layer(current, net.lif)
        layers.append(LayerRecord(c_in=c, d_hat=d_hat, traces=traces))
        trains = [trace.spikes for trace in traces]
        c = compute_c(trains, net.kernels, net.dt, epoch)
        d_hat = TimeSeries(net.dt, compute_d_hat_from_spikes(trains, net.kernels, net.dt, epoch).values * net.weight_scale)
    return ForwardRecord(layers=layers, epoch=epoch)


def init_weights(net: Network, schemes, seed: int) -> Network:
    """
    Initialize every weight matrix with its layer's scheme.

    Args:
        net (Network): Network whose topology is kept.
        schemes: One InitScheme per layer, or a single scheme for all layers.
        seed (int): Seed of the initialization stream.

    Returns:
        Network: A new network with the drawn weights.

    Raises:
        ConfigurationError: If the number of schemes does not match the layers.
    """
    from app.datagen import rng_stream
    if isinstance(schemes, InitScheme):
        schemes = [schemes] * net.n_layers
    if len(schemes) != net.n_layers:
        raise ConfigurationError("init", f"{len(schemes)} schemes for {net.n_layers} layers")
    weights = []
    for l, (scheme, (rows, cols)) in enumerate(zip(schemes, net.shapes), start=1):
        rng = rng_stream(seed, constants.RNG_STREAM_INIT, l)
        if scheme.name == "zeros":
            weights.append(np.zeros((rows, cols)))
            continue
        sign = np.where(rng.random(cols) < scheme.excitatory_fraction, 1.0, -1.0)
        if scheme.name == "gaussian-excinh":
            magnitude = np.abs(rng.normal(scheme.mu, scheme.sigma, size=(rows, cols)))
        else:
            magnitude = rng.uniform(0.0, scheme.w_max, size=(rows, cols))
        weights.append(magnitude * sign[np.newaxis, :])
    return replace(net, layer_sizes=list(net.layer_sizes), weights=weights)


def _checkpoint_header(net: Network, seed) -> dict:
    return {
        "format": constants.CHECKPOINT_MAGIC,
        "version": constants.CHECKPOINT_VERSION,
        "dtype": constants.CHECKPOINT_DTYPE,
        "layer_sizes": list(net.layer_sizes),
        "dt": net.dt,
        "weight_scale": net.weight_scale,
        "lif": asdict(net.lif),
        "kernels": asdict(net.kernels),
        "seed": seed,
    }


def save_checkpoint(net: Network, path, seed=None) -> Path:
    """
    Write a checkpoint: one JSON header line (layer sizes, dt, parameter blocks,
    seed) followed by the row-major little-endian float64 weight blocks of each
    layer. The same network always produces the same bytes.

    Args:
        net (Network): Network to save.
        path: Destination file.
        seed: Seed recorded in the header (informational).

    Returns:
        Path: The written path.
    """
    path = Path(path)
    header = json.dumps(_checkpoint_header(net, seed), sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as handle:
        handle.write(header.encode("utf-8") + b"\n")
        for w in net.weights:
            handle.write(np.ascontiguousarray(w, dtype=constants.CHECKPOINT_DTYPE).tobytes(order="C"))
    return path


def load_checkpoint(path, dt: float = None) -> Network:
    """
    Restore a network saved by `save_checkpoint`.

    Args:
        path: Checkpoint file.
        dt (float): Time step of the current run; a checkpoint written with a
            different step is refused.

    Returns:
        Network: The restored network, bit-exact.

    Raises:
        CheckpointError: On a corrupt header, a payload that does not match the
            header's layer sizes, or a dt mismatch.
    """
    app = get_normad_app()
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"load_checkpoint | {path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"load_checkpoint | {path}: corrupt header - {err}") from err
    if not isinstance(header, dict) or header.get("format") != constants.CHECKPOINT_MAGIC:
        raise CheckpointError(f"load_checkpoint | {path}: not a checkpoint file")
    if header.get("version") != constants.CHECKPOINT_VERSION or header.get("dtype") != constants.CHECKPOINT_DTYPE:
        raise CheckpointError(f"load_checkpoint | {path}: unsupported version or dtype")
    try:
        sizes = [int(n) for n in header["layer_sizes"]]
        saved_dt = float(header["dt"])
        lif = LifParams(**header["lif"])
        kernels = KernelParams(**header["kernels"])
        weight_scale = float(header["weight_scale"])
    except (KeyError, TypeError, ValueError, ConfigurationError) as err:
        raise CheckpointError(f"load_checkpoint | {path}: corrupt header - {err}") from err
    if dt is not None and not math.isclose(saved_dt, dt, rel_tol=1e-12):
        raise CheckpointError(f"load_checkpoint | {path}: saved with dt={saved_dt}, current dt={dt}")

    payload = raw[newline + 1:]
    shapes = [(sizes[l], sizes[l - 1]) for l in range(1, len(sizes))]
    expected = sum(r * c for r, c in shapes) * 8
    if len(payload) != expected:
        raise CheckpointError(
            f"load_checkpoint | {path}: shape mismatch, header layer sizes {sizes} need {expected} bytes, found {len(payload)}"
        )
    weights, offset = [], 0
    for rows, cols in shapes:
        count = rows * cols
        block = np.frombuffer(payload, dtype=constants.CHECKPOINT_DTYPE, count=count, offset=offset)
        weights.append(block.reshape(rows, cols).astype(np.float64))
        offset += count * 8
    try:
        net = Network(sizes, weights, lif=lif, kernels=kernels, weight_scale=weight_scale, dt=saved_dt)
    except (ConfigurationError, DimensionError) as err:
        raise CheckpointError(f"load_checkpoint | {path}: {err}") from err
    app.logger.debug(f"load_checkpoint | restored {sizes} from {path}")
    return net
