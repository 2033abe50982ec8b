# -*- coding: utf-8 -*-

import math
from dataclasses import dataclass, field

import numpy as np

from app import constants
from app.exceptions import ConfigurationError, DimensionError
from app.helpers import get_normad_app, require_positive
from app.kernels import (
    KernelParams,
    TimeSeries,
    alpha_prime,
    causal_convolve,
    compose_kernels,
    adjoint_convolve_at,
    sample_kernel,
)
from app.metrics import CorrelationReport, correlation
from app.network import EncodedInputs, ForwardRecord, Network, encode_inputs, forward
from app.neuron import SpikeTrain, approx_leak_series, epoch_bins, spike_bins_within

"""
Normalized approximate descent with spatio-temporal error backpropagation.

The output error is a signed impulse train. The output layer moves along the
unit-normalized d_hat at every error instant. Hidden layers receive the error
through the transposed weights (spatial step) and through the time-reversed
alpha' * h_hat kernel sampled at each neuron's own spikes and divided by the
potential slope there (temporal step).
"""


@dataclass(frozen=True)
class LearnConfig:
    """
    Learning rates (weight units), stopping rule, slope clamp (mV/ms), learning
    rate schedule and per-layer plasticity flags (layer 1 first; None means
    every layer learns).
    """

    r_o: float = constants.LEARN_R_O
    r_h: float = constants.LEARN_R_H
    max_iterations: int = constants.XOR_MAX_ITERATIONS
    convergence_c: float = constants.XOR_CONVERGENCE_C
    eps_slope: float = constants.LEARN_EPS_SLOPE
    schedule: str = constants.LEARN_SCHEDULE
    schedule_base: float = constants.LEARN_SCHEDULE_BASE
    schedule_horizon: float = constants.LEARN_SCHEDULE_HORIZON
    rate_min_factor: float = constants.LEARN_RATE_MIN_FACTOR
    rate_max_factor: float = constants.LEARN_RATE_MAX_FACTOR
    backprop_form: str = constants.LEARN_BACKPROP_FORM
    trainable: tuple = None

    def __post_init__(self):
        require_positive("LEARN_R_O", self.r_o)
        require_positive("LEARN_R_H", self.r_h)
        require_positive("LEARN_EPS_SLOPE", self.eps_slope)
        if self.max_iterations < 0:
            raise ConfigurationError("LEARN_MAX_ITERATIONS", f"must be >= 0, got {self.max_iterations}")
        if not 0.0 < self.convergence_c <= 1.0:
            raise ConfigurationError("LEARN_CONVERGENCE_C", f"must lie in (0, 1], got {self.convergence_c}")
        if self.schedule not in constants.LEARN_SCHEDULES:
            raise ConfigurationError("LEARN_SCHEDULE", f"unknown schedule {self.schedule!r}; expected one of {constants.LEARN_SCHEDULES}")
        if self.backprop_form not in constants.LEARN_BACKPROP_FORMS:
            raise ConfigurationError(
                "LEARN_BACKPROP_FORM", f"unknown form {self.backprop_form!r}; expected one of {constants.LEARN_BACKPROP_FORMS}"
            )
        if self.schedule == "subexp" and not self.schedule_base > 1.0:
            raise ConfigurationError("LEARN_SCHEDULE_BASE", f"must exceed 1, got {self.schedule_base}")
        require_positive("LEARN_SCHEDULE_HORIZON", self.schedule_horizon)
        require_positive("LEARN_RATE_MIN_FACTOR", self.rate_min_factor, allow_zero=True)
        if self.rate_max_factor < self.rate_min_factor or self.rate_max_factor <= 0:
            raise ConfigurationError("LEARN_RATE_MAX_FACTOR", f"must be positive and >= the minimum factor, got {self.rate_max_factor}")
        if self.trainable is not None:
            object.__setattr__(self, "trainable", tuple(bool(flag) for flag in self.trainable))

    def is_trainable(self, layer: int, n_layers: int) -> bool:
        """
        Args:
            layer (int): Zero-based layer index (0 is layer 1).
            n_layers (int): Number of weight layers of the network.
        """
        if self.trainable is None:
            return True
        if len(self.trainable) != n_layers:
            raise ConfigurationError("trainable", f"{len(self.trainable)} flags for {n_layers} layers")
        return self.trainable[layer]


@dataclass(frozen=True)
class Pattern:
    """
    One training pattern: the N_0 input trains, the desired output train and the
    epoch they live in.
    """

    inputs: tuple
    desired: SpikeTrain
    epoch: float
    name: str = ""


@dataclass(frozen=True)
class ErrorTrain:
    """
    e(t) = s_d(t) - s_o(t) on the grid: +1/dt at desired-only bins, -1/dt at
    observed-only bins. `bins` and `signs` hold the support.
    """

    dt: float
    n_bins: int
    bins: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    signs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def is_zero(self) -> bool:
        return self.bins.size == 0

    @property
    def series(self) -> TimeSeries:
        values = np.zeros(self.n_bins)
        values[self.bins] = self.signs / self.dt
        return TimeSeries(self.dt, values)


@dataclass
class WeightUpdate:
    """
    One delta matrix per layer, shaped like the network's weights.
    """

    deltas: list

    def is_zero(self) -> bool:
        return all(not np.any(d) for d in self.deltas)

    def apply(self, net: Network) -> Network:
        updated = net.copy()
        for l, delta in enumerate(self.deltas):
            if delta.shape != updated.weights[l].shape:
                raise DimensionError(f"WeightUpdate.apply | delta {l + 1} has shape {delta.shape}, weights {updated.weights[l].shape}")
            updated.weights[l] += delta
        return updated


@dataclass
class IterationResult:
    network: Network
    correlation: float
    update: WeightUpdate
    record: ForwardRecord
    error: ErrorTrain
    spike_counts: list


@dataclass
class TrainingReport:
    """
    Outcome of `train`: the per-sweep correlation of every pattern, the output
    spike times per sweep and pattern, the sweep at which all patterns met the
    criterion (max_iterations + 1 when none did) and the final network.
    """

    correlations: list
    output_spikes: list
    iterations_to_convergence: int
    converged: bool
    network: Network
    schedule: str = "round-robin"
    rate_factors: list = field(default_factory=list)

    @property
    def n_sweeps(self) -> int:
        return len(self.correlations)


def error_signal(desired: SpikeTrain, observed: SpikeTrain, dt: float, epoch: float) -> ErrorTrain:
    """
    Compare desired and observed trains at grid resolution. Spikes sharing a
    bin cancel.

    Args:
        desired (SpikeTrain): Target train.
        observed (SpikeTrain): Output train.
        dt (float): Grid step (ms).
        epoch (float): Epoch length (ms).

    Returns:
        ErrorTrain: The signed error impulses.
    """
    n_bins = epoch_bins(epoch, dt)
    desired_bins, observed_bins = (np.unique(b) for b in spike_bins_within([desired, observed], dt, n_bins))
    missing = np.setdiff1d(desired_bins, observed_bins, assume_unique=True)
    spurious = np.setdiff1d(observed_bins, desired_bins, assume_unique=True)
    bins = np.concatenate([missing, spurious]).astype(np.int64)
    signs = np.concatenate([np.ones(missing.size), -np.ones(spurious.size)])
    order = np.argsort(bins, kind="stable")
    return ErrorTrain(dt=dt, n_bins=n_bins, bins=bins[order], signs=signs[order])


def output_layer_update(rec: ForwardRecord, e: ErrorTrain, cfg: LearnConfig, rate_factor: float = 1.0) -> np.ndarray:
    """
    Move the output weights along the unit-normalized d_hat_o at every error
    instant: dw_o = r_o * sum_t sign(e(t)) d_hat_o(t) / |d_hat_o(t)|.

    Args:
        rec (ForwardRecord): Forward pass holding the output layer's d_hat.
        e (ErrorTrain): Output error.
        cfg (LearnConfig): Supplies r_o.
        rate_factor (float): Learning rate schedule factor.

    Returns:
        np.ndarray: Delta of the output weight vector.
    """
    app = get_normad_app()
    d_hat = np.atleast_2d(rec.layers[-1].d_hat.values)
    delta = np.zeros(d_hat.shape[0])
    for b, sign in zip(e.bins, e.signs):
        column = d_hat[:, b]
        norm = np.linalg.norm(column)
        if norm == 0.0:
            app.logger.warning(f"output_layer_update | d_hat_o vanishes at t={b * e.dt:.4g} ms, error instant skipped")
            continue
        delta += sign * column / norm
    return cfg.r_o * rate_factor * delta


def backprop_kernel(p: KernelParams, dt: float, n_bins: int, weight_scale: float = 1.0) -> TimeSeries:
    """
    The sampled alpha' * h_hat kernel that carries an upper layer's error back
    to the spike times of the layer below, in mV/ms per weight unit.
    """
    composite = compose_kernels(sample_kernel(alpha_prime, p, dt, n_bins), approx_leak_series(p, dt, n_bins), n_bins)
    return TimeSeries(dt, composite.values * weight_scale)


def spatial_backprop(e_temp_upper: TimeSeries, w_upper) -> TimeSeries:
    """
    e_spat_l(t) = W_{l+1}^T e_temp_{l+1}(t).

    Raises:
        DimensionError: If W_{l+1} has a row count other than the upper width.
    """
    w_upper = np.asarray(w_upper, dtype=np.float64)
    values = np.atleast_2d(e_temp_upper.values)
    if w_upper.ndim != 2 or w_upper.shape[0] != values.shape[0]:
        raise DimensionError(f"spatial_backprop | weights of shape {w_upper.shape} for {values.shape[0]} upper channels")
    return TimeSeries(e_temp_upper.dt, w_upper.T @ values)


def temporal_backprop(e_spat: TimeSeries, traces: list, cfg: LearnConfig, kernel: TimeSeries) -> TimeSeries:
    """
    Carry a layer's spatial error to its neurons' spike times: each channel is
    correlated with the time-reversed `kernel` (see `backprop_kernel`) and read
    only at that neuron's spikes, divided by the clamped potential slope there.

    Args:
        e_spat (TimeSeries): Spatial error, one channel per neuron.
        traces (list): NeuronTrace per neuron of the layer.
        cfg (LearnConfig): Supplies eps_slope.
        kernel (TimeSeries): Sampled alpha' * h_hat kernel.

    Returns:
        TimeSeries: Impulses of amplitude (value / slope) / dt at each neuron's
        spike bins, zero elsewhere.

    Raises:
        DimensionError: If the channel count differs from the layer width.
    """
    values = np.atleast_2d(e_spat.values)
    if values.shape[0] != len(traces):
        raise DimensionError(f"temporal_backprop | {values.shape[0]} error channels for {len(traces)} neurons")
    out = np.zeros_like(values)
    for n, trace in enumerate(traces):
        if trace.spike_bins.size == 0:
            continue
        filtered = adjoint_convolve_at(values[n:n + 1], kernel, trace.spike_bins)[0]
        slopes = np.maximum(trace.slope_at_spikes, cfg.eps_slope)
        out[n, trace.spike_bins] = filtered / slopes / e_spat.dt
    return TimeSeries(e_spat.dt, out)


def hidden_layer_update(e_temp: TimeSeries, d_hat: TimeSeries, cfg: LearnConfig, rate_factor: float = 1.0) -> np.ndarray:
    """
    dW_l = r_h * integral of e_temp_l(t) d_hat_l(t)^T dt. The integral is
    evaluated over the nonzero columns of `e_temp` only.

    Args:
        e_temp (TimeSeries): Temporal error of layer l, one channel per neuron.
        d_hat (TimeSeries): d_hat of layer l's inputs, one channel per input.
        cfg (LearnConfig): Supplies r_h.
        rate_factor (float): Learning rate schedule factor.

    Returns:
        np.ndarray: Delta of W_l, shape (N_l, N_{l-1}).
    """
    e = np.atleast_2d(e_temp.values)
    d = np.atleast_2d(d_hat.values)
    if e.shape[-1] != d.shape[-1]:
        raise DimensionError(f"hidden_layer_update | {e.shape[-1]} error bins for {d.shape[-1]} d_hat bins")
    support = np.flatnonzero(np.any(e != 0.0, axis=0))
    if support.size == 0:
        return np.zeros((e.shape[0], d.shape[0]))
    return cfg.r_h * rate_factor * e_temp.dt * (e[:, support] @ d[:, support].T)


def hidden_layer_update_direct(rec: ForwardRecord, e: ErrorTrain, w_o, cfg: LearnConfig, kernel: TimeSeries, rate_factor: float = 1.0) -> np.ndarray:
    """
    Update of the layer directly below the output written with forward
    convolutions: for hidden neuron i,
    dW[i] = r_h w_o[i] integral e(t) sum_s (alpha' * h_hat)(t - t_s) d_hat(t_s) / V'(t_s) dt.
    Costs one convolution per (neuron, input) pair and gives the same result as
    the adjoint form used by `compute_update`.

    Args:
        rec (ForwardRecord): Forward pass of a network with at least two layers.
        e (ErrorTrain): Output error.
        w_o: Output weight vector.
        cfg (LearnConfig): Supplies r_h and eps_slope.
        kernel (TimeSeries): Sampled alpha' * h_hat kernel.
        rate_factor (float): Learning rate schedule factor.

    Returns:
        np.ndarray: Delta of W_{L-1}.
    """
    if len(rec.layers) < 2:
        raise DimensionError("hidden_layer_update_direct | the network has no hidden layer")
    hidden = rec.layers[-2]
    d_hat = np.atleast_2d(hidden.d_hat.values)
    w_o = np.asarray(w_o, dtype=np.float64).reshape(-1)
    if w_o.size != len(hidden.traces):
        raise DimensionError(f"hidden_layer_update_direct | {w_o.size} output weights for {len(hidden.traces)} hidden neurons")
    error = e.series.values
    dt = e.dt
    delta = np.zeros((len(hidden.traces), d_hat.shape[0]))
    for i, trace in enumerate(hidden.traces):
        if trace.spike_bins.size == 0 or w_o[i] == 0.0:
            continue
        # impulses at the neuron's spikes carrying d_hat(t_s) / V'(t_s)
        slopes = np.maximum(trace.slope_at_spikes, cfg.eps_slope)
        impulses = np.zeros_like(d_hat)
        impulses[:, trace.spike_bins] = d_hat[:, trace.spike_bins] / slopes / dt
        sensitivity = causal_convolve(TimeSeries(dt, impulses), kernel).values
        delta[i] = w_o[i] * dt * (sensitivity @ error)
    return cfg.r_h * rate_factor * delta


def compute_update(net: Network, rec: ForwardRecord, e: ErrorTrain, cfg: LearnConfig, rate_factor: float = 1.0) -> WeightUpdate:
    """
    Assemble the updates of every layer from one forward pass. Frozen layers get
    zero deltas; the backpropagation chain stops below the lowest plastic layer.
    All spatial steps use the weights the forward pass ran with.

    Args:
        net (Network): The network `rec` was produced by.
        rec (ForwardRecord): Forward pass.
        e (ErrorTrain): Output error.
        cfg (LearnConfig): Learning parameters.
        rate_factor (float): Learning rate schedule factor.

    Returns:
        WeightUpdate: One delta per layer.
    """
    n_layers = net.n_layers
    deltas = [np.zeros(shape) for shape in net.shapes]
    if e.is_zero:
        return WeightUpdate(deltas)

    if cfg.is_trainable(n_layers - 1, n_layers):
        deltas[-1] = output_layer_update(rec, e, cfg, rate_factor)[np.newaxis, :]
    plastic = [l for l in range(n_layers - 1) if cfg.is_trainable(l, n_layers)]
    if not plastic:
        return WeightUpdate(deltas)

    kernel = backprop_kernel(net.kernels, net.dt, rec.n_bins, net.weight_scale)
    e_temp = TimeSeries(e.dt, e.series.values[np.newaxis, :])
    for l in range(n_layers - 2, min(plastic) - 1, -1):
        layer = rec.layers[l]
        e_spat = spatial_backprop(e_temp, net.weights[l + 1])
        e_temp = temporal_backprop(e_spat, layer.traces, cfg, kernel)
        if l not in plastic:
            continue
        if l == n_layers - 2 and cfg.backprop_form == "direct":
            deltas[l] = hidden_layer_update_direct(rec, e, net.weights[-1], cfg, kernel, rate_factor)
        else:
            deltas[l] = hidden_layer_update(e_temp, layer.d_hat, cfg, rate_factor)
    return WeightUpdate(deltas)


def train_iteration(net: Network, pattern: Pattern, cfg: LearnConfig, rate_factor: float = 1.0,
                    encoded: EncodedInputs = None, apply: bool = True) -> IterationResult:
    """
    One NormAD step on one pattern: forward pass, correlation and error of the
    output train, layer updates, and the updated network.

    Args:
        net (Network): Network to train; it is not modified.
        pattern (Pattern): Inputs, desired train and epoch.
        cfg (LearnConfig): Learning parameters.
        rate_factor (float): Learning rate schedule factor.
        encoded (EncodedInputs): Precomputed input signals of the pattern.
        apply (bool): Compute and apply the update; False only measures.

    Returns:
        IterationResult: Updated network, C before the update, the update, the
        forward record, the error train and spike counts per layer.
    """
    app = get_normad_app()
    rec = forward(net, encoded if encoded is not None else pattern.inputs, pattern.epoch)
    c = correlation(pattern.desired, rec.output_spikes, net.kernels, net.dt, pattern.epoch)
    e = error_signal(pattern.desired, rec.output_spikes, net.dt, pattern.epoch)
    spike_counts = [layer.spike_count for layer in rec.layers]
    for l, count in enumerate(spike_counts[:-1], start=1):
        if count == 0:
            app.logger.warning(f"train_iteration | hidden layer {l} is silent on pattern {pattern.name!r}, it and the layers below get no update")
    if not apply:
        return IterationResult(net, c, WeightUpdate([np.zeros(shape) for shape in net.shapes]), rec, e, spike_counts)
    update = compute_update(net, rec, e, cfg, rate_factor)
    updated = net if update.is_zero() else update.apply(net)
    return IterationResult(updated, c, update, rec, e, spike_counts)


def rate_factors(cfg: LearnConfig):
    """
    Yield the learning rate factor of sweep 0, 1, 2, ... for the configured
    schedule, bounded to [rate_min_factor, rate_max_factor].
    """
    factor, sweep = 1.0, 0
    while True:
        if cfg.schedule == "constant":
            factor = 1.0
        elif cfg.schedule == "inverse":
            factor = 1.0 / (1.0 + sweep / cfg.schedule_horizon)
        elif cfg.schedule == "exponential":
            factor = math.exp(-sweep / cfg.schedule_horizon)
        elif sweep > 0:
            # subexp: r_{i+1} = r_i * base^(-r_i / r_0)
            factor = factor * cfg.schedule_base ** (-factor)
        factor = min(max(factor, cfg.rate_min_factor), cfg.rate_max_factor)
        yield factor
        sweep += 1


def train(net: Network, patterns: list, cfg: LearnConfig, schedule: str = "round-robin", on_sweep=None) -> TrainingReport:
    """
    Train until every pattern meets the correlation criterion or the iteration
    budget is spent. A sweep visits the patterns in order; each one is measured
    and, if it is below the criterion, updated. Sweep 0 measures the initial
    network; sweep max_iterations only measures.

    Args:
        net (Network): Initial network; it is not modified.
        patterns (list): Patterns to learn.
        cfg (LearnConfig): Learning parameters.
        schedule (str): Pattern selection policy.
        on_sweep: Optional callback(sweep, CorrelationReport).

    Returns:
        TrainingReport: Per-sweep correlations and outputs, convergence and the
        final network.

    Raises:
        ConfigurationError: On an empty pattern set or unknown schedule.
    """
    app = get_normad_app()
    if not patterns:
        raise ConfigurationError("patterns", "at least one training pattern is required")
    if schedule not in constants.PATTERN_SCHEDULES:
        raise ConfigurationError("schedule", f"unknown pattern schedule {schedule!r}; expected one of {constants.PATTERN_SCHEDULES}")

    encoded = [encode_inputs(net, p.inputs, p.epoch) for p in patterns]
    factors = rate_factors(cfg)
    correlations, output_spikes, applied = [], [], []
    converged_at = None
    for sweep in range(cfg.max_iterations + 1):
        factor = next(factors)
        cs, outputs = [], []
        for pattern, enc in zip(patterns, encoded):
            measured = train_iteration(net, pattern, cfg, factor, enc, apply=False)
            cs.append(measured.correlation)
            outputs.append(list(measured.record.output_spikes.times))
            if sweep < cfg.max_iterations and measured.correlation < cfg.convergence_c - 1e-12:
                update = compute_update(net, measured.record, measured.error, cfg, factor)
                if not update.is_zero():
                    net = update.apply(net)
        report = CorrelationReport(per_pattern=tuple(cs), iteration=sweep)
        correlations.append(list(report.per_pattern))
        output_spikes.append(outputs)
        applied.append(factor)
        app.logger.debug(f"train | sweep {sweep}: C = {[round(c, 4) for c in report.per_pattern]}")
        if on_sweep is not None:
            on_sweep(sweep, report)
        if report.meets(cfg.convergence_c):
            converged_at = sweep
            break

    converged = converged_at is not None
    if not converged:
        app.logger.warning(f"train | no convergence to C >= {cfg.convergence_c} within {cfg.max_iterations} iterations")
    return TrainingReport(
        correlations=correlations,
        output_spikes=output_spikes,
        iterations_to_convergence=converged_at if converged else cfg.max_iterations + 1,
        converged=converged,
        network=net,
        schedule=schedule,
        rate_factors=applied,
    )
