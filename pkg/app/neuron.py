# -*- coding: utf-8 -*-

from dataclasses import dataclass, field

import numpy as np

from app import constants
from app.exceptions import ConfigurationError, DimensionError
from app.helpers import require_positive
from app.kernels import (
    KernelParams,
    TimeSeries,
    alpha_kernel,
    causal_convolve,
    compose_kernels,
    impulse_response_sum,
    leak_kernel,
    sample_kernel,
)

"""
Clock-driven simulation of leaky integrate-and-fire neurons driven by
current-based synapses, and the synaptic input signals the learning rule needs.
"""


@dataclass(frozen=True)
class LifParams:
    """
    Membrane capacitance (pF), leak conductance (nS), leak reversal and threshold
    potentials (mV) and absolute refractory period (ms).
    """

    cm: float = constants.LIF_CM
    g_l: float = constants.LIF_GL
    e_l: float = constants.LIF_EL
    v_t: float = constants.LIF_VT
    delta_abs: float = constants.LIF_DELTA_ABS

    def __post_init__(self):
        require_positive("lif.cm", self.cm)
        require_positive("lif.g_l", self.g_l)
        require_positive("lif.delta_abs", self.delta_abs, allow_zero=True)
        if not self.v_t > self.e_l:
            raise ConfigurationError("lif.v_t", f"threshold must exceed e_l ({self.v_t} <= {self.e_l})")

    @property
    def tau_l(self) -> float:
        return self.cm / self.g_l

    @property
    def rheobase(self) -> float:
        """
        Smallest constant current (pA) that eventually drives V to threshold.
        """
        return self.g_l * (self.v_t - self.e_l)


@dataclass(frozen=True)
class SpikeTrain:
    """
    Strictly increasing spike instants (ms).
    """

    times: tuple = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if any(not np.isfinite(t) for t in times):
            raise ConfigurationError("times", "spike times must be finite")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("times", "spike times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def to_bins(self, dt: float) -> np.ndarray:
        return spike_times_to_bins(self.times, dt)

    def within(self, epoch: float) -> bool:
        return all(0.0 <= t < epoch for t in self.times)

    @classmethod
    def from_bins(cls, bins, dt: float) -> "SpikeTrain":
        return cls(bins_to_spike_times(bins, dt))


@dataclass(frozen=True)
class NeuronTrace:
    """
    Membrane potential trace of one neuron, its spikes, and the slope of the
    potential (mV/ms) at each spike bin.
    """

    v: TimeSeries
    spikes: SpikeTrain
    spike_bins: np.ndarray = field(repr=False)
    slope_at_spikes: np.ndarray = field(repr=False)


def spike_times_to_bins(times, dt: float) -> np.ndarray:
    return np.rint(np.asarray(times, dtype=np.float64) / dt).astype(np.int64)


def bins_to_spike_times(bins, dt: float) -> tuple:
    # rounding keeps grid times free of representation noise (0.30000000000000004)
    return tuple(float(t) for t in np.round(np.asarray(bins, dtype=np.int64) * dt, 9))


def epoch_bins(epoch: float, dt: float) -> int:
    require_positive("epoch", epoch)
    require_positive("dt", dt)
    return int(round(epoch / dt))


def aggregate_current(c: TimeSeries, w) -> TimeSeries:
    """
    Aggregate synaptic current I(t) = w^T c(t).

    Args:
        c (TimeSeries): Synaptic input signals, channel-major.
        w: Weight vector (one entry per channel), or a matrix with one row per
            neuron to get one current per row.

    Returns:
        TimeSeries: Single channel for a vector, one channel per row otherwise.

    Raises:
        DimensionError: If the number of weights differs from the channel count.
    """
    w = np.asarray(w, dtype=np.float64)
    values = np.atleast_2d(c.values)
    if w.shape[-1] != values.shape[0]:
        raise DimensionError(f"aggregate_current | {w.shape[-1]} weights for {values.shape[0]} channels")
    return TimeSeries(c.dt, w @ values)


def simulate_layer(current: TimeSeries, p: LifParams) -> list:
    """
    Forward-Euler integration of Cm dV/dt = -gL (V - EL) + I(t) for every row
    of `current` from V(0) = EL.

    A neuron fires at the first bin where V >= VT; the spike time is that bin's
    time and the slope (-gL (V - EL) + I) / Cm at that bin is recorded. V is then
    reset to EL and held there, ignoring input, for the absolute refractory
    period; integration resumes from EL once it has elapsed.

    Args:
        current (TimeSeries): Input currents (pA), one row per neuron.
        p (LifParams): Neuron constants.

    Returns:
        list: One NeuronTrace per row.
    """
    dt = current.dt
    drive = np.atleast_2d(current.values)
    n_neurons, n_bins = drive.shape
    hold = max(1, int(round(p.delta_abs / dt)))

    v = np.empty((n_neurons, n_bins))
    fired_mask = np.zeros((n_neurons, n_bins), dtype=bool)
    slopes = np.zeros((n_neurons, n_bins))
    state = np.full(n_neurons, p.e_l)
    clamped = np.zeros(n_neurons, dtype=np.int64)

    for n in range(n_bins):
        v[:, n] = state
        slope = (-p.g_l * (state - p.e_l) + drive[:, n]) / p.cm
        fired = (clamped == 0) & (state >= p.v_t)
        if fired.any():
            fired_mask[fired, n] = True
            slopes[fired, n] = slope[fired]
            clamped[fired] = hold
        state = np.where(clamped > 0, p.e_l, state + dt * slope)
        clamped = np.maximum(clamped - 1, 0)

    traces = []
    for i in range(n_neurons):
        bins = np.flatnonzero(fired_mask[i])
        traces.append(
            NeuronTrace(
                v=TimeSeries(dt, v[i]),
                spikes=SpikeTrain.from_bins(bins, dt),
                spike_bins=bins,
                slope_at_spikes=slopes[i, bins],
            )
        )
    return traces


def simulate_lif(current: TimeSeries, p: LifParams) -> NeuronTrace:
    """
    Simulate a single neuron; see `simulate_layer` for the dynamics.
    """
    if current.values.ndim != 1:
        raise DimensionError(f"simulate_lif | expected one current, got {current.n_channels}")
    return simulate_layer(current, p)[0]


def alpha_kernel_series(p: KernelParams, dt: float, n_bins: int) -> TimeSeries:
    return sample_kernel(alpha_kernel, p, dt, n_bins)


def approx_leak_series(p: KernelParams, dt: float, n_bins: int) -> TimeSeries:
    return sample_kernel(leak_kernel, p, dt, n_bins, tau=p.tau_l_prime)


def impulse_train(train: SpikeTrain, dt: float, n_bins: int) -> TimeSeries:
    """
    Represent a spike train on the grid as impulses of amplitude 1/dt.
    """
    values = np.zeros(n_bins)
    bins = train.to_bins(dt)
    if bins.size and (bins.min() < 0 or bins.max() >= n_bins):
        raise ConfigurationError("spikes", f"spike times must lie within [0, {n_bins * dt})")
    values[bins] = 1.0 / dt
    return TimeSeries(dt, values)


def spike_bins_within(inputs: list, dt: float, n_bins: int) -> list:
    bins_per_channel = []
    for train in inputs:
        bins = train.to_bins(dt)
        if bins.size and (bins.min() < 0 or bins.max() >= n_bins):
            raise ConfigurationError("spikes", f"spike times must lie within [0, {n_bins * dt})")
        bins_per_channel.append(bins)
    return bins_per_channel


def compute_c(inputs: list, p: KernelParams, dt: float, epoch: float) -> TimeSeries:
    """
    Synaptic input signals c_i(t) = sum_f alpha(t - t_f^i), one channel per
    input spike train. Equal to `causal_convolve` of each impulse train with the
    sampled alpha kernel.

    Args:
        inputs (list): SpikeTrain per synapse.
        p (KernelParams): Kernel constants.
        dt (float): Grid step (ms).
        epoch (float): Epoch length (ms).

    Returns:
        TimeSeries: Shape (len(inputs), n_bins).
    """
    n_bins = epoch_bins(epoch, dt)
    kernel = alpha_kernel_series(p, dt, n_bins)
    return TimeSeries(dt, impulse_response_sum(spike_bins_within(inputs, dt, n_bins), kernel, n_bins))


def compute_d_hat(c: TimeSeries, p: KernelParams) -> TimeSeries:
    """
    Approximate (reset-free) membrane response of each synaptic input:
    d_hat(t) = c(t) * h_hat(t), with h_hat using tau_l_prime. Affine in the
    weights: V is approximated by EL + w^T d_hat.
    """
    kernel = approx_leak_series(p, c.dt, c.n_bins)
    return causal_convolve(c, kernel)


def compute_d_hat_from_spikes(inputs: list, p: KernelParams, dt: float, epoch: float) -> TimeSeries:
    """
    `compute_d_hat(compute_c(inputs))` computed directly from the spike bins
    with the composed alpha-then-h_hat kernel.
    """
    n_bins = epoch_bins(epoch, dt)
    kernel = compose_kernels(alpha_kernel_series(p, dt, n_bins), approx_leak_series(p, dt, n_bins), n_bins)
    return TimeSeries(dt, impulse_response_sum(spike_bins_within(inputs, dt, n_bins), kernel, n_bins))
