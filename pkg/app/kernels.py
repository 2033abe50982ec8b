# -*- coding: utf-8 -*-

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from app import constants
from app.exceptions import ConfigurationError
from app.helpers import require_positive

"""
Kernel functions and the discrete convolution engine.

A spike train enters a convolution as an impulse sequence with amplitude 1/dt at
its spike bins, so `causal_convolve(impulses, kernel)` samples the continuous
convolution of a Dirac train with the kernel. Multi-channel signals are stored
channel-major, with time on the last axis.
"""


@dataclass(frozen=True)
class KernelParams:
    """
    Time-constants (ms) of the synaptic current kernel, the membrane leak, the
    approximate leak used by the learning rule and the metric low-pass filter,
    plus the membrane capacitance (pF) that normalizes the leak kernels.
    """

    tau1: float = constants.KERNEL_TAU1
    tau2: float = constants.KERNEL_TAU2
    tau_l: float = constants.LIF_CM / constants.LIF_GL
    tau_l_prime: float = constants.KERNEL_TAU_L_PRIME
    tau_lp: float = constants.KERNEL_TAU_LP
    cm: float = constants.LIF_CM

    def __post_init__(self):
        for name in ("tau1", "tau2", "tau_l", "tau_l_prime", "tau_lp", "cm"):
            require_positive(f"kernels.{name}", getattr(self, name))
        if not self.tau1 > self.tau2:
            raise ConfigurationError("kernels.tau1", f"must exceed tau2 ({self.tau1} <= {self.tau2})")
        if self.tau_l_prime > self.tau_l:
            raise ConfigurationError(
                "kernels.tau_l_prime", f"must not exceed tau_l ({self.tau_l_prime} > {self.tau_l})"
            )

    @property
    def alpha_peak_time(self) -> float:
        return self.tau1 * self.tau2 / (self.tau1 - self.tau2) * math.log(self.tau1 / self.tau2)

    @property
    def support(self) -> float:
        """
        Duration after which sampled kernels are truncated.
        """
        return constants.KERNEL_TRUNCATION_FACTOR * max(self.tau1, self.tau_l)


@dataclass(frozen=True)
class TimeSeries:
    """
    A uniformly sampled signal over one epoch. `values` has shape (n_bins,) for
    a single channel or (n_channels, n_bins) for a bundle of channels that share
    the grid.
    """

    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        require_positive("dt", self.dt)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (1, 2) or values.shape[-1] < 1:
            raise ConfigurationError("values", f"expected 1 or 2 dimensions with >= 1 bin, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("values", "all samples must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.shape[-1]

    @property
    def n_channels(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    @property
    def duration(self) -> float:
        return self.n_bins * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.dt

    def channel(self, index: int) -> "TimeSeries":
        if self.values.ndim == 1:
            if index != 0:
                raise IndexError(index)
            return self
        return TimeSeries(self.dt, self.values[index])


def check_same_grid(dt_a: float, dt_b: float) -> None:
    if not math.isclose(dt_a, dt_b, rel_tol=1e-12, abs_tol=0.0):
        raise ConfigurationError("dt", f"time steps differ ({dt_a} != {dt_b})")


def _step(t):
    return np.asarray(t, dtype=np.float64) >= 0.0


def alpha_kernel(t, p: KernelParams):
    """
    Post-synaptic current kernel, a difference of exponentials gated by the unit
    step. Non-negative because tau1 > tau2; zero at t = 0 and for t < 0.

    Args:
        t: Time (ms), scalar or array.
        p (KernelParams): Kernel constants.

    Returns:
        Kernel amplitude, same shape as `t`.
    """
    t = np.asarray(t, dtype=np.float64)
    tc = np.where(_step(t), t, 0.0)
    value = (np.exp(-tc / p.tau1) - np.exp(-tc / p.tau2)) * _step(t)
    return value if value.ndim else float(value)


def alpha_prime(t, p: KernelParams):
    """
    Time derivative of `alpha_kernel` for t >= 0 (the t = 0 sample takes the
    right-hand limit 1/tau2 - 1/tau1); zero for t < 0.
    """
    t = np.asarray(t, dtype=np.float64)
    tc = np.where(_step(t), t, 0.0)
    value = (-np.exp(-tc / p.tau1) / p.tau1 + np.exp(-tc / p.tau2) / p.tau2) * _step(t)
    return value if value.ndim else float(value)


def leak_kernel(t, p: KernelParams, tau: float):
    """
    Leaky-integrator impulse response (1/Cm) exp(-t/tau) u(t). Pass
    `p.tau_l` for the membrane kernel and `p.tau_l_prime` for the approximate
    kernel of the learning rule.
    """
    require_positive("tau", tau)
    t = np.asarray(t, dtype=np.float64)
    tc = np.where(_step(t), t, 0.0)
    value = np.exp(-tc / tau) / p.cm * _step(t)
    return value if value.ndim else float(value)


def sample_kernel(fn, p: KernelParams, dt: float, n_bins: int, **kwargs) -> TimeSeries:
    """
    Sample a kernel function on the grid t = k * dt, truncated at the kernel
    support and at the epoch length.

    Args:
        fn: One of `alpha_kernel`, `alpha_prime`, `leak_kernel`.
        p (KernelParams): Kernel constants.
        dt (float): Grid step (ms).
        n_bins (int): Epoch length in bins.
        **kwargs: Extra arguments for `fn` (e.g. `tau`).

    Returns:
        TimeSeries: The sampled kernel.
    """
    require_positive("dt", dt)
    length = max(1, min(int(n_bins), int(math.ceil(p.support / dt))))
    return TimeSeries(dt, fn(np.arange(length) * dt, p, **kwargs))


def compose_kernels(a: TimeSeries, b: TimeSeries, n_bins: int) -> TimeSeries:
    """
    Sampled kernel of the cascade a then b, i.e. the causal convolution of the
    two sampled kernels kept to `n_bins`. Convolving with the result equals
    convolving with `a` and then with `b` on an epoch of `n_bins` bins.
    """
    check_same_grid(a.dt, b.dt)
    full = signal.convolve(a.values, b.values, mode="full", method="direct") * a.dt
    return TimeSeries(a.dt, full[: max(1, int(n_bins))])


def causal_convolve(x: TimeSeries, kernel: TimeSeries) -> TimeSeries:
    """
    y[n] = dt * sum_{k <= n} x[k] kernel[n - k], truncated to the epoch of `x`.

    Args:
        x (TimeSeries): Input, one channel or a channel-major bundle.
        kernel (TimeSeries): Single-channel sampled kernel.

    Returns:
        TimeSeries: Output with the shape of `x`.

    Raises:
        ConfigurationError: If the grids differ.
    """
    check_same_grid(x.dt, kernel.dt)
    k = kernel.values if x.values.ndim == 1 else kernel.values[np.newaxis, :]
    full = signal.convolve(x.values, k, mode="full", method="direct")
    return TimeSeries(x.dt, full[..., : x.n_bins] * x.dt)


def adjoint_convolve(z: TimeSeries, kernel: TimeSeries) -> TimeSeries:
    """
    w[n] = dt * sum_{k >= n} z[k] kernel[k - n]: correlation of `z` with the
    kernel, i.e. convolution with the time-reversed kernel, read within the
    epoch. It is the adjoint of `causal_convolve`:
    sum((x * y) z) dt == sum(adjoint(z, y) x) dt.
    """
    check_same_grid(z.dt, kernel.dt)
    reversed_z = TimeSeries(z.dt, z.values[..., ::-1])
    return TimeSeries(z.dt, causal_convolve(reversed_z, kernel).values[..., ::-1])


def impulse_response_sum(bins_per_channel: list, kernel: TimeSeries, n_bins: int) -> np.ndarray:
    """
    Causal convolution of unit-area impulse trains with a kernel, summed only
    over the occupied bins. Equivalent to `causal_convolve` of 1/dt impulses
    and much cheaper for sparse spike trains.

    Args:
        bins_per_channel (list): Per channel, an integer array of impulse bins.
        kernel (TimeSeries): Sampled kernel.
        n_bins (int): Epoch length in bins.

    Returns:
        np.ndarray: Array of shape (n_channels, n_bins).
    """
    out = np.zeros((len(bins_per_channel), n_bins))
    k = kernel.values
    for row, bins in enumerate(bins_per_channel):
        for b in np.asarray(bins, dtype=np.int64):
            stop = min(n_bins, b + k.size)
            out[row, b:stop] += k[: stop - b]
    return out


def adjoint_convolve_at(z: np.ndarray, kernel: TimeSeries, at_bins: np.ndarray) -> np.ndarray:
    """
    Evaluate `adjoint_convolve` only at the requested bins, summing over the
    nonzero columns of `z`.

    Args:
        z (np.ndarray): Channel-major samples, shape (n_channels, n_bins).
        kernel (TimeSeries): Sampled kernel.
        at_bins (np.ndarray): Bins at which the result is needed.

    Returns:
        np.ndarray: Shape (n_channels, len(at_bins)); column j holds
        dt * sum_k z[:, k] kernel[k - at_bins[j]] over k >= at_bins[j].
    """
    at_bins = np.asarray(at_bins, dtype=np.int64)
    support = np.flatnonzero(np.any(z != 0.0, axis=0))
    if support.size == 0 or at_bins.size == 0:
        return np.zeros((z.shape[0], at_bins.size))
    lag = support[np.newaxis, :] - at_bins[:, np.newaxis]
    valid = (lag >= 0) & (lag < kernel.n_bins)
    gathered = np.where(valid, kernel.values[np.clip(lag, 0, kernel.n_bins - 1)], 0.0)
    return (z[:, support] @ gathered.T) * kernel.dt
