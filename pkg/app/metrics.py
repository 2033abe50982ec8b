# -*- coding: utf-8 -*-

from dataclasses import dataclass, field

import numpy as np

from app.kernels import KernelParams, TimeSeries, impulse_response_sum
from app.neuron import SpikeTrain, spike_bins_within, epoch_bins

"""
Spike train comparison through exponentially low-pass filtered trains.
"""


@dataclass(frozen=True)
class CorrelationReport:
    """
    Correlation of every pattern at one training iteration. `c` is the
    worst pattern, the value the convergence criterion looks at.
    """

    per_pattern: tuple
    iteration: int = 0
    c: float = field(init=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.per_pattern)
        if not values:
            raise ValueError("CorrelationReport needs at least one pattern")
        object.__setattr__(self, "per_pattern", values)
        object.__setattr__(self, "c", min(values))

    def meets(self, threshold: float) -> bool:
        return all(value >= threshold - 1e-12 for value in self.per_pattern)


def lowpass(s: SpikeTrain, p: KernelParams, dt: float, epoch: float) -> TimeSeries:
    """
    Filter a spike train with the one-sided exponential exp(-t / tau_lp) u(t).
    The filter is not truncated: the tail runs to the end of the epoch.
    """
    n_bins = epoch_bins(epoch, dt)
    kernel = TimeSeries(dt, np.exp(-np.arange(n_bins) * dt / p.tau_lp))
    values = impulse_response_sum(spike_bins_within([s], dt, n_bins), kernel, n_bins)
    return TimeSeries(dt, values[0])


def correlation(sd: SpikeTrain, so: SpikeTrain, p: KernelParams, dt: float, epoch: float) -> float:
    """
    Normalized inner product of the low-pass filtered desired and observed
    trains, as grid sums over the epoch.

    Args:
        sd (SpikeTrain): Desired train.
        so (SpikeTrain): Observed train.
        p (KernelParams): Supplies tau_lp.
        dt (float): Grid step (ms).
        epoch (float): Epoch length (ms).

    Returns:
        float: C in [0, 1]; 0 when either train is empty.
    """
    if len(sd) == 0 or len(so) == 0:
        return 0.0
    ld = lowpass(sd, p, dt, epoch).values
    lo = lowpass(so, p, dt, epoch).values
    norm = np.linalg.norm(ld) * np.linalg.norm(lo)
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(ld, lo) / norm, 0.0, 1.0))


def correlation_matrix(desired: list, observed: list, p: KernelParams, dt: float, epoch: float) -> np.ndarray:
    """
    C between every desired train (rows) and every observed train (columns).
    The diagonal holds the per-pattern values; large off-diagonal entries show
    which targets a network confuses.
    """
    return np.array([[correlation(d, o, p, dt, epoch) for o in observed] for d in desired])
