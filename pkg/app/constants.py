# -*- coding: utf-8 -*-

import os

"""
Application name and logging level
"""
APP_NAME = os.environ.get("NORMAD_APP_NAME", "normad-snn")
APP_LOG_LEVEL = os.environ.get("NORMAD_LOG_LEVEL", "INFO")

"""
Simulation grid

All times are in ms. `SIM_DT` is the clock-driven step; 0.1 ms resolves the 1 ms
staggering of the XOR input populations and the rise of the synaptic kernel with
at least ten samples. Sampled kernels are truncated at
`KERNEL_TRUNCATION_FACTOR * max(tau1, tauL)`.
"""
SIM_DT = float(os.environ.get("NORMAD_SIM_DT", 0.1))
KERNEL_TRUNCATION_FACTOR = float(os.environ.get("NORMAD_KERNEL_TRUNCATION_FACTOR", 8.0))

"""
Synapse and learning-rule kernel constants (ms, pF)

`KERNEL_TAU1` > `KERNEL_TAU2` shape the post-synaptic current kernel.
`KERNEL_TAU_L_PRIME` is the time-constant of the approximate leak kernel used by
the learning rule and must not exceed the membrane time-constant. `KERNEL_TAU_LP`
is the low-pass time-constant of the correlation metric.
"""
KERNEL_TAU1 = float(os.environ.get("NORMAD_KERNEL_TAU1", 5.0))
KERNEL_TAU2 = float(os.environ.get("NORMAD_KERNEL_TAU2", 1.25))
KERNEL_TAU_L_PRIME = float(os.environ.get("NORMAD_KERNEL_TAU_L_PRIME", 10.0))
KERNEL_TAU_LP = float(os.environ.get("NORMAD_KERNEL_TAU_LP", 5.0))

"""
Leaky integrate-and-fire neuron constants

Capacitance in pF, leak conductance in nS (tauL = Cm / gL = 10 ms), potentials in
mV, refractory periods in ms. The XOR experiment uses the shorter refractory
period.
"""
LIF_CM = float(os.environ.get("NORMAD_LIF_CM", 300.0))
LIF_GL = float(os.environ.get("NORMAD_LIF_GL", 30.0))
LIF_EL = float(os.environ.get("NORMAD_LIF_EL", -70.0))
LIF_VT = float(os.environ.get("NORMAD_LIF_VT", -55.0))
LIF_DELTA_ABS = float(os.environ.get("NORMAD_LIF_DELTA_ABS", 3.0))
LIF_DELTA_ABS_XOR = float(os.environ.get("NORMAD_LIF_DELTA_ABS_XOR", 1.0))

"""
Weight initialization and scale

Weights are kept in arbitrary units; `NETWORK_WEIGHT_SCALE` (pA per unit) turns
them into synaptic current. Excitatory/inhibitory signs are drawn per presynaptic
neuron. At 250 pA a Poisson population of 100 inputs at 20 spikes/s drives a
uniform-excinh layer just above rheobase (g_L * (V_T - E_L) = 450 pA).
"""
NETWORK_WEIGHT_SCALE = float(os.environ.get("NORMAD_NETWORK_WEIGHT_SCALE", 250.0))
INIT_MU = float(os.environ.get("NORMAD_INIT_MU", 1.0))
INIT_SIGMA = float(os.environ.get("NORMAD_INIT_SIGMA", 0.25))
INIT_W_MAX = float(os.environ.get("NORMAD_INIT_W_MAX", 1.0))
INIT_EXCITATORY_FRACTION = float(os.environ.get("NORMAD_INIT_EXCITATORY_FRACTION", 0.8))

"""
Learning rule

Learning rates are in weight units. One output step moves V at an error instant
by r_o * |d_hat_o|, and error instants whose d_hat point the same way add up, so
r_o * weight_scale stays at or below 50 pA. The hidden step is not normalized: it grows
with w_o * (alpha' * h_hat) * |d_hat|^2 / V', and r_h keeps the potential change of a
hidden neuron per error instant well below 1 mV. `LEARN_EPS_SLOPE` (mV/ms) clamps
V' before its reciprocal is taken. Schedules other than `constant` scale both
learning rates by a common factor bounded to
[`LEARN_RATE_MIN_FACTOR`, `LEARN_RATE_MAX_FACTOR`].
"""
LEARN_R_O = float(os.environ.get("NORMAD_LEARN_R_O", 0.1))
LEARN_R_H = float(os.environ.get("NORMAD_LEARN_R_H", 0.05))
LEARN_EPS_SLOPE = float(os.environ.get("NORMAD_LEARN_EPS_SLOPE", 0.1))
LEARN_SCHEDULE = os.environ.get("NORMAD_LEARN_SCHEDULE", "constant")
LEARN_SCHEDULE_BASE = float(os.environ.get("NORMAD_LEARN_SCHEDULE_BASE", 1.001))
LEARN_SCHEDULE_HORIZON = float(os.environ.get("NORMAD_LEARN_SCHEDULE_HORIZON", 1000.0))
LEARN_RATE_MIN_FACTOR = float(os.environ.get("NORMAD_LEARN_RATE_MIN_FACTOR", 0.05))
LEARN_RATE_MAX_FACTOR = float(os.environ.get("NORMAD_LEARN_RATE_MAX_FACTOR", 1.0))
LEARN_BACKPROP_FORM = os.environ.get("NORMAD_LEARN_BACKPROP_FORM", "adjoint")

LEARN_SCHEDULES = ("constant", "subexp", "inverse", "exponential")
LEARN_BACKPROP_FORMS = ("adjoint", "direct")
PATTERN_SCHEDULES = ("round-robin",)

"""
XOR experiment

Three populations of `XOR_POPULATION_SIZE` input neurons fire delay ramps with
1 ms spacing: the bias population from 0 ms, an input population from
`XOR_INPUT_ONSET` ms when its bit is set. The output should fire early for a
logical 1 and late for a logical 0.

A delay ramp delivers one spike per ms, so the bias population alone gives a
hidden neuron about 3.75 * 0.6 * `XOR_WEIGHT_SCALE` pA with 80 % excitatory
columns. 2000 pA per unit puts that near ten times rheobase: hidden neurons fire
from about 5 ms, before the 10 ms target, even when several early bias columns
are inhibitory. `XOR_INIT_SIGMA` spreads the hidden neurons' responses to the
two input populations.
"""
XOR_EPOCH = float(os.environ.get("NORMAD_XOR_EPOCH", 30.0))
XOR_POPULATION_SIZE = int(os.environ.get("NORMAD_XOR_POPULATION_SIZE", 18))
XOR_INPUT_ONSET = float(os.environ.get("NORMAD_XOR_INPUT_ONSET", 6.0))
XOR_RAMP_STEP = 1.0
XOR_EARLY_SPIKE = 10.0
XOR_LATE_SPIKE = 16.0
XOR_HIDDEN = int(os.environ.get("NORMAD_XOR_HIDDEN", 54))
XOR_WEIGHT_SCALE = float(os.environ.get("NORMAD_XOR_WEIGHT_SCALE", 2000.0))
XOR_INIT_SIGMA = float(os.environ.get("NORMAD_XOR_INIT_SIGMA", 0.5))
XOR_R_O = float(os.environ.get("NORMAD_XOR_R_O", 0.025))
XOR_R_H = float(os.environ.get("NORMAD_XOR_R_H", 0.5))
XOR_MAX_ITERATIONS = int(os.environ.get("NORMAD_XOR_MAX_ITERATIONS", 800))
XOR_CONVERGENCE_C = 1.0
XOR_SEEDS = 20
XOR_SEEDS_FULL = 100

"""
Deep-network experiment and random training problems

Rates are in spikes/s and epochs in ms.
"""
DEEP_TOPOLOGY = os.environ.get("NORMAD_DEEP_TOPOLOGY", "100,50,25,1")
DEEP_MAX_ITERATIONS = int(os.environ.get("NORMAD_DEEP_MAX_ITERATIONS", 6000))
DEEP_MAX_ITERATIONS_FULL = 10000
DEEP_CONVERGENCE_C = 0.98
DEEP_PROBLEMS = 10
DEEP_PROBLEMS_FULL = 100
PROBLEM_INPUT_RATE = float(os.environ.get("NORMAD_PROBLEM_INPUT_RATE", 20.0))
PROBLEM_OUTPUT_RATE = float(os.environ.get("NORMAD_PROBLEM_OUTPUT_RATE", 10.0))
PROBLEM_EPOCH = float(os.environ.get("NORMAD_PROBLEM_EPOCH", 500.0))
PROBLEM_MAX_RESAMPLES = 1000

"""
Random number generation

Every stream is a Philox counter-based generator keyed by a SeedSequence entropy
of [seed, stream, index], so sub-streams are disjoint and reproducible across
platforms.
"""
RNG_ALGORITHM = "numpy.random.Philox via SeedSequence([seed, stream, index])"
RNG_STREAM_INIT = 0
RNG_STREAM_INPUTS = 1
RNG_STREAM_DESIRED = 2

"""
Experiment runner

Ablation modes name which layers stay plastic. `RUN_WORKERS` > 1 runs seeds or
problems in a process pool.
"""
RUN_EXPERIMENTS = ("xor", "deep", "custom")
RUN_ABLATIONS = ("all-layers", "top-two", "output-only", "hidden-frozen")
RUN_ABLATION = os.environ.get("NORMAD_RUN_ABLATION", "all-layers")
RUN_OUT_DIR = os.environ.get("NORMAD_RUN_OUT_DIR", "results")
RUN_WORKERS = int(os.environ.get("NORMAD_RUN_WORKERS", 1))
RUN_ACCEPTANCE = os.environ.get("NORMAD_RUN_ACCEPTANCE", False)

if isinstance(RUN_ACCEPTANCE, str):
    RUN_ACCEPTANCE = True if RUN_ACCEPTANCE.lower() in ("true", "1", "yes") else False

"""
Output file names and checkpoint format
"""
REPORT_FILENAME = "report.json"
RASTER_HEADER = ("neuron_id", "spike_time_ms")
CHECKPOINT_MAGIC = "NORMAD-CHECKPOINT"
CHECKPOINT_VERSION = 1
CHECKPOINT_DTYPE = "<f8"
