# -*- coding: utf-8 -*-

from dataclasses import dataclass, field, asdict
from pathlib import Path

from dotenv import dotenv_values

from app import constants
from app.exceptions import ConfigurationError
from app.helpers import require_positive
from app.kernels import KernelParams
from app.network import INIT_SCHEMES, InitScheme
from app.neuron import LifParams
from app.normad import LearnConfig

"""
Experiment configuration

A config file is a flat dotenv file. Keys are prefixed by the parameter block
they belong to (EXPERIMENT_, LIF_, KERNEL_, LEARN_, INIT_, PROBLEM_, RUN_).
Values resolve as command-line override > config file > experiment default.
"""


class Config:
    LOGGING_CONFIG = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {'default': {
            'format': '[%(asctime)s] %(levelname)s in %(module)s: %(message)s',
        }},
        'handlers': {'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'default'
        }},
        'root': {
            'level': constants.APP_LOG_LEVEL,
            'handlers': ['stderr']
        }
    }


DATASETS = ("poisson", "xor")


def _as_float(key, raw):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(key, f"expected a number, got {raw!r}")


def _as_int(key, raw):
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(key, f"expected an integer, got {raw!r}")
    if not value.is_integer():
        raise ConfigurationError(key, f"expected an integer, got {raw!r}")
    return int(value)


def _as_int_list(key, raw):
    if isinstance(raw, (list, tuple)):
        return [_as_int(key, v) for v in raw]
    items = [item.strip() for item in str(raw).split(",") if item.strip()]
    if not items:
        raise ConfigurationError(key, "expected a comma-separated list of integers")
    return [_as_int(key, item) for item in items]


def _as_str_list(key, raw):
    if isinstance(raw, (list, tuple)):
        return [str(v).strip() for v in raw]
    return [item.strip() for item in str(raw).split(",") if item.strip()]


def _as_str(key, raw):
    return str(raw).strip()


def _as_bool(key, raw):
    if isinstance(raw, bool):
        return raw
    return str(raw).strip().lower() in ("true", "1", "yes")


CONFIG_KEYS = {
    "EXPERIMENT_TOPOLOGY": _as_int_list,
    "EXPERIMENT_SEEDS": _as_int_list,
    "EXPERIMENT_DT": _as_float,
    "EXPERIMENT_EPOCH": _as_float,
    "EXPERIMENT_DATASET": _as_str,
    "EXPERIMENT_INIT": _as_str_list,
    "EXPERIMENT_FULL": _as_bool,
    "LIF_CM": _as_float,
    "LIF_GL": _as_float,
    "LIF_EL": _as_float,
    "LIF_VT": _as_float,
    "LIF_DELTA_ABS": _as_float,
    "KERNEL_TAU1": _as_float,
    "KERNEL_TAU2": _as_float,
    "KERNEL_TAU_L_PRIME": _as_float,
    "KERNEL_TAU_LP": _as_float,
    "LEARN_R_O": _as_float,
    "LEARN_R_H": _as_float,
    "LEARN_MAX_ITERATIONS": _as_int,
    "LEARN_CONVERGENCE_C": _as_float,
    "LEARN_EPS_SLOPE": _as_float,
    "LEARN_SCHEDULE": _as_str,
    "LEARN_SCHEDULE_BASE": _as_float,
    "LEARN_SCHEDULE_HORIZON": _as_float,
    "LEARN_RATE_MIN_FACTOR": _as_float,
    "LEARN_RATE_MAX_FACTOR": _as_float,
    "LEARN_BACKPROP_FORM": _as_str,
    "INIT_MU": _as_float,
    "INIT_SIGMA": _as_float,
    "INIT_W_MAX": _as_float,
    "INIT_EXCITATORY_FRACTION": _as_float,
    "NETWORK_WEIGHT_SCALE": _as_float,
    "PROBLEM_INPUT_RATE": _as_float,
    "PROBLEM_OUTPUT_RATE": _as_float,
    "RUN_ABLATION": _as_str,
    "RUN_OUT_DIR": _as_str,
    "RUN_WORKERS": _as_int,
}


@dataclass
class ExperimentConfig:
    """
    Fully resolved configuration of one experiment run. Every field has a value;
    `to_dict` is echoed into the run report.
    """

    experiment: str
    topology: list
    seeds: list
    dt: float
    epoch: float
    lif: LifParams
    kernels: KernelParams
    learn: LearnConfig
    init: list
    weight_scale: float = constants.NETWORK_WEIGHT_SCALE
    dataset: str = "poisson"
    input_rate: float = constants.PROBLEM_INPUT_RATE
    output_rate: float = constants.PROBLEM_OUTPUT_RATE
    ablation: str = constants.RUN_ABLATION
    out_dir: str = constants.RUN_OUT_DIR
    workers: int = constants.RUN_WORKERS
    full: bool = False
    rng: str = field(default=constants.RNG_ALGORITHM)

    def __post_init__(self):
        if self.experiment not in constants.RUN_EXPERIMENTS:
            raise ConfigurationError("experiment", f"unknown experiment {self.experiment!r}; expected one of {constants.RUN_EXPERIMENTS}")
        if self.ablation not in constants.RUN_ABLATIONS:
            raise ConfigurationError("RUN_ABLATION", f"unknown ablation {self.ablation!r}; expected one of {constants.RUN_ABLATIONS}")
        if self.dataset not in DATASETS:
            raise ConfigurationError("EXPERIMENT_DATASET", f"unknown dataset {self.dataset!r}; expected one of {DATASETS}")
        if len(self.topology) < 2 or min(self.topology) < 1 or self.topology[-1] != 1:
            raise ConfigurationError("EXPERIMENT_TOPOLOGY", f"expected N_0,...,1 with positive sizes, got {self.topology}")
        uses_xor = self.experiment == "xor" or self.dataset == "xor"
        if uses_xor and self.topology[0] != 3 * constants.XOR_POPULATION_SIZE:
            raise ConfigurationError(
                "EXPERIMENT_TOPOLOGY", f"the XOR encoding needs {3 * constants.XOR_POPULATION_SIZE} inputs, got {self.topology[0]}"
            )
        if not self.seeds:
            raise ConfigurationError("EXPERIMENT_SEEDS", "at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("EXPERIMENT_SEEDS", f"seeds must be distinct, got {self.seeds}")
        if any(seed < 0 for seed in self.seeds):
            raise ConfigurationError("EXPERIMENT_SEEDS", "seeds must be non-negative")
        require_positive("EXPERIMENT_DT", self.dt)
        require_positive("EXPERIMENT_EPOCH", self.epoch)
        require_positive("NETWORK_WEIGHT_SCALE", self.weight_scale)
        require_positive("PROBLEM_INPUT_RATE", self.input_rate, allow_zero=True)
        require_positive("PROBLEM_OUTPUT_RATE", self.output_rate, allow_zero=True)
        if self.workers < 1:
            raise ConfigurationError("RUN_WORKERS", f"must be >= 1, got {self.workers}")
        if len(self.init) != len(self.topology) - 1:
            raise ConfigurationError("EXPERIMENT_INIT", f"{len(self.init)} schemes for {len(self.topology) - 1} layers")
        if uses_xor and self.epoch <= constants.XOR_LATE_SPIKE:
            raise ConfigurationError("EXPERIMENT_EPOCH", f"the XOR epoch must cover the {constants.XOR_LATE_SPIKE} ms target")

    @property
    def n_layers(self) -> int:
        return len(self.topology) - 1

    def to_dict(self) -> dict:
        return asdict(self)


def _experiment_defaults(experiment: str, full: bool) -> dict:
    if experiment == "xor":
        seeds = constants.XOR_SEEDS_FULL if full else constants.XOR_SEEDS
        return {
            "EXPERIMENT_TOPOLOGY": [3 * constants.XOR_POPULATION_SIZE, constants.XOR_HIDDEN, 1],
            "EXPERIMENT_SEEDS": list(range(seeds)),
            "EXPERIMENT_EPOCH": constants.XOR_EPOCH,
            "EXPERIMENT_DATASET": "xor",
            "EXPERIMENT_INIT": ["gaussian-excinh", "zeros"],
            "LIF_DELTA_ABS": constants.LIF_DELTA_ABS_XOR,
            "NETWORK_WEIGHT_SCALE": constants.XOR_WEIGHT_SCALE,
            "INIT_SIGMA": constants.XOR_INIT_SIGMA,
            "LEARN_R_O": constants.XOR_R_O,
            "LEARN_R_H": constants.XOR_R_H,
            "LEARN_MAX_ITERATIONS": constants.XOR_MAX_ITERATIONS,
            "LEARN_CONVERGENCE_C": constants.XOR_CONVERGENCE_C,
        }
    topology = _as_int_list("EXPERIMENT_TOPOLOGY", constants.DEEP_TOPOLOGY)
    problems = constants.DEEP_PROBLEMS_FULL if full else constants.DEEP_PROBLEMS
    iterations = constants.DEEP_MAX_ITERATIONS_FULL if full else constants.DEEP_MAX_ITERATIONS
    return {
        "EXPERIMENT_TOPOLOGY": topology,
        "EXPERIMENT_SEEDS": list(range(problems)),
        "EXPERIMENT_EPOCH": constants.PROBLEM_EPOCH,
        "EXPERIMENT_DATASET": "poisson",
        "EXPERIMENT_INIT": ["uniform-excinh"] * (len(topology) - 2) + ["zeros"],
        "LIF_DELTA_ABS": constants.LIF_DELTA_ABS,
        "LEARN_MAX_ITERATIONS": iterations,
        "LEARN_CONVERGENCE_C": constants.DEEP_CONVERGENCE_C,
    }


def read_config_file(path) -> dict:
    """
    Read a dotenv-format experiment config file.

    Args:
        path: The file to read.

    Returns:
        dict: Raw key/value strings, validated against the known keys.

    Raises:
        ConfigurationError: If a key is unknown or has no value.
        OSError: If the file cannot be read.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file {path} not found")
    values = dotenv_values(path)
    for key, value in values.items():
        if key not in CONFIG_KEYS:
            raise ConfigurationError(key, f"unknown config key in {path}")
        if value is None:
            raise ConfigurationError(key, f"no value given in {path}")
    return dict(values)


def resolve_config(experiment: str, path=None, overrides: dict = None) -> ExperimentConfig:
    """
    Resolve an experiment configuration from defaults, an optional config file
    and command-line overrides, in increasing order of precedence.

    Args:
        experiment (str): One of xor, deep, custom.
        path: Optional dotenv config file.
        overrides (dict): Config keys set on the command line; None values are
            ignored.

    Returns:
        ExperimentConfig: The resolved configuration.

    Raises:
        ConfigurationError: If a key is unknown or a value is invalid.
    """
    if experiment not in constants.RUN_EXPERIMENTS:
        raise ConfigurationError("experiment", f"unknown experiment {experiment!r}; expected one of {constants.RUN_EXPERIMENTS}")
    raw = read_config_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigurationError(key, "unknown config key")
        if value is not None:
            raw[key] = value

    full = _as_bool("EXPERIMENT_FULL", raw.get("EXPERIMENT_FULL", False))
    values = _experiment_defaults(experiment, full)
    if "EXPERIMENT_TOPOLOGY" in raw and "EXPERIMENT_INIT" not in raw:
        # derive per-layer schemes for a topology given without them
        sizes = _as_int_list("EXPERIMENT_TOPOLOGY", raw["EXPERIMENT_TOPOLOGY"])
        hidden = values["EXPERIMENT_INIT"][0]
        values["EXPERIMENT_INIT"] = [hidden] * max(0, len(sizes) - 2) + ["zeros"]
    for key, value in raw.items():
        values[key] = CONFIG_KEYS[key](key, value)

    def get(key, default):
        return values.get(key, default)

    lif = LifParams(
        cm=get("LIF_CM", constants.LIF_CM),
        g_l=get("LIF_GL", constants.LIF_GL),
        e_l=get("LIF_EL", constants.LIF_EL),
        v_t=get("LIF_VT", constants.LIF_VT),
        delta_abs=get("LIF_DELTA_ABS", constants.LIF_DELTA_ABS),
    )
    kernels = KernelParams(
        tau1=get("KERNEL_TAU1", constants.KERNEL_TAU1),
        tau2=get("KERNEL_TAU2", constants.KERNEL_TAU2),
        tau_l=lif.tau_l,
        tau_l_prime=get("KERNEL_TAU_L_PRIME", min(constants.KERNEL_TAU_L_PRIME, lif.tau_l)),
        tau_lp=get("KERNEL_TAU_LP", constants.KERNEL_TAU_LP),
        cm=lif.cm,
    )
    topology = values["EXPERIMENT_TOPOLOGY"]
    learn = LearnConfig(
        r_o=get("LEARN_R_O", constants.LEARN_R_O),
        r_h=get("LEARN_R_H", constants.LEARN_R_H),
        max_iterations=values["LEARN_MAX_ITERATIONS"],
        convergence_c=values["LEARN_CONVERGENCE_C"],
        eps_slope=get("LEARN_EPS_SLOPE", constants.LEARN_EPS_SLOPE),
        schedule=get("LEARN_SCHEDULE", constants.LEARN_SCHEDULE),
        schedule_base=get("LEARN_SCHEDULE_BASE", constants.LEARN_SCHEDULE_BASE),
        schedule_horizon=get("LEARN_SCHEDULE_HORIZON", constants.LEARN_SCHEDULE_HORIZON),
        rate_min_factor=get("LEARN_RATE_MIN_FACTOR", constants.LEARN_RATE_MIN_FACTOR),
        rate_max_factor=get("LEARN_RATE_MAX_FACTOR", constants.LEARN_RATE_MAX_FACTOR),
        backprop_form=get("LEARN_BACKPROP_FORM", constants.LEARN_BACKPROP_FORM),
        trainable=trainable_layers(get("RUN_ABLATION", constants.RUN_ABLATION), len(topology) - 1),
    )
    init = []
    for name in values["EXPERIMENT_INIT"]:
        if name not in INIT_SCHEMES:
            raise ConfigurationError("EXPERIMENT_INIT", f"unknown scheme {name!r}; expected one of {INIT_SCHEMES}")
        init.append(InitScheme(
            name=name,
            mu=get("INIT_MU", constants.INIT_MU),
            sigma=get("INIT_SIGMA", constants.INIT_SIGMA),
            w_max=get("INIT_W_MAX", constants.INIT_W_MAX),
            excitatory_fraction=get("INIT_EXCITATORY_FRACTION", constants.INIT_EXCITATORY_FRACTION),
        ))
    return ExperimentConfig(
        experiment=experiment,
        topology=topology,
        seeds=values["EXPERIMENT_SEEDS"],
        dt=get("EXPERIMENT_DT", constants.SIM_DT),
        epoch=values["EXPERIMENT_EPOCH"],
        lif=lif,
        kernels=kernels,
        learn=learn,
        init=init,
        weight_scale=get("NETWORK_WEIGHT_SCALE", constants.NETWORK_WEIGHT_SCALE),
        dataset=values["EXPERIMENT_DATASET"],
        input_rate=get("PROBLEM_INPUT_RATE", constants.PROBLEM_INPUT_RATE),
        output_rate=get("PROBLEM_OUTPUT_RATE", constants.PROBLEM_OUTPUT_RATE),
        ablation=get("RUN_ABLATION", constants.RUN_ABLATION),
        out_dir=get("RUN_OUT_DIR", constants.RUN_OUT_DIR),
        workers=get("RUN_WORKERS", constants.RUN_WORKERS),
        full=full,
    )


def trainable_layers(ablation: str, n_layers: int) -> tuple:
    """
    Per-layer plasticity flags (layer 1 first) for an ablation mode.
    `hidden-frozen` and `output-only` both leave only the output layer plastic;
    the former is the name used for the two-layer XOR ablation.
    """
    if ablation == "all-layers":
        return (True,) * n_layers
    if ablation == "top-two":
        return tuple(l >= n_layers - 2 for l in range(n_layers))
    if ablation in ("output-only", "hidden-frozen"):
        return tuple(l == n_layers - 1 for l in range(n_layers))
    raise ConfigurationError("RUN_ABLATION", f"unknown ablation {ablation!r}; expected one of {constants.RUN_ABLATIONS}")
