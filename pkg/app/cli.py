# -*- coding: utf-8 -*-

from pathlib import Path

import click

from app import constants
from app.config import resolve_config
from app.exceptions import CheckpointError, ConfigurationError, NormadError
from app.experiments import build_patterns, emit_raster, run_custom, run_deep, run_xor
from app.helpers import get_normad_app
from app.network import forward, load_checkpoint
from app.normad_app import NormadApp

"""
Command-line entry point. Every option can also be set through an environment
variable NORMAD_<COMMAND>_<OPTION>, e.g. NORMAD_RUN_ABLATION=output-only.
"""

EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3

RUNNERS = {
    "xor": run_xor,
    "deep": run_deep,
    "custom": run_custom,
}

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _fail(ctx: click.Context, err: Exception) -> None:
    app = get_normad_app()
    if isinstance(err, (CheckpointError, OSError)):
        app.logger.error(f"cli | I/O error: {err}")
        ctx.exit(EXIT_IO_ERROR)
    app.logger.error(f"cli | configuration error: {err}")
    ctx.exit(EXIT_CONFIG_ERROR)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Logging level; defaults to NORMAD_LOG_LEVEL or INFO.")
def cli(log_level):
    """
    Train multi-layer spiking networks with NormAD and spatio-temporal error
    backpropagation.

    Options may be given as environment variables named
    NORMAD_<COMMAND>_<OPTION>, e.g. NORMAD_RUN_SEED_LIST=0,1,2.
    """
    NormadApp.app()
    if log_level:
        NormadApp.set_log_level(log_level)


@cli.command()
@click.argument("experiment", type=click.Choice(constants.RUN_EXPERIMENTS))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Dotenv file with EXPERIMENT_/LIF_/KERNEL_/LEARN_/INIT_/PROBLEM_/RUN_ keys.")
@click.option("--seed-list", default=None, help="Comma-separated seeds (XOR) or problem seeds (deep, custom).")
@click.option("--ablation", type=click.Choice(constants.RUN_ABLATIONS), default=None,
              help="Which layers stay plastic.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--full", is_flag=True, default=False,
              help="Full-scale run: 100 XOR seeds, or 100 problems and 10000 iterations for deep runs. "
                   "Expect hours rather than minutes.")
@click.option("--workers", type=int, default=None, help="Worker processes for seeds/problems.")
@click.pass_context
def run(ctx, experiment, config_path, seed_list, ablation, out_dir, full, workers):
    """
    Run the xor, deep or custom experiment and write report.json, correlation,
    raster and checkpoint files to the output directory.
    """
    app = get_normad_app()
    overrides = {
        "EXPERIMENT_SEEDS": seed_list,
        "RUN_ABLATION": ablation,
        "RUN_OUT_DIR": out_dir,
        "RUN_WORKERS": workers,
        "EXPERIMENT_FULL": True if full else None,
    }
    try:
        cfg = resolve_config(experiment, config_path, overrides)
        report = RUNNERS[experiment](cfg)
    except (NormadError, OSError) as err:
        _fail(ctx, err)
        return
    click.echo(f"{report.n_converged}/{len(report.results)} converged; report in {Path(cfg.out_dir) / constants.REPORT_FILENAME}")
    app.logger.debug(f"run | finished {experiment}")


@cli.command()
@click.argument("checkpoint", type=click.Path(dir_okay=False))
@click.argument("experiment", type=click.Choice(constants.RUN_EXPERIMENTS))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Config the checkpoint was trained with.")
@click.option("--seed", type=int, default=0, help="Problem seed (deep, custom).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".", help="Output directory.")
@click.pass_context
def replay(ctx, checkpoint, experiment, config_path, seed, out_dir):
    """
    Restore a checkpoint and write the output raster of every training pattern.
    """
    app = get_normad_app()
    try:
        cfg = resolve_config(experiment, config_path, {"EXPERIMENT_SEEDS": [seed]})
        net = load_checkpoint(checkpoint, dt=cfg.dt)
        if net.layer_sizes[0] != cfg.topology[0]:
            raise ConfigurationError("EXPERIMENT_TOPOLOGY", f"checkpoint has {net.layer_sizes[0]} inputs, config {cfg.topology[0]}")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for pattern in build_patterns(cfg, seed):
            path = out / f"replay_{Path(checkpoint).stem}_{pattern.name}.csv"
            emit_raster(forward(net, pattern.inputs, pattern.epoch), path, desired=pattern.desired)
            app.logger.info(f"replay | wrote {path}")
    except (NormadError, OSError) as err:
        _fail(ctx, err)


def main():
    cli(auto_envvar_prefix="NORMAD")
