"""Command-line entry point: ``latticefibers <mode> --config <path>``."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .experiment import MODES, ConfigError, load_config, run, write_outputs


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("mode", type=click.Choice(MODES))
@click.option("--config", "config_path", required=True,
              help="JSON config; a bare name such as appendix.json also finds the shipped configs.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker processes (capped by LATTICEFIBERS_THREADS).")
@click.option("--stable-output", is_flag=True, help="Drop timings so reports are byte-identical.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: config output_dir, else ./latticefibers-out).")
@click.option("--no-plots", is_flag=True, help="Skip SVG figures.")
def main(mode, config_path, jobs, stable_output, out_dir, no_plots):
    """Run a lattice fiber experiment and write report.json, tables/ and plots/."""
    try:
        cfg = load_config(config_path, mode=mode)
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        report = run(cfg, jobs=jobs)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out = Path(out_dir or cfg.output_dir or "latticefibers-out")
    paths = write_outputs(report, out, stable=stable_output, plots=cfg.plots and not no_plots)
    for w in report.warnings:
        click.echo(f"warning: {w}", err=True)
    click.echo(f"{report.mode}: {len(report.results)} tasks, {report.n_failed} failed -> {paths['report']}")


if __name__ == "__main__":
    main()
