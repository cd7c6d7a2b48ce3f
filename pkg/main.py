#!/usr/bin/env python3
"""MMTG experience-to-text toolkit - Entry point."""
import functools
import os
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import click
from colorama import Fore, Style, init

from config import app_config
from src.autodiff.gradcheck import DEFAULT_EPS
from src.cli.run_config import ABLATIONS, load_run_config
from src.cli.runner import ExperimentRunner
from src.training.gradcheck_suite import DEFAULT_SEEDS, DEFAULT_TOLERANCE
from src.utils.errors import MMTGError, ValidationError
from src.utils.logging_setup import setup_logging

# Initialize colorama
init(autoreset=True)

CONFIG_OPTION = click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Flat YAML run configuration (MMTG_<KEY> environment variables override it)",
)


def print_banner():
    """Print application banner."""
    click.echo(f"{Fore.CYAN}{'=' * 44}")
    click.echo(f"{Fore.CYAN}║   {Fore.WHITE}MMTG Experience-to-Text{Fore.CYAN}              ║")
    click.echo(f"{Fore.CYAN}║   {Fore.WHITE}Multimodal Passage Generation{Fore.CYAN}        ║")
    click.echo(f"{Fore.CYAN}{'=' * 44}{Style.RESET_ALL}")
    click.echo()


def handle_errors(command):
    """Map package errors to click exits: validation → 2, anything else → 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ValidationError as e:
            raise click.UsageError(str(e)) from e
        except MMTGError as e:
            raise click.ClickException(f"{type(e).__name__}: {e}") from e

    return wrapper


def default_path(*parts: str) -> Path:
    return Path(app_config.output_dir, *parts)


@click.group()
@click.version_option(version="0.1.0")
@click.option("--log-level", default=None, help="Logging level (default: MMTG_LOG_LEVEL or INFO)")
def cli(log_level):
    """MMTG - generate passages from ordered image-text experiences."""
    setup_logging(log_level or app_config.log_level)


@cli.command("gen-data")
@CONFIG_OPTION
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Output directory",
)
@handle_errors
def gen_data(config_path, out_dir):
    """Generate the synthetic corpus: train.jsonl (all levels), test.jsonl, stats.json."""
    print_banner()
    config = load_run_config(config_path)
    ExperimentRunner(config).gen_data(Path(out_dir) if out_dir else default_path("data"))


@cli.command()
@CONFIG_OPTION
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Curriculum dataset (train.jsonl)")
@click.option(
    "--out",
    "checkpoint",
    type=click.Path(dir_okay=False),
    default=None,
    help="Checkpoint path",
)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Metrics trace path (default: next to the checkpoint)")
@handle_errors
def train(config_path, data_path, checkpoint, trace_path):
    """Train a model, honouring the ablation flags of the config."""
    print_banner()
    config = load_run_config(config_path)
    checkpoint = Path(checkpoint) if checkpoint else default_path("model.ckpt")
    trace_path = Path(trace_path) if trace_path else checkpoint.with_suffix(".trace.jsonl")
    ExperimentRunner(config).train(Path(data_path), checkpoint, trace_path)


@cli.command()
@CONFIG_OPTION
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Experience sequences, with or without targets")
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Generated passages",
)
@click.option("--samples", type=int, default=None, help="Passages per input (default 10)")
@click.option("--seed", type=int, default=None, help="Root sampling seed")
@click.option("--top-k", type=int, default=None)
@click.option("--top-p", type=float, default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--repetition-penalty", type=float, default=None)
@handle_errors
def generate(config_path, checkpoint, input_path, out_path, samples, seed, top_k, top_p, temperature,
             repetition_penalty):
    """Sample passages for each input sequence."""
    print_banner()
    config = load_run_config(config_path).updated(
        samples_per_input=samples,
        seed=seed,
        top_k=top_k,
        top_p=top_p,
        temperature=temperature,
        repetition_penalty=repetition_penalty,
    )
    out_path = Path(out_path) if out_path else default_path("generated.jsonl")
    ExperimentRunner(config).generate(Path(checkpoint), Path(input_path), out_path)


@cli.command()
@CONFIG_OPTION
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Test passages with references (test.jsonl)")
@click.option(
    "--out",
    "report_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Report path",
)
@handle_errors
def evaluate(config_path, checkpoint, test_path, report_path):
    """Report BLEU, Distinct and NNR for a checkpoint."""
    print_banner()
    config = load_run_config(config_path)
    report_path = Path(report_path) if report_path else default_path("report.json")
    ExperimentRunner(config).evaluate(Path(checkpoint), Path(test_path), report_path)


@cli.command()
@click.option(
    "--tol",
    type=float,
    default=DEFAULT_TOLERANCE,
    show_default=True,
    help="Max relative error",
)
@click.option(
    "--eps",
    type=float,
    default=DEFAULT_EPS,
    show_default=True,
    help="Central-difference step",
)
@click.option(
    "--seeds",
    type=int,
    default=DEFAULT_SEEDS,
    show_default=True,
    help="Random seeds to check",
)
@click.option(
    "--self-test",
    is_flag=True,
    help="Check that a deliberately wrong gradient is caught",
)
@handle_errors
def gradcheck(tol, eps, seeds, self_test):
    """Finite-difference check of every parameter group."""
    print_banner()
    runner = ExperimentRunner(load_run_config(None))
    if not runner.gradcheck(tol=tol, eps=eps, seeds=seeds, run_self_test=self_test):
        raise click.ClickException("gradient check failed")


@cli.command()
@CONFIG_OPTION
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--variant", "variants", multiple=True, type=click.Choice(list(ABLATIONS)),
              help="Variants to run (default: all)")
@handle_errors
def ablate(config_path, data_path, test_path, out_dir, variants):
    """Train and evaluate the full model and its ablations side by side."""
    print_banner()
    config = load_run_config(config_path)
    out_dir = Path(out_dir) if out_dir else default_path("ablation")
    ExperimentRunner(config).ablate(Path(data_path), Path(test_path), out_dir, variants or None)


if __name__ == "__main__":
    cli()
