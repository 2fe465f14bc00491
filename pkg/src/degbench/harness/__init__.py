"""Experiment harness: configs, sweeps, plots and the CLI."""
