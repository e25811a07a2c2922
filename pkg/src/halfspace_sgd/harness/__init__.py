"""Experiment harness: config files, sweeps, oracles, figures, CLI."""
