"""
Experiments module: figure reproduction, validation and the CLI.

Main entry point:
    zf-uplink <figure|analytic|montecarlo|validate> [options]
    python -m experiments <subcommand> [options]

Modules:
    - config.py - ExperimentConfig and the key = value / YAML loader
    - figures.py - the seven figure scenarios (CSV per curve + SVG)
    - validation.py - closed form vs oracle checks, JSON-lines report
    - cli.py - argparse front end

Usage:
    # Outage versus threshold for M = 40..100
    zf-uplink figure fig3 --out results/

    # Full oracle-agreement suite
    zf-uplink validate --config configs/default.cfg
"""

from .config import ExperimentConfig, load_config

__all__ = [
    "ExperimentConfig",
    "load_config",
]
