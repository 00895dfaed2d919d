"""Toolkit operations exposed as JSON-ready functions.

Each tool returns a plain dict so the same function serves the CLI and the
MCP server.
"""

from .example import worked_example
from .experiment import load_experiment, run_sweep
from .spectrum import spectrum_summary

__all__ = [
    "load_experiment",
    "run_sweep",
    "spectrum_summary",
    "worked_example",
]
