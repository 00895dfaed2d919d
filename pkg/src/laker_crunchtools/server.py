"""FastMCP server setup for the LAKER toolkit.

This module creates the MCP server and registers the toolkit operations.
Tools are synchronous; FastMCP runs them in a worker thread.
"""

import logging
from typing import Any

from fastmcp import FastMCP

from .tools import run_sweep, spectrum_summary, worked_example

logger = logging.getLogger(__name__)

mcp = FastMCP(
    name="laker-crunchtools",
    version="0.1.0",
    instructions=(
        "Learned preconditioning for attention kernel regression and radio-map "
        "reconstruction: worked example, spectrum analysis and experiment sweeps."
    ),
)


@mcp.tool()
def worked_example_tool() -> dict[str, Any]:
    """Run the three-point kernel regression example and check it.

    Returns:
        Kernel matrix, coefficients, cross kernel, prediction and check results
    """
    return worked_example()


@mcp.tool()
def spectrum_summary_tool(
    n: int,
    lambda_: float = 1e-2,
    gamma: float = 1e-1,
    seed: int = 0,
) -> dict[str, Any]:
    """Eigenvalue summary and condition numbers for an n-point system.

    Args:
        n: Number of measurement positions (2 to 5000)
        lambda_: Ridge regularization (default: 0.01)
        gamma: CCCP regularization (default: 0.1)
        seed: Random seed (default: 0)

    Returns:
        Spectrum statistics and raw, learned and Jacobi condition numbers
    """
    return spectrum_summary(n=n, lambda_=lambda_, gamma=gamma, seed=seed)


@mcp.tool()
def run_sweep_tool(
    config: dict[str, Any],
    output_dir: str | None = None,
) -> dict[str, Any]:
    """Run an experiment sweep and write its result tables.

    Args:
        config: Experiment definition; keys are the experiment field names
            (sizes, lambda, gamma, seeds, methods, ...)
        output_dir: Directory for the CSV and JSON outputs

    Returns:
        Written files, per-cell medians over seeds and failed cells
    """
    return run_sweep(config, output_dir=output_dir)
