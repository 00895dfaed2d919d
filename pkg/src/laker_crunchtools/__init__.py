"""LAKER CrunchTools - learned preconditioning for attention kernel regression.

Solves the ill-conditioned system (lambda I + G) alpha = y that arises when
radio maps are reconstructed with an exponential attention kernel. A
preconditioner is learned from random directions pushed through the system
and used inside conjugate gradient; gradient descent, Jacobi PCG, a dense
Cholesky reference and a Gaussian-process baseline are included for
comparison.

Usage:
    laker-crunchtools run --config experiment.json --out results/

    laker-crunchtools demo-example3

    laker-crunchtools spectrum --n 500

    laker-crunchtools serve --transport stdio

    python -m laker_crunchtools ...

Environment Variables:
    LAKER_THREADS: Optional. Concurrent sweep cells (default: 1).
    LAKER_LOG_LEVEL: Optional. Logging level (default: WARNING).
    LAKER_OUTPUT_DIR: Optional. Default output directory (default: results).
"""

import sys

from .cli import cli_main

__version__ = "0.1.0"
__all__ = ["cli_main", "main"]


def main() -> None:
    """Main entry point for the command-line tool."""
    sys.exit(cli_main())
