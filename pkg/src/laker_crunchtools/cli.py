"""Command-line interface.

Subcommands:
    run             Run an experiment sweep from a JSON config
    demo-example3   Run and check the three-point worked example
    spectrum        Conditioning of an n-point system before and after
                    preconditioning
    serve           Run the MCP server

Exit codes: 0 on success, 1 on a configuration or usage error, 2 when a
sweep cell or an example check failed.
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

from .config import get_config
from .errors import ConfigurationError, UserError
from .models import MAX_SPECTRUM_SIZE, METHODS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigurationError."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _spectrum_size(value: str) -> int:
    n = int(value)
    if not 2 <= n <= MAX_SPECTRUM_SIZE:
        raise argparse.ArgumentTypeError(f"must be between 2 and {MAX_SPECTRUM_SIZE}, got {n}")
    return n


def build_parser() -> CliParser:
    parser = CliParser(
        prog="laker-crunchtools",
        description="Learned preconditioning for attention kernel regression",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    run = sub.add_parser("run", help="Run an experiment sweep")
    run.add_argument("--config", required=True, type=Path, help="Experiment JSON file")
    run.add_argument("--sizes", type=int, nargs="+", help="Override problem sizes")
    run.add_argument("--methods", nargs="+", choices=METHODS, help="Override methods")
    run.add_argument("--seed", type=int, nargs="+", dest="seeds", help="Override seeds")
    run.add_argument("--out", type=Path, help="Output directory")

    sub.add_parser("demo-example3", help="Run and check the three-point worked example")

    spectrum = sub.add_parser("spectrum", help="Conditioning of an n-point system")
    spectrum.add_argument("--n", type=_spectrum_size, required=True, help="Number of positions")
    spectrum.add_argument("--lambda", type=float, default=1e-2, dest="lambda_")
    spectrum.add_argument("--gamma", type=float, default=1e-1)
    spectrum.add_argument("--seed", type=int, default=0)

    serve = sub.add_parser("serve", help="Run the MCP server")
    serve.add_argument(
        "--transport",
        choices=["stdio", "sse", "streamable-http"],
        default="stdio",
        help="Transport protocol (default: stdio)",
    )
    serve.add_argument(
        "--host",
        default="127.0.0.1",
        help="Host to bind to for HTTP transports (default: 127.0.0.1)",
    )
    serve.add_argument(
        "--port",
        type=int,
        default=8015,
        help="Port to bind to for HTTP transports (default: 8015)",
    )
    return parser


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3e}"
    return str(value)


def _cmd_run(args: argparse.Namespace) -> int:
    from .bench import MapKey, emit_maps, emit_tables, run_experiment, summarize
    from .cartography import RadioMap
    from .tools import load_experiment

    base = load_experiment(args.config)
    overrides = {
        key: value
        for key, value in (("sizes", args.sizes), ("methods", args.methods), ("seeds", args.seeds))
        if value is not None
    }
    config = (
        load_experiment({**base.model_dump(by_alias=True), **overrides}) if overrides else base
    )
    out = args.out or config.output_dir or get_config().output_dir

    maps: dict[MapKey, RadioMap] | None = {} if config.write_maps else None
    rows = run_experiment(config, maps=maps)
    emit_tables(rows, out, config)
    if maps:
        emit_maps(maps, out)

    columns = ("n", "method", "seeds", "iters_to_target", "obj_gap", "residual", "rmse")
    print("  ".join(f"{c:>15}" for c in columns))
    for cell in summarize(rows):
        print("  ".join(f"{_fmt(cell.get(c)):>15}" for c in columns))
    failed = [r for r in rows if r.status == "failed"]
    for r in failed:
        print(f"FAILED n={r.n} method={r.method} seed={r.seed}: {r.error}", file=sys.stderr)
    print(f"Results written to {out}")
    return EXIT_FAILED if failed else EXIT_OK


def _cmd_example(args: argparse.Namespace) -> int:
    from .tools import worked_example

    result = worked_example()
    print("G =")
    for row in result["kernel"]:
        print("  " + "  ".join(f"{v:8.4f}" for v in row))
    print("alpha = " + ", ".join(f"{v:.4f}" for v in result["alpha"]))
    print(f"PCG: {result['pcg_iterations']} iterations, residual {result['pcg_residual']:.2e}")
    print("G(x*, x_i) = " + ", ".join(f"{v:.4f}" for v in result["cross_kernel"]))
    print(
        f"r_hat(x*) = {result['prediction_dbm']:.2f} dBm "
        f"(ground truth {result['ground_truth_dbm']} dBm)"
    )
    for name, ok in result["checks"].items():
        print(f"  {name:<14}{'ok' if ok else 'MISMATCH'}")
    print("PASS" if result["passed"] else "FAIL")
    return EXIT_OK if result["passed"] else EXIT_FAILED


def _cmd_spectrum(args: argparse.Namespace) -> int:
    from .tools import spectrum_summary

    result = spectrum_summary(n=args.n, lambda_=args.lambda_, gamma=args.gamma, seed=args.seed)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import mcp

    if args.transport == "stdio":
        mcp.run()
    else:
        mcp.run(transport=args.transport, host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "demo-example3": _cmd_example,
    "spectrum": _cmd_spectrum,
    "serve": _cmd_serve,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=get_config().log_level,
            stream=sys.stderr,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except UserError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED
