"""Sweep tool.

Runs an experiment sweep from a JSON-compatible definition, writes the
result tables and returns the per-cell medians.
"""

from pathlib import Path
from typing import Any

from pydantic import ValidationError as PydanticValidationError

from ..bench import MapKey, emit_maps, emit_tables, run_experiment, summarize
from ..cartography import RadioMap
from ..config import get_config
from ..errors import ConfigurationError
from ..models import ExperimentConfig


def load_experiment(definition: dict[str, Any] | str | Path) -> ExperimentConfig:
    """Validate an experiment definition given as a dict, JSON text or path.

    Raises:
        ConfigurationError: If the file is missing or the definition invalid
    """
    try:
        if isinstance(definition, dict):
            return ExperimentConfig.model_validate(definition)
        if isinstance(definition, Path):
            try:
                text = definition.read_text()
            except OSError as e:
                raise ConfigurationError(
                    f"Cannot read experiment config {definition}: {e.strerror}"
                ) from e
            return ExperimentConfig.model_validate_json(text)
        return ExperimentConfig.model_validate_json(definition)
    except PydanticValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigurationError(f"Invalid experiment config: {problems}") from e


def run_sweep(
    definition: dict[str, Any] | str | Path,
    output_dir: str | None = None,
) -> dict[str, Any]:
    """Run a sweep and write numerical.csv, reconstruction.csv and summary.json.

    Args:
        definition: Experiment definition (dict, JSON text or file path)
        output_dir: Overrides the definition's output_dir

    Returns:
        Output directory, written files, per-cell medians and failed cells
    """
    config = load_experiment(definition)
    out = Path(output_dir) if output_dir else config.output_dir or get_config().output_dir
    maps: dict[MapKey, RadioMap] | None = {} if config.write_maps else None
    rows = run_experiment(config, maps=maps)
    written = emit_tables(rows, out, config)
    if maps:
        written.extend(emit_maps(maps, out))
    failed = [r for r in rows if r.status == "failed"]
    return {
        "output_dir": str(out),
        "files": [p.name for p in written],
        "rows": len(rows),
        "failed_cells": [
            {"n": r.n, "method": r.method, "seed": r.seed, "error": r.error} for r in failed
        ],
        "summary": summarize(rows),
    }
