"""Utility functions for intentseq."""

import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Any

import yaml

from .errors import CheckpointError, IntentSeqError, IoFailureError
from .models.intent import RunManifest

logger = logging.getLogger(__name__)

THREADS_ENV = "INTENTSEQ_THREADS"
LOG_LEVEL_ENV = "INTENTSEQ_LOG_LEVEL"
_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def format_error(error: Exception) -> str:
    """Format an error message for display.

    Args:
        error: Exception to format

    Returns:
        Formatted error message
    """
    error_type = type(error).__name__
    error_message = str(error)

    if isinstance(error, CheckpointError):
        return f"Checkpoint Error ({error_type}): {error_message}"
    elif isinstance(error, IntentSeqError):
        return f"{error_type}: {error_message}"
    elif isinstance(error, FileNotFoundError):
        return f"File Not Found: {error.filename or error_message}"
    elif isinstance(error, PermissionError):
        return f"Permission Denied: {error.filename or error_message}"
    else:
        return f"{error_type}: {error_message}"


def validate_environment() -> dict[str, Any]:
    """Validate environment configuration.

    Returns:
        Dictionary with validation results and the resolved settings
    """
    validation_results: dict[str, Any] = {"valid": True, "errors": [], "warnings": [], "settings": {}}
    cores = os.cpu_count() or 1

    threads_raw = os.getenv(THREADS_ENV)
    if threads_raw is None or not threads_raw.strip():
        validation_results["settings"]["threads"] = cores
    else:
        try:
            threads = int(threads_raw)
        except ValueError:
            threads = 0
        if threads < 1:
            validation_results["errors"].append(f"{THREADS_ENV} must be a positive integer, got {threads_raw!r}")
            validation_results["valid"] = False
            validation_results["settings"]["threads"] = cores
        else:
            if threads > cores:
                validation_results["warnings"].append(
                    f"{THREADS_ENV}={threads} exceeds the {cores} available core(s)"
                )
            validation_results["settings"]["threads"] = threads

    level = os.getenv(LOG_LEVEL_ENV, "INFO").strip().upper()
    if level not in _LOG_LEVELS:
        validation_results["errors"].append(f"{LOG_LEVEL_ENV} must be one of {', '.join(_LOG_LEVELS)}, got {level!r}")
        validation_results["valid"] = False
        level = "INFO"
    validation_results["settings"]["log_level"] = level

    return validation_results


def resolve_thread_count() -> int:
    """Number of data-parallel workers allowed by the environment."""
    validation = validate_environment()
    for error in validation["errors"]:
        logger.warning(f"Ignoring invalid setting: {error}")
    return int(validation["settings"]["threads"])


def setup_logging(level: str = "INFO") -> None:
    """Setup logging configuration.

    Args:
        level: Logging level
    """
    log_level = getattr(logging, level.upper(), logging.INFO)

    # stdout carries the human-readable summaries
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write a file through a temporary sibling and an atomic rename.

    Raises:
        IoFailureError: If the directory is not writable
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise IoFailureError(f"Could not write {path}: {e.strerror or e}") from e


def manifest_path_for(artifact: Path) -> Path:
    """Location of the run manifest that accompanies an artifact."""
    artifact = Path(artifact)
    return artifact.with_name(f"{artifact.name}.manifest.yaml")


def write_run_manifest(manifest: RunManifest, artifact: Path) -> Path:
    """Write ``manifest`` as YAML next to ``artifact``.

    Returns:
        Path of the manifest file
    """
    target = manifest_path_for(artifact)
    text = yaml.safe_dump(manifest.model_dump(mode="json"), sort_keys=False)
    atomic_write_bytes(target, text.encode("utf-8"))
    logger.debug(f"Wrote run manifest {target}")
    return target


def read_run_manifest(path: Path) -> RunManifest:
    """Load a manifest written by ``write_run_manifest``."""
    with open(path, encoding="utf-8") as f:
        return RunManifest.model_validate(yaml.safe_load(f))
