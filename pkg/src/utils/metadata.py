"""
Provenance metadata: data hashes and run descriptors embedded in checkpoints
and reports.
"""
import hashlib
import json
import platform
from typing import Any, Dict, Optional

import numpy as np
import torch


def canonical_json(data: Any) -> str:
    """JSON text with sorted keys and no whitespace, stable across runs."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def taskset_hash(taskset) -> str:
    """
    Content hash of a task set.

    Args:
        taskset: TaskSet to hash

    Returns:
        Hex sha256 over the canonical JSON of every task, in set order
    """
    digest = hashlib.sha256()
    digest.update(taskset.split.encode("utf-8"))
    for task in taskset:
        digest.update(task.task_id.encode("utf-8"))
        digest.update(canonical_json(task.to_json()).encode("utf-8"))
    return digest.hexdigest()


def run_metadata(
    config: Dict[str, Any],
    seed: int,
    data_hash: Optional[str] = None,
    **extra: Any,
) -> Dict[str, Any]:
    """
    Build the provenance block written into checkpoints and reports.

    Only deterministic fields go in here so that identical runs produce
    identical bytes.
    """
    metadata = {
        "config": config,
        "seed": seed,
        "data_hash": data_hash,
    }
    metadata.update(extra)
    return metadata


def environment_info() -> Dict[str, str]:
    """Library versions, logged at startup (not written into artifacts)."""
    return {
        "python": platform.python_version(),
        "torch": torch.__version__,
        "numpy": np.__version__,
    }
