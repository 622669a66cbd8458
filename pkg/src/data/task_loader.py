"""
Task-set loading, RE-ARC expansion and load reports.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.data.grid import Task, TaskSet
from src.data.json_loader import load_manifest, load_pair_list, load_task_file
from src.errors import EmptyTaskSet
from src.utils.metadata import taskset_hash

logger = logging.getLogger(__name__)


def load_taskset(path: str, split: str = "train", solutions_path: Optional[str] = None) -> TaskSet:
    """
    Load an ARC task set from a directory of task files or a manifest file.

    Args:
        path: Directory of ``<task_id>.json`` files, or a single JSON manifest
            mapping task ids to tasks.
        split: Split tag for the resulting set.
        solutions_path: Optional solutions JSON for a manifest whose test
            outputs are shipped separately.

    Returns:
        TaskSet ordered lexicographically by task id.
    """
    if os.path.isdir(path):
        tasks = {}
        for filename in sorted(os.listdir(path)):
            if not filename.endswith(".json"):
                continue
            task_id = os.path.splitext(filename)[0]
            tasks[task_id] = load_task_file(os.path.join(path, filename), task_id)
    elif os.path.isfile(path):
        tasks = load_manifest(path, solutions_path)
    else:
        raise EmptyTaskSet(f"{path} does not exist")

    if not tasks:
        raise EmptyTaskSet(f"no task files found in {path}")

    taskset = TaskSet(tuple(tasks[t] for t in sorted(tasks)), split=split)
    logger.info(f"Loaded {len(taskset)} {split} tasks from {path}")
    return taskset


@dataclass
class MergeReport:
    tasks_extended: int = 0
    pairs_added: int = 0
    total_pairs: int = 0
    skipped_task_ids: List[str] = field(default_factory=list)


def merge_rearc(
    base: TaskSet,
    rearc_path: str,
    pairs_per_task: int,
    seed: int,
    with_replacement: bool = False,
) -> Tuple[TaskSet, MergeReport]:
    """
    Append pre-generated RE-ARC pairs to the demonstration sets of a task set.

    Args:
        base: Task set to extend; its demo pairs are never modified.
        rearc_path: Directory of ``<task_id>.json`` arrays of pairs.
        pairs_per_task: Maximum pairs appended per task.
        seed: Seed of the sampling generator.
        with_replacement: Sample pairs with replacement instead of without.

    Returns:
        The merged TaskSet and a MergeReport.
    """
    if pairs_per_task < 0:
        raise ValueError("pairs_per_task must be >= 0")
    report = MergeReport()
    if pairs_per_task == 0:
        report.total_pairs = sum(len(t.demo) for t in base)
        return base, report

    rng = np.random.default_rng(seed)
    extra: Dict[str, list] = {}
    for filename in sorted(os.listdir(rearc_path)):
        if not filename.endswith(".json"):
            continue
        task_id = os.path.splitext(filename)[0]
        if task_id not in base.task_index:
            logger.warning(f"Skipping RE-ARC file for unknown task id {task_id}")
            report.skipped_task_ids.append(task_id)
            continue
        pairs = load_pair_list(os.path.join(rearc_path, filename))
        if not pairs:
            continue
        if with_replacement:
            picks = rng.choice(len(pairs), size=pairs_per_task, replace=True)
        else:
            picks = rng.choice(len(pairs), size=min(pairs_per_task, len(pairs)), replace=False)
        extra[task_id] = [pairs[i] for i in picks]

    merged = []
    for task in base:
        added = extra.get(task.task_id, [])
        if added:
            report.tasks_extended += 1
            report.pairs_added += len(added)
            task = Task(task.task_id, task.demo + tuple(added), task.infer)
        merged.append(task)
    report.total_pairs = sum(len(t.demo) for t in merged)
    logger.info(
        f"Merged {report.pairs_added} RE-ARC pairs into {report.tasks_extended} tasks "
        f"({report.total_pairs} training pairs total)"
    )
    return TaskSet(tuple(merged), split=base.split), report


def load_report(taskset: TaskSet, merge: Optional[MergeReport] = None) -> dict:
    """Summary of a loaded task set, serialisable as JSON."""
    report = {
        "split": taskset.split,
        "num_tasks": len(taskset),
        "num_demo_pairs": sum(len(t.demo) for t in taskset),
        "num_infer_pairs": sum(len(t.infer) for t in taskset),
        "data_hash": taskset_hash(taskset),
    }
    if merge is not None:
        report["rearc"] = {
            "tasks_extended": merge.tasks_extended,
            "pairs_added": merge.pairs_added,
            "skipped_task_ids": merge.skipped_task_ids,
        }
    return report
