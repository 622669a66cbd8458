"""
Loader for ARC-format task JSON ("train"/"test" arrays of input/output pairs).
"""
import json
from typing import Any, Dict, List, Optional

from src.data.grid import ExamplePair, Task, parse_grid
from src.errors import DataError, MissingField, TaskFileError


def parse_pair(item: Any, require_output: bool) -> ExamplePair:
    if not isinstance(item, dict) or "input" not in item:
        raise MissingField("pair is missing 'input'")
    if require_output and "output" not in item:
        raise MissingField("demonstration pair is missing 'output'")
    output = parse_grid(item["output"]) if item.get("output") is not None else None
    return ExamplePair(input=parse_grid(item["input"]), output=output)


def parse_task(task_id: str, data: Any, solutions: Optional[List[Any]] = None) -> Task:
    """
    Build a Task from a decoded ARC JSON object.

    Args:
        task_id: Identifier for the task (file stem or manifest key).
        data: Decoded JSON with "train" and "test" arrays.
        solutions: Optional list of output grids for the "test" inputs, as
            shipped in separate solutions files.

    Returns:
        Task with demo pairs from "train" and inference pairs from "test".
    """
    if not isinstance(data, dict):
        raise MissingField("task JSON must be an object with 'train' and 'test'")
    for key in ("train", "test"):
        if key not in data:
            raise MissingField(f"task is missing '{key}'")
    demo = tuple(parse_pair(item, require_output=True) for item in data["train"])
    infer = [parse_pair(item, require_output=False) for item in data["test"]]
    if not demo:
        raise MissingField("task has no demonstration pairs")
    if not infer:
        raise MissingField("task has no inference inputs")

    if solutions is not None:
        if len(solutions) != len(infer):
            raise DataError(f"{len(solutions)} solutions for {len(infer)} test inputs")
        infer = [ExamplePair(pair.input, parse_grid(sol)) for pair, sol in zip(infer, solutions)]

    return Task(task_id=task_id, demo=demo, infer=tuple(infer))


def load_task_file(filepath: str, task_id: str) -> Task:
    """Load one task file, wrapping any data error with the file path."""
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
        return parse_task(task_id, data)
    except (DataError, json.JSONDecodeError, OSError) as e:
        raise TaskFileError(filepath, e) from e


def load_pair_list(filepath: str) -> List[ExamplePair]:
    """Load a RE-ARC style file: a JSON array of {"input","output"} pairs."""
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, list):
            raise MissingField("expected a JSON array of pairs")
        return [parse_pair(item, require_output=True) for item in data]
    except (DataError, json.JSONDecodeError, OSError) as e:
        raise TaskFileError(filepath, e) from e


def load_manifest(filepath: str, solutions_path: Optional[str] = None) -> Dict[str, Task]:
    """Load a challenges manifest mapping task_id -> task JSON."""
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
        solutions = {}
        if solutions_path:
            with open(solutions_path, "r", encoding="utf-8") as f:
                solutions = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise TaskFileError(filepath, e) from e
    if not isinstance(data, dict):
        raise TaskFileError(filepath, MissingField("manifest must map task ids to tasks"))

    tasks = {}
    for task_id, task_data in data.items():
        try:
            tasks[task_id] = parse_task(task_id, task_data, solutions.get(task_id))
        except DataError as e:
            raise TaskFileError(f"{filepath}[{task_id}]", e) from e
    return tasks
