"""
Core ARC data types: Grid, ExamplePair, Task and TaskSet.
"""
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ColorOutOfRange, DuplicateTaskId, EmptyGrid, GridTooLarge, RaggedRows

NUM_COLORS = 10
MAX_ARC_SIZE = 30
SPLITS = ("train", "eval", "test")


class Grid:
    """Immutable 2D grid of colour indices 0..9.

    Equality and hashing are exact over shape and cells, which is what
    majority voting needs.
    """

    __slots__ = ("_pixels", "_key")

    def __init__(self, pixels: Any):
        arr = np.array(pixels, dtype=np.int8)
        if arr.ndim != 2 or arr.size == 0:
            raise EmptyGrid(f"grid must be a non-empty 2D array, got shape {arr.shape}")
        if arr.min() < 0 or arr.max() >= NUM_COLORS:
            raise ColorOutOfRange(f"cell values must be in 0..{NUM_COLORS - 1}")
        arr.setflags(write=False)
        self._pixels = arr
        self._key = (arr.shape, arr.tobytes())

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def rows(self) -> int:
        return self._pixels.shape[0]

    @property
    def cols(self) -> int:
        return self._pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._pixels.shape

    @property
    def cells(self) -> List[int]:
        """Row-major list of colour indices."""
        return self._pixels.reshape(-1).tolist()

    def to_list(self) -> List[List[int]]:
        return self._pixels.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"Grid({self.rows}x{self.cols}, {self.to_list()})"


def parse_grid(value: Any, max_size: Optional[int] = MAX_ARC_SIZE) -> Grid:
    """
    Parse an ARC JSON grid (nested integer arrays).

    Args:
        value: Non-empty rectangular list of lists of integers.
        max_size: Largest allowed side length (None disables the check).

    Returns:
        Grid with the cells copied row-major.
    """
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise EmptyGrid("grid must be a non-empty array of rows")
    widths = set()
    for row in value:
        if not isinstance(row, (list, tuple)):
            raise RaggedRows("every row must be an array")
        widths.add(len(row))
    if len(widths) != 1:
        raise RaggedRows(f"rows have differing lengths {sorted(widths)}")
    if 0 in widths:
        raise EmptyGrid("rows must be non-empty")
    for row in value:
        for cell in row:
            if isinstance(cell, bool) or not isinstance(cell, int):
                raise ColorOutOfRange(f"cell {cell!r} is not an integer colour")
            if not 0 <= cell < NUM_COLORS:
                raise ColorOutOfRange(f"cell value {cell} outside 0..{NUM_COLORS - 1}")
    grid = Grid(value)
    if max_size is not None and (grid.rows > max_size or grid.cols > max_size):
        raise GridTooLarge(f"grid {grid.rows}x{grid.cols} exceeds {max_size}x{max_size}")
    return grid


@dataclass(frozen=True)
class ExamplePair:
    """A demonstration or inference pair. Inference outputs may be withheld."""
    input: Grid
    output: Optional[Grid] = None

    def to_json(self) -> dict:
        data = {"input": self.input.to_list()}
        if self.output is not None:
            data["output"] = self.output.to_list()
        return data


@dataclass(frozen=True)
class Task:
    task_id: str
    demo: Tuple[ExamplePair, ...]
    infer: Tuple[ExamplePair, ...]

    def to_json(self) -> dict:
        return {
            "train": [pair.to_json() for pair in self.demo],
            "test": [pair.to_json() for pair in self.infer],
        }

    def output_ratio(self) -> Tuple[float, float]:
        """Largest demo output/input size ratio per axis."""
        rh = max(pair.output.rows / pair.input.rows for pair in self.demo)
        rw = max(pair.output.cols / pair.input.cols for pair in self.demo)
        return rh, rw


@dataclass(frozen=True)
class TaskSet:
    tasks: Tuple[Task, ...]
    split: str = "train"
    task_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        index = {}
        for i, task in enumerate(self.tasks):
            if task.task_id in index:
                raise DuplicateTaskId(f"duplicate task id {task.task_id!r}")
            index[task.task_id] = i
        self.task_index.clear()
        self.task_index.update(index)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def get(self, task_id: str) -> Task:
        return self.tasks[self.task_index[task_id]]

    @property
    def task_ids(self) -> List[str]:
        return [task.task_id for task in self.tasks]

    def subset(self, task_ids: Sequence[str]) -> "TaskSet":
        return TaskSet(tuple(self.get(t) for t in task_ids), split=self.split)
