"""
Synthetic micro-task families used for desk-scale training and tests:
identity, fixed colour swap and horizontal mirror on small grids.
"""
import json
import os
from typing import Callable, List, Tuple

import numpy as np

from src.data.grid import ExamplePair, Grid, Task, TaskSet

FAMILIES = ("identity", "color_swap", "mirror")


def _rule(family: str, swap: Tuple[int, int]) -> Callable[[np.ndarray], np.ndarray]:
    if family == "identity":
        return lambda g: g.copy()
    if family == "mirror":
        return lambda g: g[:, ::-1].copy()
    if family == "color_swap":
        a, b = swap

        def apply(g: np.ndarray) -> np.ndarray:
            out = g.copy()
            out[g == a] = b
            out[g == b] = a
            return out

        return apply
    raise ValueError(f"unknown family {family!r}")


def random_grid(rng: np.random.Generator, max_side: int = 5, colors: int = 10) -> Grid:
    rows = int(rng.integers(1, max_side + 1))
    cols = int(rng.integers(1, max_side + 1))
    return Grid(rng.integers(0, colors, size=(rows, cols)))


def make_task(
    family: str,
    task_id: str,
    rng: np.random.Generator,
    num_demo: int = 3,
    num_infer: int = 1,
    max_side: int = 5,
    swap: Tuple[int, int] = (1, 2),
) -> Task:
    """Generate one task of the given family with random grids."""
    rule = _rule(family, swap)

    def pair() -> ExamplePair:
        grid = random_grid(rng, max_side)
        return ExamplePair(grid, Grid(rule(grid.pixels)))

    return Task(
        task_id=task_id,
        demo=tuple(pair() for _ in range(num_demo)),
        infer=tuple(pair() for _ in range(num_infer)),
    )


def make_training_set(
    pairs_per_family: int = 200,
    seed: int = 0,
    families: Tuple[str, ...] = FAMILIES,
    max_side: int = 5,
) -> TaskSet:
    """One training task per family carrying ``pairs_per_family`` demos."""
    rng = np.random.default_rng(seed)
    tasks = [
        make_task(family, f"{family}", rng, num_demo=pairs_per_family, num_infer=2, max_side=max_side)
        for family in sorted(families)
    ]
    return TaskSet(tuple(tasks), split="train")


def _shows_colors(task: Task, colors: Tuple[int, ...]) -> bool:
    seen = set()
    for pair in task.demo:
        seen.update(np.unique(pair.input.pixels).tolist())
    return set(colors) <= seen


def make_heldout_set(num_tasks: int = 5, seed: int = 1, max_side: int = 5) -> TaskSet:
    """
    Held-out variants: new colour swaps and fresh grids, 3 demos each.

    A colour-swap task is redrawn until both swapped colours occur in its demo
    inputs.
    """
    rng = np.random.default_rng(seed)
    tasks = []
    for i in range(num_tasks):
        family = FAMILIES[i % len(FAMILIES)]
        swap = tuple(int(c) for c in rng.choice(10, size=2, replace=False))
        while True:
            task = make_task(family, f"heldout_{i:02d}_{family}", rng, swap=swap, max_side=max_side)
            if family != "color_swap" or _shows_colors(task, swap):
                break
        tasks.append(task)
    return TaskSet(tuple(tasks), split="eval")


def write_taskset(taskset: TaskSet, directory: str) -> List[str]:
    """Write each task as ``<task_id>.json`` in ARC layout."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for task in taskset:
        path = os.path.join(directory, f"{task.task_id}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(task.to_json(), f)
        paths.append(path)
    return paths
