"""
Training samples and the canvas-pair dataset fed to the DataLoader.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import torch
from torch.utils.data import Dataset

from src.canvas.placement import (
    BG, DEFAULT_CANVAS_SIZE, DEFAULT_MAX_SCALE, max_feasible_scale, place_input, place_target, sample_view,
)
from src.canvas.transforms import ColorPerm, Dihedral
from src.data.grid import Grid, TaskSet
from src.errors import NoFeasibleView, PlacementOverflow, ScaleOverflow

logger = logging.getLogger(__name__)

DEMO = "demo"
INFER = "infer"


@dataclass(frozen=True)
class TrainingSample:
    """One (input, output) pair bound to a task-embedding row."""
    input: Grid
    output: Grid
    task_index: int
    lineage: str = DEMO
    dihedral: Dihedral = Dihedral.IDENTITY
    color: ColorPerm = field(default_factory=ColorPerm.identity)


def build_samples(taskset: TaskSet, index_offset: int = 0) -> List[TrainingSample]:
    """Demo pairs of every task, indexed by the task's position in the set."""
    samples = []
    for i, task in enumerate(taskset):
        for pair in task.demo:
            samples.append(TrainingSample(pair.input, pair.output, index_offset + i, DEMO))
    return samples


class CanvasPairDataset(Dataset):
    """
    Places each sample on a fresh random view every epoch.

    The view for sample ``i`` in epoch ``e`` is drawn from a generator seeded
    by ``(seed, e, i)`` so batches do not depend on worker scheduling.
    """

    def __init__(
        self,
        samples: Sequence[TrainingSample],
        canvas_size: int = DEFAULT_CANVAS_SIZE,
        max_scale: int = DEFAULT_MAX_SCALE,
        scale_aug: bool = True,
        translate_aug: bool = True,
        seed: int = 0,
    ):
        leaked = [s for s in samples if s.lineage != DEMO]
        if leaked:
            raise ValueError(f"{len(leaked)} samples with lineage other than {DEMO!r} in a training set")

        self.samples = []
        for sample in samples:
            dims = sample.dihedral.transform_shape(sample.input.shape)
            out_dims = sample.dihedral.transform_shape(sample.output.shape)
            if max_feasible_scale(dims, out_dims, canvas_size, max_scale) < 1:
                logger.warning(f"Skipping sample for task index {sample.task_index}: does not fit a {canvas_size} canvas")
                continue
            self.samples.append(sample)

        self.canvas_size = canvas_size
        self.max_scale = max_scale
        self.scale_aug = scale_aug
        self.translate_aug = translate_aug
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.samples)

    def place_pair(self, sample: TrainingSample, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Input and target canvases sharing one view; on overflow retry with a smaller scale."""
        max_scale = self.max_scale
        while True:
            view = sample_view(
                rng,
                sample.input.shape,
                sample.output.shape,
                size=self.canvas_size,
                max_scale=max_scale,
                dihedral=sample.dihedral,
                color=sample.color,
                scale_aug=self.scale_aug,
                translate_aug=self.translate_aug,
            )
            try:
                return place_input(sample.input, view, self.canvas_size), place_target(sample.output, view, self.canvas_size)
            except (ScaleOverflow, PlacementOverflow):
                if view.scale <= 1:
                    raise NoFeasibleView(f"sample for task index {sample.task_index} cannot be placed")
                max_scale = view.scale - 1

    def __getitem__(self, idx: int) -> Dict[str, torch.Tensor]:
        sample = self.samples[idx]
        rng = np.random.default_rng((self.seed, self.epoch, idx))
        canvas_in, canvas_out = self.place_pair(sample, rng)
        mask = (canvas_in != BG) | (canvas_out != BG)
        return {
            "input": torch.from_numpy(canvas_in),
            "target": torch.from_numpy(canvas_out),
            "mask": torch.from_numpy(mask),
            "task_index": sample.task_index,
        }
