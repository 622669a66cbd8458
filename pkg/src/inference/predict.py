"""
Single-view and multi-view prediction.

A view places the (augmented) input on the canvas, runs the model with the
matching task embedding and decodes the probability field back to a grid in
the original frame.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from src.canvas.placement import (
    DEFAULT_MAX_SCALE, DecodeFailure, ViewTransform, decode_prediction, estimate_output_shape, place_input,
    sample_view,
)
from src.data.grid import Grid
from src.errors import AllViewsFailed, NoFeasibleView
from src.inference.voting import VoteTally, majority_vote
from src.model.vit import VarcViT
from src.training.aux_tasks import AuxTask

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 64


@dataclass(frozen=True)
class Candidate:
    """A decoded grid in the original frame."""
    grid: Grid
    view_id: int
    aux_index: int


@dataclass(frozen=True)
class ViewSpec:
    view_id: int
    aux: AuxTask
    transform: ViewTransform


Prediction = Union[Candidate, DecodeFailure]


@torch.no_grad()
def forward_probs(model: VarcViT, canvases: np.ndarray, task_indices: Sequence[int]) -> np.ndarray:
    """Softmax probabilities [B, S, S, 12] for a batch of canvases."""
    model.eval()
    device = model.head.weight.device
    logits = model(torch.as_tensor(canvases, device=device), torch.as_tensor(list(task_indices), device=device))
    return torch.softmax(logits.float(), dim=-1).cpu().numpy()


def predict_view(
    model: VarcViT,
    x: Grid,
    aux: AuxTask,
    geom: Tuple[int, Tuple[int, int]],
    embedding_offset: int = 0,
    view_id: int = 0,
) -> Prediction:
    """
    Predict the output for ``x`` under one view.

    Args:
        model: Trained or adapted model
        x: Raw input grid
        aux: Auxiliary task giving the dihedral, colour permutation and embedding
        geom: (scale, (row, col) offset) for the placement
        embedding_offset: First embedding row of the task's auxiliary block
        view_id: Identifier recorded on the candidate

    Returns:
        Candidate in the original frame, or the DecodeFailure
    """
    scale, offset = geom
    view = ViewTransform(dihedral=aux.dihedral, color=aux.color, scale=scale, offset=tuple(offset))
    spec = ViewSpec(view_id, aux, view)
    return predict_views(model, x, [spec], embedding_offset=embedding_offset)[0]


def plan_views(
    x: Grid,
    aux_tasks: Sequence[AuxTask],
    views_per_aux: int,
    seed: int,
    canvas_size: int,
    max_scale: int = DEFAULT_MAX_SCALE,
    output_ratio: Optional[Tuple[float, float]] = None,
) -> List[ViewSpec]:
    """
    Draw ``views_per_aux`` random geometries for every auxiliary task.

    When the demo output/input ratio is known the expected output (plus its
    border) must also fit; if it cannot, only the input is constrained.
    """
    rng = np.random.default_rng(seed)
    out_shape = estimate_output_shape(x.shape, output_ratio) if output_ratio is not None else None
    specs = []
    for aux in aux_tasks:
        for _ in range(views_per_aux):
            try:
                view = sample_view(
                    rng, x.shape, out_shape, size=canvas_size, max_scale=max_scale,
                    dihedral=aux.dihedral, color=aux.color,
                )
            except NoFeasibleView:
                view = sample_view(
                    rng, x.shape, None, size=canvas_size, max_scale=max_scale,
                    dihedral=aux.dihedral, color=aux.color,
                )
            specs.append(ViewSpec(len(specs), aux, view))
    return specs


def predict_views(
    model: VarcViT,
    x: Grid,
    specs: Sequence[ViewSpec],
    embedding_offset: int = 0,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> List[Prediction]:
    """Run every view in batches; results are returned in view order."""
    size = model.config.canvas_size
    results: List[Prediction] = []
    for start in range(0, len(specs), batch_size):
        chunk = specs[start:start + batch_size]
        canvases = np.stack([place_input(x, spec.transform, size) for spec in chunk])
        probs = forward_probs(model, canvases, [embedding_offset + spec.aux.aux_index for spec in chunk])
        for spec, prob_field in zip(chunk, probs):
            decoded = decode_prediction(prob_field, spec.transform)
            if isinstance(decoded, DecodeFailure):
                results.append(decoded)
            else:
                results.append(Candidate(decoded, spec.view_id, spec.aux.aux_index))
    return results


def multi_view_infer(
    model: VarcViT,
    x: Grid,
    aux_tasks: Sequence[AuxTask],
    views_per_aux: int = 10,
    seed: int = 0,
    embedding_offset: int = 0,
    output_ratio: Optional[Tuple[float, float]] = None,
    max_scale: int = DEFAULT_MAX_SCALE,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> VoteTally:
    """
    Vote over ``len(aux_tasks) * views_per_aux`` views of ``x``.

    Raises:
        AllViewsFailed: No view decoded to a grid
    """
    specs = plan_views(x, aux_tasks, views_per_aux, seed, model.config.canvas_size, max_scale, output_ratio)
    results = predict_views(model, x, specs, embedding_offset, batch_size)
    candidates = [r.grid for r in results if isinstance(r, Candidate)]
    tally = majority_vote(candidates, failures=len(results) - len(candidates))
    logger.debug(f"{len(specs)} views: {len(tally.ranked)} distinct grids, {tally.failures} failures")
    if not tally.ranked:
        raise AllViewsFailed(tally)
    return tally
