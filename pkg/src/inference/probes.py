"""
Read-only probes into a model: attention maps and task-embedding vectors.
"""
from typing import List, Tuple

import numpy as np
import torch

from src.canvas.placement import BG
from src.errors import ConfigError
from src.model.vit import VarcViT


@torch.no_grad()
def attention_maps(model: VarcViT, canvas: np.ndarray, task_index: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Per-layer (pre-softmax logits, softmax) maps, each [heads, T+1, T+1].

    Token 0 is the task token; patch tokens follow in row-major order.
    """
    model.eval()
    _, maps = model(canvas, task_index, return_maps=True)
    return [(logits[0].cpu().numpy(), probs[0].cpu().numpy()) for logits, probs in maps]


def _check_layer(model: VarcViT, layer: int) -> None:
    if not 0 <= layer < model.config.depth:
        raise ConfigError(f"layer {layer} outside [0, {model.config.depth})", key="attention")


def pixel_attention(
    model: VarcViT,
    canvas: np.ndarray,
    task_index: int,
    layer: int,
    row: int,
    col: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Where the patch holding canvas pixel (row, col) looks in ``layer``.

    Returns:
        (logit map, softmax map), each [G, G] over patch positions, averaged
        over heads
    """
    _check_layer(model, layer)
    size, p, g = model.config.canvas_size, model.config.patch_size, model.config.grid_size
    if not (0 <= row < size and 0 <= col < size):
        raise ConfigError(f"pixel ({row}, {col}) outside the {size}x{size} canvas", key="attention")
    logits, probs = attention_maps(model, canvas, task_index)[layer]
    query = 1 + (row // p) * g + (col // p)
    logit_map = logits[:, query, 1:].mean(axis=0).reshape(g, g)
    prob_map = probs[:, query, 1:].mean(axis=0).reshape(g, g)
    return logit_map, prob_map


def layer_attention(model: VarcViT, canvas: np.ndarray, task_index: int, layer: int) -> np.ndarray:
    """Softmax attention of ``layer`` averaged over heads and every foreground query patch, [G, G]."""
    _check_layer(model, layer)
    p, g = model.config.patch_size, model.config.grid_size
    canvas = np.asarray(canvas)
    foreground = ~(canvas.reshape(g, p, g, p) == BG).all(axis=(1, 3)).reshape(-1)
    _, probs = attention_maps(model, canvas, task_index)[layer]
    queries = np.nonzero(foreground)[0] + 1
    if len(queries) == 0:
        return np.zeros((g, g))
    return probs[:, queries, 1:].mean(axis=(0, 1)).reshape(g, g)


def task_embedding_matrix(model: VarcViT) -> np.ndarray:
    """The task-embedding table, [num_task_embeddings, hidden]."""
    return model.task_embed.weight.detach().cpu().numpy().copy()
