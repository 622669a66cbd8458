"""
Shared fixtures: tiny model configurations and a perfect identity oracle.
"""
import os

import numpy as np

from src.canvas.placement import BD, BG, one_hot
from src.model.vit import VitConfig

SLOW_TESTS = os.getenv("VARC_SLOW_TESTS") == "1"


def tiny_config(**overrides) -> VitConfig:
    """Depth 2, hidden 32, 8x8 canvas with 2x2 patches."""
    values = dict(
        hidden_dim=32,
        depth=2,
        heads=4,
        mlp_hidden=32,
        mlp_dropout=0.0,
        attn_dropout=0.0,
        patch_size=2,
        canvas_size=8,
        pixel_embed_dim=4,
        num_task_embeddings=4,
    )
    values.update(overrides)
    return VitConfig(**values)


def identity_target(canvas: np.ndarray) -> np.ndarray:
    """The target canvas an identity rule would produce: input plus its BD border."""
    target = canvas.copy()
    rows = np.nonzero((canvas != BG).any(axis=1))[0]
    cols = np.nonzero((canvas != BG).any(axis=0))[0]
    r0, r1, c0, c1 = rows.min(), rows.max() + 1, cols.min(), cols.max() + 1
    target[r1, c0:c1 + 1] = BD
    target[r0:r1 + 1, c1] = BD
    return target


def identity_oracle(model, canvases, task_indices) -> np.ndarray:
    """Stand-in for forward_probs that solves the identity task exactly."""
    return np.stack([one_hot(identity_target(np.asarray(c))) for c in canvases])
