"""
Vision transformer over a symbol canvas, conditioned on a task token.

canvas -> pixel embeddings -> p x p patch tokens (+ task token) -> pre-norm
transformer blocks with background key masking -> per-pixel 12-way logits.
"""
import logging
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
from einops import rearrange
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.canvas.placement import BG, NUM_SYMBOLS
from src.errors import ShapeMismatch, TaskIndexOutOfRange
from src.nn.ops import RopeTable, dropout, embedding, gelu, multi_head_attention, trunc_normal

logger = logging.getLogger(__name__)

PositionalMode = Literal["rope2d", "abs2d", "rope1d", "abs1d", "none"]
INIT_STD = 0.02


class VitConfig(BaseModel):
    """Architecture hyperparameters (defaults: the 18M model)."""
    model_config = ConfigDict(extra="forbid")

    hidden_dim: int = Field(512, gt=0)
    depth: int = Field(10, gt=0)
    heads: int = Field(8, gt=0)
    mlp_hidden: int = Field(512, gt=0)
    mlp_dropout: float = Field(0.1, ge=0.0, lt=1.0)
    attn_dropout: float = Field(0.1, ge=0.0, lt=1.0)
    patch_size: int = Field(2, gt=0)
    canvas_size: int = Field(64, gt=0)
    num_symbols: Literal[12] = NUM_SYMBOLS
    pixel_embed_dim: int = Field(16, gt=0)
    num_task_embeddings: int = Field(400, gt=0)
    positional_mode: PositionalMode = "rope2d"
    rope_base: float = 10000.0

    @model_validator(mode="after")
    def _check_shapes(self) -> "VitConfig":
        if self.canvas_size % self.patch_size:
            raise ValueError(f"canvas_size {self.canvas_size} not divisible by patch_size {self.patch_size}")
        if self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}")
        head_dim = self.hidden_dim // self.heads
        if self.positional_mode == "rope2d" and head_dim % 4:
            raise ValueError(f"rope2d needs head dim divisible by 4, got {head_dim}")
        if self.positional_mode == "rope1d" and head_dim % 2:
            raise ValueError(f"rope1d needs an even head dim, got {head_dim}")
        if self.positional_mode == "abs2d" and self.hidden_dim % 2:
            raise ValueError("abs2d needs an even hidden_dim")
        return self

    @property
    def grid_size(self) -> int:
        return self.canvas_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size ** 2

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads


def count_params(config: VitConfig) -> int:
    """Exact number of trainable parameters of ``VarcViT(config)``."""
    d, m, p = config.hidden_dim, config.mlp_hidden, config.patch_size
    block = (
        (d * 3 * d + 3 * d) + (d * d + d)      # qkv + output projection
        + (d * 2 * m + 2 * m) + (m * d + d)    # gated MLP
        + 4 * d                                # two layer norms
    )
    total = (
        NUM_SYMBOLS * config.pixel_embed_dim
        + p * p * config.pixel_embed_dim * d + d
        + config.num_task_embeddings * d
        + config.depth * block
        + 2 * d
        + d * p * p * NUM_SYMBOLS + p * p * NUM_SYMBOLS
    )
    if config.positional_mode == "abs2d":
        total += config.grid_size * d
    elif config.positional_mode == "abs1d":
        total += config.num_patches * d
    return total


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int, attn_dropout: float):
        super().__init__()
        self.heads = heads
        self.attn_dropout = attn_dropout
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, key_mask, rope, num_prefix, generator=None, return_maps=False):
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        result = multi_head_attention(
            q, k, v, self.heads, key_mask=key_mask, rope=rope, num_prefix=num_prefix, return_maps=return_maps
        )
        out, maps = (result[0], result[1:]) if return_maps else (result, None)
        out = dropout(self.proj(out), self.attn_dropout, self.training, generator)
        return out, maps


class GatedMLP(nn.Module):
    """GELU-gated MLP: fc_out(dropout(a * gelu(g))) with [a, g] = fc_in(x)."""

    def __init__(self, dim: int, hidden: int, mlp_dropout: float):
        super().__init__()
        self.mlp_dropout = mlp_dropout
        self.fc_in = nn.Linear(dim, 2 * hidden)
        self.fc_out = nn.Linear(hidden, dim)

    def forward(self, x, generator=None):
        a, g = self.fc_in(x).chunk(2, dim=-1)
        hidden = dropout(a * gelu(g), self.mlp_dropout, self.training, generator)
        return self.fc_out(hidden)


class TransformerBlock(nn.Module):
    """Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, config: VitConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(config.hidden_dim)
        self.attn = Attention(config.hidden_dim, config.heads, config.attn_dropout)
        self.norm2 = nn.LayerNorm(config.hidden_dim)
        self.mlp = GatedMLP(config.hidden_dim, config.mlp_hidden, config.mlp_dropout)

    def forward(self, x, key_mask, rope, num_prefix, generator=None, return_maps=False):
        attn_out, maps = self.attn(self.norm1(x), key_mask, rope, num_prefix, generator, return_maps)
        x = x + attn_out
        x = x + self.mlp(self.norm2(x), generator)
        return x, maps


class VarcViT(nn.Module):
    """The VARC model."""

    def __init__(self, config: VitConfig, seed: int = 0):
        super().__init__()
        self.config = config
        d, p, e = config.hidden_dim, config.patch_size, config.pixel_embed_dim
        g = config.grid_size

        self.pixel_embed = nn.Embedding(NUM_SYMBOLS, e)
        self.patch_proj = nn.Linear(p * p * e, d)
        self.task_embed = nn.Embedding(config.num_task_embeddings, d)
        if config.positional_mode == "abs2d":
            self.pos_col = nn.Parameter(torch.zeros(g, d // 2))
            self.pos_row = nn.Parameter(torch.zeros(g, d - d // 2))
        elif config.positional_mode == "abs1d":
            self.pos_1d = nn.Parameter(torch.zeros(g * g, d))
        self.blocks = nn.ModuleList(TransformerBlock(config) for _ in range(config.depth))
        self.norm = nn.LayerNorm(d)
        self.head = nn.Linear(d, p * p * NUM_SYMBOLS)

        rows, cols = torch.meshgrid(torch.arange(g), torch.arange(g), indexing="ij")
        self.register_buffer("coords", torch.stack([rows.reshape(-1), cols.reshape(-1)], dim=-1), persistent=False)
        if config.positional_mode == "rope2d":
            self.rope = RopeTable.rope2d(self.coords[:, 0], self.coords[:, 1], config.head_dim, config.rope_base)
        elif config.positional_mode == "rope1d":
            self.rope = RopeTable.rope1d(torch.arange(g * g), config.head_dim, config.rope_base)
        else:
            self.rope = None

        self.dropout_generator: Optional[torch.Generator] = None
        self.reset_parameters(torch.Generator().manual_seed(seed))

    @torch.no_grad()
    def reset_parameters(self, generator: torch.Generator) -> None:
        """Truncated normal (std 0.02) for weights and tables, zeros for biases."""
        for module in self.modules():
            if isinstance(module, nn.Linear):
                module.weight.copy_(trunc_normal(module.weight.shape, INIT_STD, generator))
                nn.init.zeros_(module.bias)
            elif isinstance(module, nn.Embedding):
                module.weight.copy_(trunc_normal(module.weight.shape, INIT_STD, generator))
            elif isinstance(module, nn.LayerNorm):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)
        for name in ("pos_col", "pos_row", "pos_1d"):
            if hasattr(self, name):
                table = getattr(self, name)
                table.copy_(trunc_normal(table.shape, INIT_STD, generator))

    @torch.no_grad()
    def reset_task_embeddings(self, count: int, generator: torch.Generator) -> None:
        """Replace the task-embedding table with ``count`` freshly initialised rows."""
        table = nn.Embedding(count, self.config.hidden_dim).to(self.task_embed.weight.device)
        table.weight.copy_(trunc_normal(table.weight.shape, INIT_STD, generator))
        self.task_embed = table
        self.config = self.config.model_copy(update={"num_task_embeddings": count})

    def _as_canvas_batch(self, canvas: Union[np.ndarray, torch.Tensor]) -> torch.Tensor:
        device = self.head.weight.device
        canvas = torch.as_tensor(canvas, device=device).long()
        if canvas.ndim == 2:
            canvas = canvas.unsqueeze(0)
        size = self.config.canvas_size
        if canvas.ndim != 3 or canvas.shape[-2:] != (size, size):
            raise ShapeMismatch(f"expected canvas [B, {size}, {size}], got {tuple(canvas.shape)}")
        return canvas

    def patchify(self, canvas) -> torch.Tensor:
        """Per-patch concatenation of pixel embeddings, [B, T, p*p*e] (before projection)."""
        canvas = self._as_canvas_batch(canvas)
        p = self.config.patch_size
        pixels = embedding(self.pixel_embed.weight, canvas)
        return rearrange(pixels, "b (h p1) (w p2) e -> b (h w) (p1 p2 e)", p1=p, p2=p)

    def tokenize(self, canvas) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """
        Split a canvas into patch tokens.

        Returns:
            tokens [B, T, hidden], coords [T, 2] as (row, col) patch indices,
            and patch_bg_mask [B, T], True where all p*p pixels are BG.
        """
        canvas = self._as_canvas_batch(canvas)
        p = self.config.patch_size
        tokens = self.patch_proj(self.patchify(canvas))
        if self.config.positional_mode == "abs2d":
            pos = torch.cat([self.pos_col[self.coords[:, 1]], self.pos_row[self.coords[:, 0]]], dim=-1)
            tokens = tokens + pos
        elif self.config.positional_mode == "abs1d":
            tokens = tokens + self.pos_1d
        bg = rearrange(canvas == BG, "b (h p1) (w p2) -> b (h w) (p1 p2)", p1=p, p2=p)
        return tokens, self.coords, bg.all(dim=-1)

    def _task_tokens(self, task_index, batch: int) -> torch.Tensor:
        index = torch.as_tensor(task_index, device=self.head.weight.device).long().reshape(-1)
        if index.numel() == 1 and batch > 1:
            index = index.expand(batch)
        if index.numel() != batch:
            raise ShapeMismatch(f"{index.numel()} task indices for a batch of {batch}")
        count = self.task_embed.num_embeddings
        if (index < 0).any() or (index >= count).any():
            raise TaskIndexOutOfRange(f"task index out of range [0, {count})")
        return self.task_embed(index).unsqueeze(1)

    def encode(self, tokens, patch_bg_mask, task_index, return_maps: bool = False):
        """
        Run the transformer stack over patch tokens.

        Returns:
            Features [B, T, hidden] for the patch tokens (task token dropped),
            plus per-layer (logits, probs) when ``return_maps``.
        """
        batch = tokens.shape[0]
        x = torch.cat([self._task_tokens(task_index, batch), tokens], dim=1)
        key_mask = torch.cat(
            [torch.zeros(batch, 1, dtype=torch.bool, device=x.device), patch_bg_mask], dim=1
        )
        maps: List[tuple] = []
        for block in self.blocks:
            x, layer_maps = block(x, key_mask, self.rope, 1, self.dropout_generator, return_maps)
            if return_maps:
                maps.append(layer_maps)
        x = self.norm(x)[:, 1:]
        return (x, maps) if return_maps else x

    def forward(self, canvas, task_index, return_maps: bool = False):
        """
        Args:
            canvas: [S, S] or [B, S, S] symbols (numpy or torch)
            task_index: int or [B] task-embedding rows
            return_maps: Also return per-layer attention maps

        Returns:
            Logits [B, S, S, 12] (and the maps when requested)
        """
        tokens, _, bg = self.tokenize(canvas)
        encoded = self.encode(tokens, bg, task_index, return_maps)
        features, maps = encoded if return_maps else (encoded, None)
        p, g = self.config.patch_size, self.config.grid_size
        logits = rearrange(
            self.head(features), "b (h w) (p1 p2 c) -> b (h p1) (w p2) c", h=g, w=g, p1=p, p2=p, c=NUM_SYMBOLS
        )
        return (logits, maps) if return_maps else logits
