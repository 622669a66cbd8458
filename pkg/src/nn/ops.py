"""
Functional layer operations used by the ViT.

All functions are dtype-agnostic so they can be gradient-checked in float64.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F
from einops import rearrange

from src.errors import EmptyMask, ShapeMismatch

MASK_VALUE = -1e9
ROPE_BASE = 10000.0


def trunc_normal(
    shape: Sequence[int],
    std: float = 0.02,
    generator: Optional[torch.Generator] = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Normal(0, std) truncated to +-2 std, sampled by inverse CDF."""
    lo = 0.5 * (1.0 + math.erf(-2.0 / math.sqrt(2.0)))
    hi = 0.5 * (1.0 + math.erf(2.0 / math.sqrt(2.0)))
    u = torch.rand(tuple(shape), generator=generator, dtype=torch.float64) * (hi - lo) + lo
    return (torch.erfinv(2.0 * u - 1.0) * math.sqrt(2.0) * std).to(dtype)


def linear(x: torch.Tensor, weight: torch.Tensor, bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Affine map; ``weight`` is [D_out, D_in]."""
    if x.shape[-1] != weight.shape[-1]:
        raise ShapeMismatch(f"input dim {x.shape[-1]} != weight in-dim {weight.shape[-1]}")
    if bias is not None and bias.shape[-1] != weight.shape[0]:
        raise ShapeMismatch(f"bias dim {bias.shape[-1]} != weight out-dim {weight.shape[0]}")
    return F.linear(x, weight, bias)


def layer_norm(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    return F.layer_norm(x, (x.shape[-1],), gamma, beta, eps)


def softmax(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    return torch.softmax(x, dim=dim)


def gelu(x: torch.Tensor) -> torch.Tensor:
    return F.gelu(x)


def dropout(
    x: torch.Tensor,
    rate: float,
    train_mode: bool,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Inverted dropout with an explicit generator; identity at inference or rate 0."""
    if not train_mode or rate <= 0.0:
        return x
    keep = torch.empty_like(x).bernoulli_(1.0 - rate, generator=generator)
    return x * keep / (1.0 - rate)


def embedding(table: torch.Tensor, indices: torch.Tensor) -> torch.Tensor:
    """Row lookup; the backward pass scatter-adds into the table."""
    return F.embedding(indices, table)


@dataclass(frozen=True)
class RopeTable:
    """Per-token rotation angles as cos/sin of shape [T, D_head / 2]."""
    cos: torch.Tensor
    sin: torch.Tensor

    @classmethod
    def rope2d(
        cls,
        rows: torch.Tensor,
        cols: torch.Tensor,
        head_dim: int,
        base: float = ROPE_BASE,
    ) -> "RopeTable":
        """First half of the channels follows the column, second half the row."""
        if head_dim % 4:
            raise ShapeMismatch(f"2D RoPE needs head_dim divisible by 4, got {head_dim}")
        quarter = head_dim // 4
        theta = base ** (-2.0 * torch.arange(quarter, dtype=torch.float64) / (head_dim // 2))
        angles = torch.cat(
            [cols.double()[:, None] * theta, rows.double()[:, None] * theta], dim=-1
        )
        return cls(torch.cos(angles).float(), torch.sin(angles).float())

    @classmethod
    def rope1d(cls, positions: torch.Tensor, head_dim: int, base: float = ROPE_BASE) -> "RopeTable":
        if head_dim % 2:
            raise ShapeMismatch(f"RoPE needs an even head_dim, got {head_dim}")
        half = head_dim // 2
        theta = base ** (-2.0 * torch.arange(half, dtype=torch.float64) / head_dim)
        angles = positions.double()[:, None] * theta
        return cls(torch.cos(angles).float(), torch.sin(angles).float())


def apply_rope(x: torch.Tensor, table: RopeTable) -> torch.Tensor:
    """Rotate consecutive channel pairs of ``x`` [..., T, D] by the table's angles."""
    if x.shape[-1] != 2 * table.cos.shape[-1] or x.shape[-2] != table.cos.shape[0]:
        raise ShapeMismatch(f"RoPE table {tuple(table.cos.shape)} does not match input {tuple(x.shape)}")
    cos = table.cos.to(device=x.device, dtype=x.dtype)
    sin = table.sin.to(device=x.device, dtype=x.dtype)
    even, odd = x[..., 0::2], x[..., 1::2]
    rotated = torch.stack((even * cos - odd * sin, even * sin + odd * cos), dim=-1)
    return rotated.flatten(-2)


def rope2d_apply(
    x: torch.Tensor,
    coords: Union[torch.Tensor, Sequence[Tuple[int, int]]],
    base: float = ROPE_BASE,
) -> torch.Tensor:
    """
    Separable 2D rotary encoding.

    Args:
        x: Tensor [..., T, D_head] with D_head divisible by 4
        coords: (row, col) per token, shape [T, 2]
        base: Frequency base

    Returns:
        Tensor of the same shape with per-pair rotations applied
    """
    coords = torch.as_tensor(coords)
    if coords.ndim != 2 or coords.shape[-1] != 2:
        raise ShapeMismatch(f"coords must be [T, 2], got {tuple(coords.shape)}")
    table = RopeTable.rope2d(coords[:, 0], coords[:, 1], x.shape[-1], base)
    return apply_rope(x, table)


def multi_head_attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    heads: int,
    key_mask: Optional[torch.Tensor] = None,
    rope: Optional[RopeTable] = None,
    num_prefix: int = 0,
    return_maps: bool = False,
):
    """
    Scaled dot-product attention over ``heads`` heads.

    Args:
        q, k, v: Tensors [..., T, D] with D divisible by ``heads``.
        heads: Number of heads.
        key_mask: Boolean [..., T]; True keys get MASK_VALUE added to their logits.
        rope: Rotary table for the T - num_prefix non-prefix tokens.
        num_prefix: Leading tokens exempt from rotation; their logits with any
            other token use unrotated queries and keys.
        return_maps: Also return pre-softmax logits and softmax maps [..., H, T, T].

    Returns:
        Output tensor [..., T, D] (and the maps when requested).
    """
    if q.shape != k.shape or q.shape != v.shape:
        raise ShapeMismatch(f"q/k/v shapes differ: {tuple(q.shape)}, {tuple(k.shape)}, {tuple(v.shape)}")
    dim = q.shape[-1]
    if dim % heads:
        raise ShapeMismatch(f"dim {dim} not divisible by {heads} heads")
    scale = (dim // heads) ** -0.5

    qh, kh, vh = (rearrange(t, "... t (h d) -> ... h t d", h=heads) for t in (q, k, v))
    if rope is None:
        logits = qh @ kh.transpose(-1, -2)
    else:
        p = num_prefix
        q_rot = apply_rope(qh[..., p:, :], rope)
        k_rot = apply_rope(kh[..., p:, :], rope)
        prefix_rows = qh[..., :p, :] @ kh.transpose(-1, -2)
        prefix_cols = qh[..., p:, :] @ kh[..., :p, :].transpose(-1, -2)
        body = q_rot @ k_rot.transpose(-1, -2)
        logits = torch.cat([prefix_rows, torch.cat([prefix_cols, body], dim=-1)], dim=-2)
    logits = logits * scale

    if key_mask is not None:
        if key_mask.shape[-1] != q.shape[-2]:
            raise ShapeMismatch(f"key_mask length {key_mask.shape[-1]} != {q.shape[-2]} tokens")
        logits = logits + key_mask[..., None, None, :].to(logits.dtype) * MASK_VALUE

    probs = softmax(logits, dim=-1)
    out = rearrange(probs @ vh, "... h t d -> ... t (h d)")
    if return_maps:
        return out, logits, probs
    return out


def cross_entropy_masked(
    logits: torch.Tensor,
    target: torch.Tensor,
    mask: torch.Tensor,
    per_sample: bool = False,
) -> torch.Tensor:
    """
    Mean per-pixel cross-entropy over masked cells.

    Args:
        logits: [..., S, S, C] unnormalised scores
        target: [..., S, S] symbol indices
        mask: [..., S, S] boolean, True where the loss applies
        per_sample: Return one mean per leading index instead of a scalar

    Returns:
        Scalar loss, or [...] per-sample losses
    """
    if target.shape != logits.shape[:-1] or mask.shape != target.shape:
        raise ShapeMismatch(
            f"logits {tuple(logits.shape)}, target {tuple(target.shape)}, mask {tuple(mask.shape)}"
        )
    nll = -F.log_softmax(logits, dim=-1).gather(-1, target.long().unsqueeze(-1)).squeeze(-1)
    if per_sample:
        counts = mask.sum(dim=(-2, -1))
        if (counts == 0).any():
            raise EmptyMask("a sample has no masked cells")
        return (nll * mask).sum(dim=(-2, -1)) / counts
    if not mask.any():
        raise EmptyMask("mask has no true cells")
    return nll[mask].mean()
