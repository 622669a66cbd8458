"""
Symmetry and colour transforms on grids, and integer nearest-neighbour scaling.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from src.data.grid import NUM_COLORS, Grid
from src.errors import ScaleOverflow


class Dihedral(Enum):
    """Symmetries of the square, stored as (flip, k): flip left-right first,
    then rotate clockwise k quarter turns.

    The six augmentation tags are a subset; TRANSPOSE and ANTI_TRANSPOSE
    complete the group so that composition is closed.
    """
    IDENTITY = (False, 0)
    ROT90 = (False, 1)
    ROT180 = (False, 2)
    ROT270 = (False, 3)
    FLIP_H = (True, 0)
    ANTI_TRANSPOSE = (True, 1)
    FLIP_V = (True, 2)
    TRANSPOSE = (True, 3)

    @property
    def flip(self) -> bool:
        return self.value[0]

    @property
    def turns(self) -> int:
        return self.value[1]

    @property
    def swaps_axes(self) -> bool:
        return self.turns % 2 == 1

    def then(self, other: "Dihedral") -> "Dihedral":
        """Element equal to applying ``self`` first and ``other`` second."""
        if not other.flip:
            return Dihedral((self.flip, (self.turns + other.turns) % 4))
        # a left-right flip reverses the sense of any rotation before it
        return Dihedral((not self.flip, (other.turns - self.turns) % 4))

    def inverse(self) -> "Dihedral":
        if self.flip:
            return self
        return Dihedral((False, (-self.turns) % 4))

    def transform_shape(self, shape: Tuple[int, int]) -> Tuple[int, int]:
        return (shape[1], shape[0]) if self.swaps_axes else tuple(shape)


AUGMENTATION_DIHEDRALS = (
    Dihedral.IDENTITY,
    Dihedral.FLIP_H,
    Dihedral.FLIP_V,
    Dihedral.ROT90,
    Dihedral.ROT180,
    Dihedral.ROT270,
)


def dihedral_array(pixels: np.ndarray, d: Dihedral) -> np.ndarray:
    out = np.fliplr(pixels) if d.flip else pixels
    return np.ascontiguousarray(np.rot90(out, k=-d.turns, axes=(0, 1)))


def apply_dihedral(g: Grid, d: Dihedral) -> Grid:
    """Rotate clockwise / flip a grid; odd rotations transpose the shape."""
    return Grid(dihedral_array(g.pixels, d))


@dataclass(frozen=True)
class ColorPerm:
    """Bijection on the colours 0..9; ``mapping[c]`` is the image of c."""
    mapping: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.mapping) != list(range(NUM_COLORS)):
            raise ValueError(f"colour permutation must be a bijection on 0..{NUM_COLORS - 1}")

    @classmethod
    def identity(cls) -> "ColorPerm":
        return cls(tuple(range(NUM_COLORS)))

    @classmethod
    def from_swaps(cls, swaps: Sequence[Tuple[int, int]]) -> "ColorPerm":
        mapping = list(range(NUM_COLORS))
        for a, b in swaps:
            mapping[a], mapping[b] = mapping[b], mapping[a]
        return cls(tuple(mapping))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "ColorPerm":
        return cls(tuple(int(c) for c in rng.permutation(NUM_COLORS)))

    @property
    def is_identity(self) -> bool:
        return self.mapping == tuple(range(NUM_COLORS))

    def inverse(self) -> "ColorPerm":
        inv = [0] * NUM_COLORS
        for src, dst in enumerate(self.mapping):
            inv[dst] = src
        return ColorPerm(tuple(inv))

    def then(self, other: "ColorPerm") -> "ColorPerm":
        return ColorPerm(tuple(other.mapping[c] for c in self.mapping))

    def apply_array(self, pixels: np.ndarray) -> np.ndarray:
        return np.asarray(self.mapping, dtype=pixels.dtype)[pixels]


def apply_color_perm(g: Grid, p: ColorPerm) -> Grid:
    return Grid(p.apply_array(g.pixels))


def scale_grid(g: Grid, s: int, limit: Optional[int] = None) -> Grid:
    """
    Nearest-neighbour integer upscaling: each cell becomes an s x s block.

    Args:
        g: Grid to scale
        s: Integer scale factor (>= 1)
        limit: Largest allowed side length of the result, if any

    Returns:
        Grid of shape (s*rows, s*cols)
    """
    if s < 1:
        raise ValueError(f"scale must be >= 1, got {s}")
    if limit is not None and max(g.rows, g.cols) * s > limit:
        raise ScaleOverflow(f"{g.rows}x{g.cols} at scale {s} exceeds {limit}")
    return Grid(scale_array(g.pixels, s))


def scale_array(pixels: np.ndarray, s: int) -> np.ndarray:
    return np.repeat(np.repeat(pixels, s, axis=0), s, axis=1)


def downsample_majority(g: Grid, s: int) -> Grid:
    """Inverse of scale_grid: most frequent colour per s x s block (lowest wins ties)."""
    if g.rows % s or g.cols % s:
        raise ValueError(f"{g.rows}x{g.cols} is not divisible by {s}")
    blocks = g.pixels.reshape(g.rows // s, s, g.cols // s, s).transpose(0, 2, 1, 3)
    blocks = blocks.reshape(g.rows // s, g.cols // s, s * s)
    counts = (blocks[..., None] == np.arange(NUM_COLORS)).sum(axis=2)
    return Grid(counts.argmax(axis=-1))
