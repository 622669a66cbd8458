"""
Canvas placement, view sampling and prediction decoding.

A canvas is an S x S array of symbols: colours 0..9, BG (background) and BD
(border marking the right and bottom edges of a target).
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from src.canvas.transforms import ColorPerm, Dihedral, dihedral_array, scale_array
from src.data.grid import NUM_COLORS, Grid
from src.errors import NoFeasibleView, PlacementOverflow, ScaleOverflow

BG = NUM_COLORS
BD = NUM_COLORS + 1
NUM_SYMBOLS = NUM_COLORS + 2
DEFAULT_CANVAS_SIZE = 64
DEFAULT_MAX_SCALE = 8

Canvas = np.ndarray
ProbField = np.ndarray


@dataclass(frozen=True)
class ViewTransform:
    """One sampled augmentation; grids are transformed dihedral -> colour -> scale."""
    dihedral: Dihedral = Dihedral.IDENTITY
    color: ColorPerm = field(default_factory=ColorPerm.identity)
    scale: int = 1
    offset: Tuple[int, int] = (0, 0)

    def frame(self, pixels: np.ndarray) -> np.ndarray:
        """Apply dihedral then colour permutation (no scaling)."""
        return self.color.apply_array(dihedral_array(pixels, self.dihedral))

    def unframe(self, pixels: np.ndarray) -> np.ndarray:
        """Inverse of ``frame``: inverse colour, then inverse dihedral."""
        return dihedral_array(self.color.inverse().apply_array(pixels), self.dihedral.inverse())


@dataclass(frozen=True)
class DecodeFailure:
    reason: str
    detail: str = ""

    NO_BORDER = "no_border"
    MISALIGNED = "misaligned"
    DEGENERATE = "degenerate"


def new_canvas(size: int = DEFAULT_CANVAS_SIZE) -> Canvas:
    return np.full((size, size), BG, dtype=np.int64)


def _place(g: Grid, v: ViewTransform, size: int, border: bool) -> Canvas:
    framed = v.frame(g.pixels)
    need = 1 if border else 0
    if max(framed.shape) * v.scale + need > size:
        raise ScaleOverflow(
            f"{framed.shape[0]}x{framed.shape[1]} at scale {v.scale} does not fit a {size} canvas"
        )
    scaled = scale_array(framed, v.scale)
    h, w = scaled.shape
    r0, c0 = v.offset
    if r0 < 0 or c0 < 0 or r0 + h + need > size or c0 + w + need > size:
        raise PlacementOverflow(f"{h}x{w} at offset {v.offset} leaves the {size} canvas")

    canvas = new_canvas(size)
    canvas[r0:r0 + h, c0:c0 + w] = scaled
    if border:
        canvas[r0 + h, c0:c0 + w + 1] = BD
        canvas[r0:r0 + h + 1, c0 + w] = BD
    return canvas


def place_input(g: Grid, v: ViewTransform, size: int = DEFAULT_CANVAS_SIZE) -> Canvas:
    """Transform ``g`` by ``v`` and place it on an all-BG canvas."""
    return _place(g, v, size, border=False)


def place_target(g: Grid, v: ViewTransform, size: int = DEFAULT_CANVAS_SIZE) -> Canvas:
    """As place_input, plus an L-shaped BD border just right of and below the grid."""
    return _place(g, v, size, border=True)


def max_feasible_scale(
    in_shape: Tuple[int, int],
    out_shape: Optional[Tuple[int, int]],
    size: int,
    max_scale: int = DEFAULT_MAX_SCALE,
) -> int:
    s_max = size // max(in_shape)
    if out_shape is not None:
        s_max = min(s_max, (size - 1) // max(out_shape))
    return min(s_max, max_scale)


def sample_view(
    rng: np.random.Generator,
    in_shape: Tuple[int, int],
    out_shape: Optional[Tuple[int, int]] = None,
    size: int = DEFAULT_CANVAS_SIZE,
    max_scale: int = DEFAULT_MAX_SCALE,
    dihedral: Dihedral = Dihedral.IDENTITY,
    color: Optional[ColorPerm] = None,
    scale_aug: bool = True,
    translate_aug: bool = True,
) -> ViewTransform:
    """
    Draw a random scale and offset keeping everything visible.

    Args:
        rng: Explicit generator; the same seed gives the same view sequence.
        in_shape: Raw input shape (before ``dihedral``).
        out_shape: Raw target shape when known; its border must also fit.
        size: Canvas side length.
        max_scale: Upper cap on the scale factor.
        dihedral: Dihedral element carried by the view.
        color: Colour permutation carried by the view (identity if None).
        scale_aug: Sample the scale; otherwise use 1.
        translate_aug: Sample the offset; otherwise use (0, 0).

    Returns:
        ViewTransform whose placement of input (and target) fits the canvas.
    """
    in_shape = dihedral.transform_shape(in_shape)
    if out_shape is not None:
        out_shape = dihedral.transform_shape(out_shape)

    s_max = max_feasible_scale(in_shape, out_shape, size, max_scale)
    if s_max < 1:
        raise NoFeasibleView(f"input {in_shape} / output {out_shape} cannot fit a {size} canvas")
    scale = int(rng.integers(1, s_max + 1)) if scale_aug else 1

    extent_h = in_shape[0] * scale
    extent_w = in_shape[1] * scale
    if out_shape is not None:
        extent_h = max(extent_h, out_shape[0] * scale + 1)
        extent_w = max(extent_w, out_shape[1] * scale + 1)
    if translate_aug:
        offset = (int(rng.integers(0, size - extent_h + 1)), int(rng.integers(0, size - extent_w + 1)))
    else:
        offset = (0, 0)

    return ViewTransform(
        dihedral=dihedral,
        color=color if color is not None else ColorPerm.identity(),
        scale=scale,
        offset=offset,
    )


def estimate_output_shape(in_shape: Tuple[int, int], ratio: Tuple[float, float]) -> Tuple[int, int]:
    """Output shape guessed from the largest demo output/input ratio."""
    return (max(1, math.ceil(in_shape[0] * ratio[0])), max(1, math.ceil(in_shape[1] * ratio[1])))


def one_hot(canvas: Canvas) -> ProbField:
    return np.eye(NUM_SYMBOLS, dtype=np.float32)[canvas]


def decode_prediction(p: ProbField, v: ViewTransform) -> Union[Grid, DecodeFailure]:
    """
    Recover a raw grid from per-cell symbol probabilities.

    The output region runs from the view offset up to (excluding) the
    bottom-most row and right-most column containing a BD argmax. Each raw
    cell averages the probabilities of its s x s block, renormalised over the
    colours; ties go to the lowest colour. The view's colour permutation and
    dihedral element are then undone.
    """
    symbols = p.argmax(axis=-1)
    border = symbols == BD
    if not border.any():
        return DecodeFailure(DecodeFailure.NO_BORDER)

    r_star = int(np.nonzero(border.any(axis=1))[0].max())
    c_star = int(np.nonzero(border.any(axis=0))[0].max())
    r0, c0 = v.offset
    if r_star <= r0 or c_star <= c0:
        return DecodeFailure(DecodeFailure.DEGENERATE, f"border at ({r_star}, {c_star}), offset {v.offset}")

    h, w = r_star - r0, c_star - c0
    s = v.scale
    if h % s or w % s:
        return DecodeFailure(DecodeFailure.MISALIGNED, f"extent {h}x{w} at scale {s}")

    region = p[r0:r_star, c0:c_star, :NUM_COLORS].astype(np.float64)
    blocks = region.reshape(h // s, s, w // s, s, NUM_COLORS).mean(axis=(1, 3))
    blocks /= np.maximum(blocks.sum(axis=-1, keepdims=True), 1e-12)
    framed = blocks.argmax(axis=-1).astype(np.int8)
    return Grid(v.unframe(framed))
