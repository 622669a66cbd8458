"""
Artifact writers: JSON reports, JSON-lines metrics, CSV matrices, PGM images
and text canvas dumps. Files are written through a temp file and renamed.
"""
import io
import json
import logging
import os
import tempfile
from typing import Any, Dict, Optional

import numpy as np

from src.canvas.placement import BD, BG, NUM_SYMBOLS

logger = logging.getLogger(__name__)

CANVAS_CHARS = "0123456789.#"
# Grey level per symbol: colours spread over 0..225, BG white, BD black.
SYMBOL_LEVELS = np.zeros(NUM_SYMBOLS, dtype=np.uint8)
SYMBOL_LEVELS[:BG] = np.arange(BG) * 25
SYMBOL_LEVELS[BG] = 255
SYMBOL_LEVELS[BD] = 0


def write_atomic(path: str, data: bytes) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def write_json(path: str, data: Any) -> str:
    write_atomic(path, (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    logger.info(f"Wrote {path}")
    return path


def reset_jsonl(path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    open(path, "w", encoding="utf-8").close()


def append_jsonl(path: str, record: Dict[str, Any]) -> None:
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


def write_csv(path: str, matrix: np.ndarray, header: Optional[str] = None) -> str:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    buffer = io.BytesIO()
    np.savetxt(buffer, matrix, fmt="%.8g", delimiter=",", header=header or "", comments="")
    write_atomic(path, buffer.getvalue())
    logger.info(f"Wrote {path} ({matrix.shape[0]}x{matrix.shape[1]})")
    return path


def pgm_bytes(image: np.ndarray) -> bytes:
    """Binary (P5) 8-bit greyscale image."""
    image = np.asarray(image, dtype=np.uint8)
    rows, cols = image.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + image.tobytes()


def heatmap_image(values: np.ndarray, upscale: int = 1) -> np.ndarray:
    """Min-max normalise to 0..255 and repeat each cell ``upscale`` times per axis."""
    values = np.asarray(values, dtype=np.float64)
    low, high = values.min(), values.max()
    span = high - low
    normalised = (values - low) / span if span > 0 else np.zeros_like(values)
    image = np.round(normalised * 255).astype(np.uint8)
    return np.kron(image, np.ones((upscale, upscale), dtype=np.uint8))


def write_heatmap_pgm(path: str, values: np.ndarray, upscale: int = 1) -> str:
    write_atomic(path, pgm_bytes(heatmap_image(values, upscale)))
    logger.info(f"Wrote {path}")
    return path


def canvas_text(canvas: np.ndarray) -> str:
    return "\n".join("".join(CANVAS_CHARS[int(v)] for v in row) for row in canvas) + "\n"


def write_canvas(path_prefix: str, canvas: np.ndarray, upscale: int = 4) -> Dict[str, str]:
    """Dump a canvas as ``<prefix>.txt`` and ``<prefix>.pgm``."""
    canvas = np.asarray(canvas)
    if canvas.min() < 0 or canvas.max() >= NUM_SYMBOLS:
        raise ValueError(f"canvas symbols must lie in 0..{NUM_SYMBOLS - 1}")
    txt_path = write_atomic(path_prefix + ".txt", canvas_text(canvas).encode("ascii"))
    image = np.kron(SYMBOL_LEVELS[canvas], np.ones((upscale, upscale), dtype=np.uint8))
    pgm_path = write_atomic(path_prefix + ".pgm", pgm_bytes(image))
    logger.info(f"Wrote {txt_path} and {pgm_path}")
    return {"text": txt_path, "pgm": pgm_path}
