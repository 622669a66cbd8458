"""
Binary checkpoint files.

Layout (all integers little-endian):

    b"VARC" | u32 version | u64 metadata length | metadata (canonical JSON)
    u32 tensor count
    per tensor: u32 name length | name (UTF-8) | u32 rank | rank x u64 dims
                | float32 payload

Tensors are named ``model/<parameter>`` and, when optimizer state is saved,
``adam/<parameter>/exp_avg`` and ``adam/<parameter>/exp_avg_sq``.
"""
import io
import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import torch

from src.errors import CheckpointFormatError
from src.model.vit import VarcViT, VitConfig
from src.utils.metadata import canonical_json

logger = logging.getLogger(__name__)

MAGIC = b"VARC"
FORMAT_VERSION = 1
MODEL_PREFIX = "model/"
ADAM_PREFIX = "adam/"


@dataclass
class Checkpoint:
    """Metadata plus an ordered table of float32 arrays."""
    metadata: Dict[str, Any]
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def vit_config(self) -> VitConfig:
        return VitConfig(**self.metadata["model"])

    @property
    def has_optimizer_state(self) -> bool:
        return any(name.startswith(ADAM_PREFIX) for name in self.tensors)

    def model_state(self) -> Dict[str, torch.Tensor]:
        return {
            name[len(MODEL_PREFIX):]: torch.from_numpy(np.array(array, dtype=np.float32))
            for name, array in self.tensors.items()
            if name.startswith(MODEL_PREFIX)
        }


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    buffer = io.BytesIO()
    metadata = canonical_json(checkpoint.metadata).encode("utf-8")
    buffer.write(MAGIC)
    buffer.write(struct.pack("<IQ", FORMAT_VERSION, len(metadata)))
    buffer.write(metadata)
    buffer.write(struct.pack("<I", len(checkpoint.tensors)))
    for name, array in checkpoint.tensors.items():
        encoded_name = name.encode("utf-8")
        array = np.ascontiguousarray(array, dtype="<f4")
        buffer.write(struct.pack("<I", len(encoded_name)))
        buffer.write(encoded_name)
        buffer.write(struct.pack("<I", array.ndim))
        buffer.write(struct.pack(f"<{array.ndim}Q", *array.shape))
        buffer.write(array.tobytes())
    return buffer.getvalue()


def _read(stream: io.BytesIO, size: int) -> bytes:
    chunk = stream.read(size)
    if len(chunk) != size:
        raise CheckpointFormatError("truncated checkpoint")
    return chunk


def decode_checkpoint(data: bytes) -> Checkpoint:
    stream = io.BytesIO(data)
    if _read(stream, 4) != MAGIC:
        raise CheckpointFormatError("not a VARC checkpoint (bad magic)")
    version, metadata_length = struct.unpack("<IQ", _read(stream, 12))
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    try:
        metadata = json.loads(_read(stream, metadata_length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"corrupt metadata block: {e}") from e

    (count,) = struct.unpack("<I", _read(stream, 4))
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = struct.unpack("<I", _read(stream, 4))
        name = _read(stream, name_length).decode("utf-8")
        (rank,) = struct.unpack("<I", _read(stream, 4))
        shape = struct.unpack(f"<{rank}Q", _read(stream, 8 * rank))
        size = int(np.prod(shape, dtype=np.int64))
        payload = _read(stream, 4 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if stream.read(1):
        raise CheckpointFormatError("trailing bytes after tensor table")
    return Checkpoint(metadata=metadata, tensors=tensors)


def save_checkpoint(checkpoint: Checkpoint, path: str) -> str:
    """Write atomically: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    data = encode_checkpoint(checkpoint)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".varc")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"Wrote checkpoint {path} ({len(checkpoint.tensors)} tensors, {len(data)} bytes)")
    return path


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data)


def checkpoint_from_model(
    model: VarcViT,
    metadata: Dict[str, Any],
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> Checkpoint:
    """
    Snapshot a model (and optionally its Adam moments).

    The model's VitConfig is stored under ``metadata["model"]``; the Adam step
    counter under ``metadata["adam_step"]``.
    """
    metadata = dict(metadata)
    metadata["model"] = model.config.model_dump()
    tensors: Dict[str, np.ndarray] = {}
    named = list(model.named_parameters())
    for name, param in named:
        tensors[MODEL_PREFIX + name] = param.detach().cpu().float().numpy().copy()

    if optimizer is not None:
        step = 0
        for name, param in named:
            state = optimizer.state.get(param)
            if not state:
                continue
            step = int(state["step"])
            tensors[f"{ADAM_PREFIX}{name}/exp_avg"] = state["exp_avg"].detach().cpu().float().numpy().copy()
            tensors[f"{ADAM_PREFIX}{name}/exp_avg_sq"] = state["exp_avg_sq"].detach().cpu().float().numpy().copy()
        metadata["adam_step"] = step
    return Checkpoint(metadata=metadata, tensors=tensors)


def model_from_checkpoint(checkpoint: Checkpoint, device: str = "cpu") -> VarcViT:
    model = VarcViT(checkpoint.vit_config)
    missing, unexpected = model.load_state_dict(checkpoint.model_state(), strict=False)
    if missing or unexpected:
        raise CheckpointFormatError(f"parameter mismatch: missing={missing} unexpected={unexpected}")
    return model.to(device)


def restore_optimizer_state(
    checkpoint: Checkpoint,
    model: VarcViT,
    optimizer: torch.optim.Optimizer,
) -> None:
    """Load saved Adam moments into ``optimizer`` (built over ``model``'s parameters)."""
    step = float(checkpoint.metadata.get("adam_step", 0))
    for name, param in model.named_parameters():
        key = f"{ADAM_PREFIX}{name}"
        if f"{key}/exp_avg" not in checkpoint.tensors:
            continue
        optimizer.state[param] = {
            "step": torch.tensor(step),
            "exp_avg": torch.from_numpy(checkpoint.tensors[f"{key}/exp_avg"].copy()).to(param.device),
            "exp_avg_sq": torch.from_numpy(checkpoint.tensors[f"{key}/exp_avg_sq"].copy()).to(param.device),
        }
