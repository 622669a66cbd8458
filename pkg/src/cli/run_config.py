"""
Run configuration: one flat ``section.key = value`` file plus command-line
overrides, validated into nested pydantic models.

Example file::

    # 18M model, desk-scale schedule
    seed = 0
    model.depth = 10
    train.epochs = 100
    train.betas = [0.9, 0.999]
    ttt.batch_size = 8
    inference.views_per_aux = 10
    data.train_path = data/training
"""
import json
import logging
import os
from typing import Any, Dict, Iterable, Optional

import torch
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import DATA_DIR, DEVICE, OUTPUT_DIR, SEED
from src.errors import ConfigError
from src.inference.config import InferenceConfig
from src.model.vit import VitConfig
from src.training.config import TrainConfig

logger = logging.getLogger(__name__)


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train_path: Optional[str] = os.path.join(DATA_DIR, "training")
    eval_path: Optional[str] = os.path.join(DATA_DIR, "evaluation")
    solutions_path: Optional[str] = None
    rearc_path: Optional[str] = None
    rearc_pairs_per_task: int = Field(0, ge=0, description="0 keeps the base demos only")
    rearc_with_replacement: bool = False
    max_train_tasks: Optional[int] = Field(None, gt=0)


class RunConfig(BaseModel):
    """Everything a run needs; embedded verbatim in checkpoints and reports."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(SEED, ge=0)
    device: str = DEVICE
    output_dir: str = OUTPUT_DIR
    model: VitConfig = Field(default_factory=VitConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    ttt: TrainConfig = Field(default_factory=TrainConfig.for_ttt)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    def train_config(self) -> TrainConfig:
        """Offline stage with the run seed added to the stage seed."""
        return self.train.model_copy(update={"seed": self.seed + self.train.seed})

    def ttt_config(self) -> TrainConfig:
        return self.ttt.model_copy(update={"seed": self.seed + self.ttt.seed})

    def dump(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


SECTIONS = ("model", "train", "ttt", "inference", "data")


def _coerce(raw: Optional[str]) -> Any:
    """Strings stay strings for pydantic to coerce; lists and nulls are parsed here."""
    if raw is None:
        return None
    value = raw.strip()
    if value.lower() in ("none", "null", ""):
        return None
    if value.startswith("["):
        try:
            return json.loads(value)
        except json.JSONDecodeError as e:
            raise ConfigError(f"cannot parse list value {value!r}: {e}") from e
    return value


def _nest(values: Dict[str, Optional[str]]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, raw in values.items():
        parts = key.strip().split(".")
        if len(parts) == 1:
            if parts[0] in SECTIONS:
                raise ConfigError(f"section {parts[0]!r} needs a field, e.g. {parts[0]}.<field>", key=key)
            nested[parts[0]] = _coerce(raw)
        elif len(parts) == 2:
            section, field = parts
            if section not in SECTIONS:
                raise ConfigError(f"unknown config key {key!r}", key=key)
            nested.setdefault(section, {})[field] = _coerce(raw)
        else:
            raise ConfigError(f"unknown config key {key!r}", key=key)
    return nested


def parse_overrides(overrides: Iterable[str]) -> Dict[str, str]:
    parsed = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value", key=item)
        key, value = item.split("=", 1)
        parsed[key.strip()] = value
    return parsed


def load_run_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Build a RunConfig from an optional file and ``section.key=value`` overrides.

    Raises:
        ConfigError: Missing file, malformed line, unknown key or invalid value;
            ``key`` names the offending setting
    """
    values: Dict[str, Optional[str]] = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} not found")
        values.update(dotenv_values(path))
    values.update(parse_overrides(overrides))

    try:
        config = RunConfig(**_nest(values))
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"])
        raise ConfigError(f"invalid config key {key!r}: {error['msg']}", key=key) from e
    logger.debug(f"Run config: {config.dump()}")
    return config


def resolve_device(name: str) -> str:
    if name == "auto":
        return "cuda" if torch.cuda.is_available() else "cpu"
    return name
