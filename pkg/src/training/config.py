"""
Training hyperparameters shared by offline training and test-time training.
"""
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import NUM_WORKERS


class TrainConfig(BaseModel):
    """Optimisation and augmentation settings for one training stage."""
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(100, ge=0)
    warmup_epochs: int = Field(10, ge=1)
    batch_size: int = Field(32, gt=0)
    base_lr: float = Field(3e-4, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0)
    dropout: Optional[float] = Field(None, ge=0.0, lt=1.0, description="Overrides both model dropout rates")
    seed: int = Field(0, ge=0)
    scale_aug: bool = True
    translate_aug: bool = True
    max_scale: int = Field(8, gt=0)
    num_workers: int = Field(NUM_WORKERS, ge=0, description="DataLoader workers (VARC_NUM_WORKERS)")
    validate_every: int = Field(10, ge=0, description="Epochs between validations; 0 disables")
    save_optimizer: bool = False
    ttt_scope: Literal["full", "embeddings"] = "full"
    snapshot_every: int = Field(0, ge=0, description="Epochs between TTT prediction snapshots; 0 disables")

    @model_validator(mode="after")
    def _check_warmup(self) -> "TrainConfig":
        if self.epochs > 0 and self.warmup_epochs >= self.epochs:
            raise ValueError(f"warmup_epochs ({self.warmup_epochs}) must be < epochs ({self.epochs})")
        return self

    @classmethod
    def for_ttt(cls, **overrides) -> "TrainConfig":
        """Test-time defaults: same schedule, batch size 8."""
        values = {"batch_size": 8}
        values.update(overrides)
        return cls(**values)
