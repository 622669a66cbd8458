"""
Inference and evaluation settings.
"""
from pydantic import BaseModel, ConfigDict, Field

from src.canvas.placement import DEFAULT_MAX_SCALE
from src.training.aux_tasks import AUX_SEED, NUM_COLOR_PERMS, AUX_DIHEDRALS

MAX_AUX = 1 + len(AUX_DIHEDRALS) * NUM_COLOR_PERMS


class InferenceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    views_per_aux: int = Field(10, gt=0, description="Random geometries per auxiliary task")
    num_aux: int = Field(MAX_AUX, ge=1, le=MAX_AUX, description="Auxiliary tasks used for voting")
    aux_seed: int = Field(AUX_SEED, ge=0)
    view_seed: int = Field(0, ge=0)
    k: int = Field(2, ge=1)
    max_scale: int = Field(DEFAULT_MAX_SCALE, gt=0)
    batch_size: int = Field(64, gt=0)
    single_view: bool = False
    joint_ttt: bool = False
    jobs: int = Field(1, ge=1)
