"""
Offline multi-task training: one shared model, one task embedding per
training task, trained on the demo pairs of every task.
"""
import logging
from typing import Any, Dict, Optional

from src.canvas.placement import max_feasible_scale
from src.data.grid import TaskSet
from src.errors import ConfigError, NoFeasibleView, PlacementOverflow, ScaleOverflow
from src.inference.predict import Candidate, predict_view
from src.model.checkpoint import Checkpoint, checkpoint_from_model, model_from_checkpoint, restore_optimizer_state
from src.model.vit import VarcViT, VitConfig
from src.nn.optim import build_optimizer
from src.training.aux_tasks import build_aux_tasks
from src.training.config import TrainConfig
from src.training.dataset import build_samples
from src.training.loop import fit
from src.utils.artifacts import append_jsonl, reset_jsonl
from src.utils.metadata import run_metadata, taskset_hash

logger = logging.getLogger(__name__)


def validate(model: VarcViT, taskset: TaskSet, index_offset: int = 0) -> float:
    """
    Single-view exact match on the held-back infer pairs of ``taskset``.

    Each input is placed unscaled at the canvas origin and decoded with the
    task's own embedding. Pairs without a known output are ignored.
    """
    identity = build_aux_tasks()[0]
    size = model.config.canvas_size
    correct = total = 0
    for i, task in enumerate(taskset):
        for pair in task.infer:
            if pair.output is None:
                continue
            total += 1
            if max_feasible_scale(pair.input.shape, None, size) < 1:
                continue
            try:
                result = predict_view(model, pair.input, identity, (1, (0, 0)), embedding_offset=index_offset + i)
            except (ScaleOverflow, PlacementOverflow, NoFeasibleView):
                continue
            if isinstance(result, Candidate) and result.grid == pair.output:
                correct += 1
    return correct / total if total else 0.0


def train_offline(
    taskset: TaskSet,
    cfg: TrainConfig,
    model_config: VitConfig,
    device: str = "cpu",
    metrics_path: Optional[str] = None,
    provenance: Optional[Dict[str, Any]] = None,
    resume: Optional[Checkpoint] = None,
) -> Checkpoint:
    """
    Train a model on every demo pair of ``taskset``, from scratch or resumed.

    Args:
        taskset: Training tasks; task i uses embedding row i
        cfg: Offline training configuration
        model_config: Architecture of the model to build
        device: Torch device
        metrics_path: JSON-lines file receiving one record per epoch
        provenance: Configuration dump embedded in the checkpoint
        resume: Earlier offline checkpoint to continue from; its architecture
            replaces ``model_config`` and its Adam moments are restored when saved

    Returns:
        Checkpoint with the trained parameters and the epoch history
    """
    start_epoch = 0
    if resume is not None:
        if resume.metadata.get("task_ids") != taskset.task_ids:
            raise ConfigError("resumed checkpoint was trained on a different task list", key="resume")
        model_config = resume.vit_config
        start_epoch = int(resume.metadata.get("epoch", 0))

    if model_config.num_task_embeddings < len(taskset):
        raise ConfigError(
            f"model.num_task_embeddings={model_config.num_task_embeddings} < {len(taskset)} training tasks",
            key="model.num_task_embeddings",
        )

    if resume is None:
        model = VarcViT(model_config, seed=cfg.seed).to(device)
    else:
        model = model_from_checkpoint(resume, device)
    optimizer = build_optimizer(model.parameters(), cfg.base_lr, cfg.betas, cfg.adam_eps)
    if resume is not None:
        if resume.has_optimizer_state:
            restore_optimizer_state(resume, model, optimizer)
            logger.info(f"Resuming after epoch {start_epoch} with Adam state at step {resume.metadata.get('adam_step')}")
        else:
            logger.warning(f"Resuming after epoch {start_epoch} without saved Adam state; moments restart at zero")
    samples = build_samples(taskset)
    logger.info(f"Offline training on {len(samples)} demo pairs from {len(taskset)} tasks for {cfg.epochs} epochs")
    if metrics_path and resume is None:
        reset_jsonl(metrics_path)

    def on_epoch_end(epoch: int, stats: Dict[str, float]) -> Dict[str, float]:
        extra = {}
        if cfg.validate_every and (epoch % cfg.validate_every == 0 or epoch == cfg.epochs):
            extra["val_exact_match"] = validate(model, taskset)
        record = dict(stats, **extra)
        if metrics_path:
            append_jsonl(metrics_path, record)
        message = f"Epoch {epoch}/{cfg.epochs}: loss={stats['loss']:.4f} lr={stats['lr']:.2e}"
        if "val_exact_match" in extra:
            message += f" val_exact_match={extra['val_exact_match']:.3f}"
        logger.info(message)
        return extra

    history = fit(model, samples, cfg, optimizer=optimizer, on_epoch_end=on_epoch_end, desc="Offline training")

    metadata = run_metadata(
        provenance if provenance is not None else {"train": cfg.model_dump()},
        cfg.seed,
        taskset_hash(taskset),
        stage="offline",
        epoch=start_epoch + len(history),
        task_ids=taskset.task_ids,
        history=(resume.metadata.get("history", []) if resume is not None else []) + history,
    )
    return checkpoint_from_model(model, metadata, optimizer if cfg.save_optimizer else None)
