"""
Test-time training: adapt the offline model to one unseen task from its
demo pairs, expanded over the auxiliary tasks.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import torch

from src.data.grid import Task
from src.errors import MissingField, PlacementOverflow, ScaleOverflow
from src.inference.predict import Candidate, predict_view
from src.model.checkpoint import Checkpoint, model_from_checkpoint
from src.model.vit import VarcViT
from src.training.aux_tasks import AuxTask, build_aux_tasks
from src.training.config import TrainConfig
from src.training.dataset import DEMO, TrainingSample
from src.training.loop import fit

logger = logging.getLogger(__name__)


@dataclass
class AdaptedModel:
    """A model tuned for one task; its auxiliary embeddings start at ``embedding_offset``."""
    model: VarcViT
    aux_tasks: List[AuxTask]
    task_id: str
    embedding_offset: int = 0
    history: List[Dict[str, float]] = field(default_factory=list)
    snapshots: List[Dict[str, Any]] = field(default_factory=list)

    def embedding_index(self, aux_index: int) -> int:
        return self.embedding_offset + aux_index


def aux_samples(task: Task, aux_tasks: Sequence[AuxTask], embedding_offset: int = 0) -> List[TrainingSample]:
    """Every demo pair under every auxiliary task: |demo| x |aux| samples."""
    if not task.demo:
        raise MissingField(f"task {task.task_id} has no demo pairs")
    return [
        TrainingSample(pair.input, pair.output, embedding_offset + aux.aux_index, DEMO, aux.dihedral, aux.color)
        for pair in task.demo
        for aux in aux_tasks
    ]


def _prepare_model(base: Checkpoint, num_embeddings: int, cfg: TrainConfig, device: str) -> VarcViT:
    model = model_from_checkpoint(base, device)
    model.reset_task_embeddings(num_embeddings, torch.Generator().manual_seed(cfg.seed))
    return model


def _trainable_parameters(model: VarcViT, scope: str) -> List[torch.nn.Parameter]:
    if scope == "embeddings":
        for param in model.parameters():
            param.requires_grad_(False)
        model.task_embed.weight.requires_grad_(True)
        return [model.task_embed.weight]
    return list(model.parameters())


def snapshot_predictions(model: VarcViT, task: Task, aux: AuxTask, embedding_offset: int, epoch: int) -> List[Dict[str, Any]]:
    """Single-view predictions for every infer input, for TTT progress dumps."""
    records = []
    for j, pair in enumerate(task.infer):
        record: Dict[str, Any] = {"epoch": epoch, "infer_index": j, "output": None, "failure": None}
        try:
            result = predict_view(model, pair.input, aux, (1, (0, 0)), embedding_offset)
        except (ScaleOverflow, PlacementOverflow) as e:
            record["failure"] = str(e)
        else:
            if isinstance(result, Candidate):
                record["output"] = result.grid.to_list()
            else:
                record["failure"] = result.reason
        records.append(record)
    return records


def _snapshot_callback(
    model: VarcViT,
    tasks: Sequence[Task],
    aux: AuxTask,
    offsets: Sequence[int],
    every: int,
    sinks: Sequence[List[Dict[str, Any]]],
) -> Optional[Callable]:
    if not every:
        return None

    def callback(epoch: int, stats: Dict[str, float]) -> Dict[str, float]:
        if epoch % every == 0:
            for task, offset, sink in zip(tasks, offsets, sinks):
                sink.extend(snapshot_predictions(model, task, aux, offset, epoch))
        return {}

    return callback


def test_time_train(
    base: Checkpoint,
    task: Task,
    cfg: TrainConfig,
    aux_tasks: Optional[Sequence[AuxTask]] = None,
    device: str = "cpu",
) -> AdaptedModel:
    """
    Adapt a copy of the base model to ``task``.

    A fresh table of one embedding per auxiliary task replaces the offline
    task embeddings and Adam restarts from zero moments. ``cfg.epochs == 0``
    returns the untuned model (fresh embeddings only).

    Args:
        base: Offline checkpoint
        task: Task whose demo pairs drive the adaptation
        cfg: TTT configuration (``ttt_scope`` picks full or embeddings-only)
        aux_tasks: Auxiliary tasks (default: the 51 built from the fixed seed)
        device: Torch device

    Returns:
        AdaptedModel owning its own parameters
    """
    aux_tasks = list(aux_tasks) if aux_tasks is not None else build_aux_tasks()
    samples = aux_samples(task, aux_tasks)
    model = _prepare_model(base, len(aux_tasks), cfg, device)
    adapted = AdaptedModel(model, aux_tasks, task.task_id)
    if cfg.snapshot_every:
        adapted.snapshots.extend(snapshot_predictions(model, task, aux_tasks[0], 0, 0))

    callback = _snapshot_callback(model, [task], aux_tasks[0], [0], cfg.snapshot_every, [adapted.snapshots])
    params = _trainable_parameters(model, cfg.ttt_scope)
    adapted.history = fit(model, samples, cfg, parameters=params, on_epoch_end=callback, desc=f"TTT {task.task_id}")
    if adapted.history:
        logger.info(f"TTT {task.task_id}: {len(samples)} samples/epoch, final loss {adapted.history[-1]['loss']:.4f}")
    return adapted


def test_time_train_joint(
    base: Checkpoint,
    tasks: Sequence[Task],
    cfg: TrainConfig,
    aux_tasks: Optional[Sequence[AuxTask]] = None,
    device: str = "cpu",
) -> List[AdaptedModel]:
    """
    Adapt one shared model to all ``tasks`` at once.

    Task i owns the embedding block starting at ``i * len(aux_tasks)``; the
    returned AdaptedModels share the same underlying model.
    """
    aux_tasks = list(aux_tasks) if aux_tasks is not None else build_aux_tasks()
    block = len(aux_tasks)
    samples = []
    for i, task in enumerate(tasks):
        samples.extend(aux_samples(task, aux_tasks, i * block))
    model = _prepare_model(base, block * len(tasks), cfg, device)
    adapted = [AdaptedModel(model, aux_tasks, task.task_id, i * block) for i, task in enumerate(tasks)]

    callback = _snapshot_callback(
        model, tasks, aux_tasks[0], [a.embedding_offset for a in adapted], cfg.snapshot_every,
        [a.snapshots for a in adapted],
    )
    params = _trainable_parameters(model, cfg.ttt_scope)
    history = fit(model, samples, cfg, parameters=params, on_epoch_end=callback, desc="Joint TTT")
    for a in adapted:
        a.history = history
    logger.info(f"Joint TTT over {len(tasks)} tasks: {len(samples)} samples/epoch")
    return adapted
