"""
The shared optimisation loop: masked cross-entropy, Adam, warmup + cosine.
"""
import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from src.model.vit import VarcViT
from src.nn.ops import cross_entropy_masked
from src.nn.optim import LRSchedule, adam_step, build_optimizer, lr_at
from src.training.config import TrainConfig
from src.training.dataset import CanvasPairDataset, TrainingSample

logger = logging.getLogger(__name__)

EpochCallback = Callable[[int, Dict[str, float]], Optional[Dict[str, float]]]


def set_dropout(model: VarcViT, rate: float) -> None:
    for block in model.blocks:
        block.attn.attn_dropout = rate
        block.mlp.mlp_dropout = rate


def training_step(
    model: VarcViT,
    optimizer: torch.optim.Optimizer,
    batch: Dict[str, torch.Tensor],
    lr: Optional[float] = None,
) -> Optional[float]:
    """
    One gradient update on a batch of canvas pairs.

    The loss is the mean over samples of each sample's masked mean
    cross-entropy.

    Samples whose loss mask is empty are dropped with a warning.

    Returns:
        The batch loss before the update, or None when every sample was dropped
    """
    keep = batch["mask"].flatten(1).any(dim=1)
    if not keep.all():
        logger.warning(f"Skipping {int((~keep).sum())} samples with an empty loss mask")
        if not keep.any():
            return None
        batch = {key: value[keep] for key, value in batch.items()}
    device = model.head.weight.device
    model.train()
    optimizer.zero_grad(set_to_none=True)
    logits = model(batch["input"].to(device), batch["task_index"].to(device))
    loss = cross_entropy_masked(
        logits, batch["target"].to(device), batch["mask"].to(device), per_sample=True
    ).mean()
    loss.backward()
    adam_step(optimizer, lr)
    return float(loss.detach())


def fit(
    model: VarcViT,
    samples: Sequence[TrainingSample],
    cfg: TrainConfig,
    parameters: Optional[Iterable[torch.nn.Parameter]] = None,
    optimizer: Optional[torch.optim.Optimizer] = None,
    on_epoch_end: Optional[EpochCallback] = None,
    desc: str = "Training",
) -> List[Dict[str, float]]:
    """
    Train ``model`` on ``samples`` for ``cfg.epochs`` epochs.

    Every random draw (shuffling, views, dropout) comes from generators seeded
    by ``cfg.seed``.

    Args:
        model: Model to update in place
        samples: Demo-lineage training samples
        cfg: Stage configuration
        parameters: Parameters to optimise (default: all)
        optimizer: Existing optimizer to continue with (default: fresh Adam)
        on_epoch_end: Called with (epoch, stats); returned entries are merged
            into the epoch's history record
        desc: Progress bar label

    Returns:
        One history record per epoch
    """
    dataset = CanvasPairDataset(
        samples,
        canvas_size=model.config.canvas_size,
        max_scale=cfg.max_scale,
        scale_aug=cfg.scale_aug,
        translate_aug=cfg.translate_aug,
        seed=cfg.seed,
    )
    if cfg.epochs == 0 or len(dataset) == 0:
        if len(dataset) == 0:
            logger.warning("No trainable samples; skipping optimisation")
        return []

    loader = DataLoader(
        dataset,
        batch_size=cfg.batch_size,
        shuffle=True,
        num_workers=cfg.num_workers,
        generator=torch.Generator().manual_seed(cfg.seed),
    )
    schedule = LRSchedule(cfg.base_lr, cfg.warmup_epochs, cfg.epochs, len(loader))
    if optimizer is None:
        params = list(parameters) if parameters is not None else list(model.parameters())
        optimizer = build_optimizer(params, cfg.base_lr, cfg.betas, cfg.adam_eps)
    if cfg.dropout is not None:
        set_dropout(model, cfg.dropout)

    device = model.head.weight.device
    model.dropout_generator = torch.Generator(device=device).manual_seed(cfg.seed + 1)
    history = []
    step = 0
    try:
        for epoch in tqdm(range(cfg.epochs), desc=desc, leave=False):
            dataset.set_epoch(epoch)
            total, count = 0.0, 0
            for batch in loader:
                lr = lr_at(schedule, step)
                loss = training_step(model, optimizer, batch, lr)
                step += 1
                if loss is None:
                    continue
                batch_size = int(batch["mask"].flatten(1).any(dim=1).sum())
                total += loss * batch_size
                count += batch_size
            stats = {"epoch": epoch + 1, "loss": total / count if count else float("nan"), "lr": lr}
            if on_epoch_end is not None:
                stats.update(on_epoch_end(epoch + 1, stats) or {})
            logger.debug(f"{desc} epoch {epoch + 1}/{cfg.epochs}: loss={stats['loss']:.4f}")
            history.append(stats)
    finally:
        model.dropout_generator = None
        model.eval()
    return history
