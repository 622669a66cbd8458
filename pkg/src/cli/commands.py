"""
Subcommand implementations. Each takes the parsed arguments and the run
configuration and returns the path of its main artifact.
"""
import argparse
import logging
import os
from typing import Dict, List, Optional

import numpy as np

from src.canvas.placement import ViewTransform, place_input, place_target
from src.cli.run_config import RunConfig, resolve_device
from src.data.json_loader import load_task_file
from src.data.synthetic import make_heldout_set, make_training_set, write_taskset
from src.data.task_loader import load_report, load_taskset, merge_rearc
from src.errors import ConfigError, TaskIndexOutOfRange
from src.inference.probes import layer_attention, pixel_attention, task_embedding_matrix
from src.model.checkpoint import checkpoint_from_model, load_checkpoint, model_from_checkpoint, save_checkpoint
from src.training import ttt
from src.training.offline import train_offline
from src.utils.artifacts import write_canvas, write_csv, write_heatmap_pgm, write_json
from src.utils.evaluation import evaluate_taskset, predict_taskset
from src.utils.metadata import run_metadata, taskset_hash

logger = logging.getLogger(__name__)


def _output_path(args: argparse.Namespace, config: RunConfig, default_name: str) -> str:
    return getattr(args, "output", None) or os.path.join(config.output_dir, default_name)


def _require(value: Optional[str], key: str) -> str:
    if not value:
        raise ConfigError(f"no path given; pass it on the command line or set {key}", key=key)
    return value


def load_training_data(path: str, config: RunConfig):
    """Training tasks with the configured RE-ARC merge and task cap applied."""
    taskset = load_taskset(path, split="train", solutions_path=config.data.solutions_path)
    merge = None
    if config.data.rearc_path and config.data.rearc_pairs_per_task:
        taskset, merge = merge_rearc(
            taskset,
            config.data.rearc_path,
            config.data.rearc_pairs_per_task,
            seed=config.seed,
            with_replacement=config.data.rearc_with_replacement,
        )
    if config.data.max_train_tasks and config.data.max_train_tasks < len(taskset):
        taskset = taskset.subset(taskset.task_ids[:config.data.max_train_tasks])
        logger.info(f"Training on the first {len(taskset)} tasks")
    return taskset, merge


def cmd_ingest(args: argparse.Namespace, config: RunConfig) -> str:
    if args.synthetic:
        train = make_training_set(seed=config.seed)
        heldout = make_heldout_set(seed=config.seed + 1)
        write_taskset(train, os.path.join(args.synthetic, "training"))
        write_taskset(heldout, os.path.join(args.synthetic, "evaluation"))
        logger.info(f"Wrote {len(train)} training and {len(heldout)} held-out synthetic tasks to {args.synthetic}")
        report = {"training": load_report(train), "evaluation": load_report(heldout)}
    else:
        path = _require(args.data or config.data.train_path, "data.train_path")
        taskset, merge = load_training_data(path, config)
        report = load_report(taskset, merge)
    return write_json(_output_path(args, config, "ingest_report.json"), report)


def cmd_train(args: argparse.Namespace, config: RunConfig) -> str:
    path = _require(args.data or config.data.train_path, "data.train_path")
    taskset, _ = load_training_data(path, config)
    output = _output_path(args, config, "model.varc")
    metrics_path = args.metrics or os.path.join(os.path.dirname(os.path.abspath(output)), "metrics.jsonl")
    resume = load_checkpoint(args.resume) if args.resume else None
    checkpoint = train_offline(
        taskset,
        config.train_config(),
        config.model,
        device=resolve_device(config.device),
        metrics_path=metrics_path,
        provenance=config.dump(),
        resume=resume,
    )
    return save_checkpoint(checkpoint, output)


def _write_snapshots(directory: str, task_id: str, snapshots: List[Dict]) -> List[str]:
    """One ARC-layout JSON per logged epoch holding the predicted test outputs."""
    by_epoch: Dict[int, List[Dict]] = {}
    for record in snapshots:
        by_epoch.setdefault(record["epoch"], []).append(record)
    paths = []
    for epoch, records in sorted(by_epoch.items()):
        test = [{"output": r["output"], "failure": r["failure"]} for r in sorted(records, key=lambda r: r["infer_index"])]
        paths.append(write_json(os.path.join(directory, f"{task_id}_epoch_{epoch:03d}.json"), {"test": test}))
    return paths


def cmd_ttt(args: argparse.Namespace, config: RunConfig) -> str:
    base = load_checkpoint(args.checkpoint)
    task = load_task_file(args.task, os.path.splitext(os.path.basename(args.task))[0])
    adapted = ttt.test_time_train(base, task, config.ttt_config(), device=resolve_device(config.device))
    metadata = run_metadata(
        config.dump(),
        config.seed,
        base.metadata.get("data_hash"),
        stage="ttt",
        task_id=task.task_id,
        aux_seed=config.inference.aux_seed,
        embedding_offset=adapted.embedding_offset,
        epoch=len(adapted.history),
        history=adapted.history,
    )
    output = _output_path(args, config, f"{task.task_id}.varc")
    if adapted.snapshots:
        _write_snapshots(os.path.join(os.path.dirname(os.path.abspath(output)), "ttt_snapshots"), task.task_id, adapted.snapshots)
    return save_checkpoint(checkpoint_from_model(adapted.model, metadata), output)


def _apply_eval_flags(args: argparse.Namespace, config: RunConfig) -> RunConfig:
    updates = {}
    for flag, field in (("k", "k"), ("views", "views_per_aux"), ("aux", "num_aux"), ("jobs", "jobs")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[field] = value
    if getattr(args, "joint_ttt", False):
        updates["joint_ttt"] = True
    if getattr(args, "single_view", False):
        updates["single_view"] = True
    if not updates:
        return config
    try:
        inference = config.inference.model_validate({**config.inference.model_dump(), **updates})
    except ValueError as e:
        raise ConfigError(f"invalid evaluation flags: {e}", key="inference") from e
    return config.model_copy(update={"inference": inference})


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> str:
    config = _apply_eval_flags(args, config)
    checkpoint = load_checkpoint(args.checkpoint)
    path = _require(args.data or config.data.eval_path, "data.eval_path")
    tasks = load_taskset(path, split="eval", solutions_path=config.data.solutions_path)
    report = evaluate_taskset(
        checkpoint,
        tasks,
        config.ttt_config(),
        config.inference,
        device=resolve_device(config.device),
        config_dump=config.dump(),
        seed=config.seed,
        candidates_dir=args.candidates_dir,
    )
    data = report.model_dump(mode="json")
    data["data_hash"] = taskset_hash(tasks)
    return write_json(_output_path(args, config, "eval_report.json"), data)


def cmd_predict(args: argparse.Namespace, config: RunConfig) -> str:
    config = _apply_eval_flags(args, config)
    checkpoint = load_checkpoint(args.checkpoint)
    path = _require(args.data or config.data.eval_path, "data.eval_path")
    tasks = load_taskset(path, split="test")
    submission = predict_taskset(
        checkpoint, tasks, config.ttt_config(), config.inference, device=resolve_device(config.device)
    )
    return write_json(_output_path(args, config, "submission.json"), submission)


def _parse_triple(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        values = []
    if len(values) != 3:
        raise ConfigError(f"--attention expects layer,row,col, got {text!r}", key="attention")
    return values


def _inspect_canvas(task, model_size: int, scale: int) -> np.ndarray:
    pair = task.infer[0]
    return place_input(pair.input, ViewTransform(scale=scale), model_size)


def cmd_inspect(args: argparse.Namespace, config: RunConfig) -> str:
    checkpoint = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(checkpoint, resolve_device(config.device))
    directory = args.output or os.path.join(config.output_dir, "inspect")
    needs_task = args.attention or args.attention_layer_average is not None or args.ttt_snapshots or args.canvas
    task = None
    if needs_task:
        task_path = _require(args.task, "--task")
        task = load_task_file(task_path, os.path.splitext(os.path.basename(task_path))[0])

    if not 0 <= args.task_index < model.config.num_task_embeddings:
        raise TaskIndexOutOfRange(f"--task-index {args.task_index} outside [0, {model.config.num_task_embeddings})")
    size = model.config.canvas_size
    written = []

    for spec in args.attention or []:
        layer, row, col = _parse_triple(spec)
        canvas = _inspect_canvas(task, size, args.scale)
        logit_map, prob_map = pixel_attention(model, canvas, args.task_index, layer, row, col)
        prefix = os.path.join(directory, f"attention_l{layer}_r{row}_c{col}")
        written.append(write_heatmap_pgm(prefix + "_logits.pgm", logit_map, model.config.patch_size))
        written.append(write_heatmap_pgm(prefix + "_softmax.pgm", prob_map, model.config.patch_size))

    if args.attention_layer_average is not None:
        canvas = _inspect_canvas(task, size, args.scale)
        average = layer_attention(model, canvas, args.task_index, args.attention_layer_average)
        path = os.path.join(directory, f"attention_l{args.attention_layer_average}_average.pgm")
        written.append(write_heatmap_pgm(path, average, model.config.patch_size))

    if args.task_embeddings:
        matrix = task_embedding_matrix(model)
        written.append(write_csv(os.path.join(directory, "task_embeddings.csv"), matrix))

    if args.canvas:
        pair = task.demo[0]
        view = ViewTransform(scale=args.scale)
        written.extend(write_canvas(os.path.join(directory, "canvas_input"), place_input(pair.input, view, size)).values())
        written.extend(write_canvas(os.path.join(directory, "canvas_target"), place_target(pair.output, view, size)).values())

    if args.ttt_snapshots:
        cfg = config.ttt_config()
        if not cfg.snapshot_every:
            cfg = cfg.model_copy(update={"snapshot_every": 1})
        adapted = ttt.test_time_train(checkpoint, task, cfg, device=resolve_device(config.device))
        written.extend(_write_snapshots(os.path.join(directory, "ttt_snapshots"), task.task_id, adapted.snapshots))

    if not written:
        raise ConfigError("nothing to inspect; pass --attention, --attention-layer-average, --task-embeddings, --canvas or --ttt-snapshots")
    index_path = write_json(os.path.join(directory, "index.json"), {"artifacts": written})
    return index_path
