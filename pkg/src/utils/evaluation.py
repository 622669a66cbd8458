"""
Task-set evaluation: test-time training, multi-view voting and pass@k
reports.
"""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from pydantic import BaseModel, Field
from tqdm import tqdm

from src.data.grid import Task, TaskSet
from src.errors import AllViewsFailed, MissingField
from src.inference.config import InferenceConfig
from src.inference.predict import multi_view_infer
from src.inference.voting import VoteTally, pass_at_k
from src.model.checkpoint import Checkpoint
from src.training import ttt
from src.training.aux_tasks import AuxTask, build_aux_tasks
from src.training.config import TrainConfig
from src.utils.artifacts import write_json

logger = logging.getLogger(__name__)

T = TypeVar("T")

PASS_AT_K_LEVELS = (1, 2, 5, 10, 20, 50, 100, 200, 300)


class InputResult(BaseModel):
    infer_index: int
    passed: Dict[int, bool] = Field(default_factory=dict, description="pass@k per k")
    top_counts: List[int] = Field(default_factory=list)
    total_views: int = 0
    failures: int = 0


class TaskResult(BaseModel):
    task_id: str
    pass_at_1: bool = False
    pass_at_2: Optional[bool] = None
    passed: Dict[int, bool] = Field(default_factory=dict)
    inputs: List[InputResult] = Field(default_factory=list)
    error: Optional[str] = None


class EvalReport(BaseModel):
    config: Dict[str, Any]
    seed: int
    k: int
    single_view: bool
    joint_ttt: bool
    num_tasks: int
    pass_at_1: float
    pass_at_2: Optional[float] = None
    pass_at_k_curve: Dict[int, float] = Field(default_factory=dict)
    per_input_accuracy: Dict[int, float] = Field(default_factory=dict)
    tasks: List[TaskResult] = Field(default_factory=list)
    runtime: Dict[str, Any] = Field(default_factory=dict, description="Wall-clock stats, not reproducible")

    def deterministic_dump(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"runtime"})


def k_levels(k: int, single_view: bool = False) -> List[int]:
    """The k values reported for a run scored at ``k``."""
    if single_view:
        return [1]
    levels = [level for level in PASS_AT_K_LEVELS if level <= k]
    if k not in levels:
        levels.append(k)
    return levels


def infer_task(
    adapted: "ttt.AdaptedModel",
    task: Task,
    inference: InferenceConfig,
) -> List[VoteTally]:
    """One tally per infer input of ``task``; inputs whose views all fail get their empty tally."""
    aux_tasks = adapted.aux_tasks[:1] if inference.single_view else adapted.aux_tasks
    views_per_aux = 1 if inference.single_view else inference.views_per_aux
    ratio = task.output_ratio()
    tallies = []
    for j, pair in enumerate(task.infer):
        try:
            tally = multi_view_infer(
                adapted.model,
                pair.input,
                aux_tasks,
                views_per_aux=views_per_aux,
                seed=inference.view_seed + j,
                embedding_offset=adapted.embedding_offset,
                output_ratio=ratio,
                max_scale=inference.max_scale,
                batch_size=inference.batch_size,
            )
        except AllViewsFailed as e:
            logger.warning(f"{task.task_id} input {j}: all {e.tally.total_views} views failed to decode")
            tally = e.tally
        tallies.append(tally)
    return tallies


def score_task(task: Task, tallies: Sequence[VoteTally], levels: Sequence[int]) -> TaskResult:
    """A task passes at k only when every infer input passes at k."""
    inputs = []
    for j, (pair, tally) in enumerate(zip(task.infer, tallies)):
        inputs.append(InputResult(
            infer_index=j,
            passed={k: pass_at_k(tally, pair.output, k) for k in levels},
            top_counts=[count for _, count in tally.ranked[:max(levels)]],
            total_views=tally.total_views,
            failures=tally.failures,
        ))
    passed = {k: all(r.passed[k] for r in inputs) for k in levels}
    return TaskResult(
        task_id=task.task_id,
        pass_at_1=passed[1],
        pass_at_2=passed.get(2),
        passed=passed,
        inputs=inputs,
    )


def _failed_result(task: Task, levels: Sequence[int], error: Exception) -> TaskResult:
    return TaskResult(
        task_id=task.task_id,
        pass_at_2=False if 2 in levels else None,
        passed={k: False for k in levels},
        error=f"{type(error).__name__}: {error}",
    )


def _require_outputs(tasks: TaskSet) -> None:
    for task in tasks:
        for j, pair in enumerate(task.infer):
            if pair.output is None:
                raise MissingField(f"task {task.task_id} infer pair {j} has no ground-truth output")


def _write_candidates(directory: str, task_id: str, tallies: Sequence[VoteTally], k: int) -> None:
    write_json(os.path.join(directory, f"{task_id}.json"), [tally.to_json(limit=k) for tally in tallies])


def _sweep(
    checkpoint: Checkpoint,
    tasks: TaskSet,
    ttt_config: TrainConfig,
    inference: InferenceConfig,
    device: str,
    handle: Callable[[Task, "ttt.AdaptedModel"], T],
    on_error: Callable[[Task, Exception], T],
    desc: str,
    timings: Optional[Dict[str, float]] = None,
) -> List[T]:
    """
    Adapt to every task and apply ``handle`` to each adapted model.

    Task i is adapted with seed ``ttt_config.seed + i``, on ``inference.jobs``
    threads, unless ``inference.joint_ttt`` shares one adaptation across the
    set. A failing task yields ``on_error(task, error)``.
    """
    aux_tasks: List[AuxTask] = build_aux_tasks(inference.aux_seed)[:inference.num_aux]

    def run(i: int, task: Task, adapted: Optional["ttt.AdaptedModel"] = None) -> T:
        task_start = time.time()
        try:
            if adapted is None:
                cfg = ttt_config.model_copy(update={"seed": ttt_config.seed + i})
                adapted = ttt.test_time_train(checkpoint, task, cfg, aux_tasks, device)
            result = handle(task, adapted)
        except Exception as e:
            logger.error(f"{desc} {task.task_id} failed: {e}", exc_info=True)
            result = on_error(task, e)
        if timings is not None:
            timings[task.task_id] = time.time() - task_start
        return result

    if inference.joint_ttt:
        try:
            adapted_models = ttt.test_time_train_joint(checkpoint, list(tasks), ttt_config, aux_tasks, device)
        except Exception as e:
            logger.error(f"Joint TTT failed: {e}", exc_info=True)
            return [on_error(task, e) for task in tasks]
        return [
            run(i, task, adapted)
            for i, (task, adapted) in enumerate(tqdm(list(zip(tasks, adapted_models)), desc=desc))
        ]
    with ThreadPoolExecutor(max_workers=inference.jobs) as pool:
        futures = [pool.submit(run, i, task) for i, task in enumerate(tasks)]
        return [future.result() for future in tqdm(futures, desc=desc)]


def evaluate_taskset(
    checkpoint: Checkpoint,
    tasks: TaskSet,
    ttt_config: TrainConfig,
    inference: InferenceConfig,
    device: str = "cpu",
    config_dump: Optional[Dict[str, Any]] = None,
    seed: int = 0,
    candidates_dir: Optional[str] = None,
) -> EvalReport:
    """
    Adapt to and score every task of ``tasks``.

    Task i is adapted with seed ``ttt_config.seed + i``, independently unless
    ``inference.joint_ttt``. Per-task failures are recorded in the report and
    never stop the sweep.

    Args:
        checkpoint: Offline checkpoint
        tasks: Tasks with ground-truth infer outputs
        ttt_config: Test-time training configuration
        inference: Voting and scoring configuration
        device: Torch device
        config_dump: Run configuration embedded in the report
        seed: Run seed embedded in the report
        candidates_dir: Optional directory for per-task top-k candidate dumps

    Returns:
        EvalReport with per-task results and aggregate pass@k
    """
    _require_outputs(tasks)
    levels = k_levels(inference.k, inference.single_view)
    started = time.time()
    runtime: Dict[str, Any] = {"per_task_seconds": {}}

    def handle(task: Task, adapted: "ttt.AdaptedModel") -> TaskResult:
        tallies = infer_task(adapted, task, inference)
        if candidates_dir:
            _write_candidates(candidates_dir, task.task_id, tallies, max(levels))
        return score_task(task, tallies, levels)

    results = _sweep(
        checkpoint, tasks, ttt_config, inference, device, handle,
        lambda task, error: _failed_result(task, levels, error),
        "Evaluating", runtime["per_task_seconds"],
    )

    num_tasks = len(results)
    curve = {k: 100.0 * sum(r.passed[k] for r in results) / num_tasks for k in levels}
    all_inputs = [item for r in results for item in r.inputs]
    num_inputs = sum(len(task.infer) for task in tasks)
    per_input = {k: 100.0 * sum(item.passed[k] for item in all_inputs) / num_inputs for k in levels}
    runtime["total_seconds"] = time.time() - started

    report = EvalReport(
        config=config_dump or {"ttt": ttt_config.model_dump(), "inference": inference.model_dump()},
        seed=seed,
        k=inference.k,
        single_view=inference.single_view,
        joint_ttt=inference.joint_ttt,
        num_tasks=num_tasks,
        pass_at_1=curve[1],
        pass_at_2=curve.get(2),
        pass_at_k_curve=curve,
        per_input_accuracy=per_input,
        tasks=results,
        runtime=runtime,
    )
    logger.info(
        f"Evaluated {num_tasks} tasks: pass@1={report.pass_at_1:.1f}%"
        + (f" pass@2={report.pass_at_2:.1f}%" if report.pass_at_2 is not None else "")
    )
    return report


def predict_taskset(
    checkpoint: Checkpoint,
    tasks: TaskSet,
    ttt_config: TrainConfig,
    inference: InferenceConfig,
    device: str = "cpu",
) -> Dict[str, List[Dict[str, Any]]]:
    """
    Top-2 attempts per infer input in ARC submission layout.

    Tasks are adapted as in ``evaluate_taskset``. Inputs without a prediction
    get empty attempts (``[[0]]``).
    """
    fallback = [[0]]

    def attempts(tallies: Sequence[VoteTally]) -> List[Dict[str, Any]]:
        rows = []
        for tally in tallies:
            top = [grid.to_list() for grid in tally.top(2)]
            top += [fallback] * (2 - len(top))
            rows.append({"attempt_1": top[0], "attempt_2": top[1]})
        return rows

    results = _sweep(
        checkpoint, tasks, ttt_config, inference, device,
        lambda task, adapted: attempts(infer_task(adapted, task, inference)),
        lambda task, error: attempts([VoteTally() for _ in task.infer]),
        "Predicting",
    )
    return {task.task_id: rows for task, rows in zip(tasks, results)}
