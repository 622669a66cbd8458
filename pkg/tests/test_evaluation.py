"""
Tests for task-set evaluation and submission prediction.
"""
import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from src.data.grid import ExamplePair, Grid, Task, TaskSet
from src.data.synthetic import make_heldout_set, make_task
from src.errors import MissingField
from src.inference.config import InferenceConfig
from src.inference.voting import majority_vote
from src.model.checkpoint import checkpoint_from_model
from src.model.vit import VarcViT
from src.training.config import TrainConfig
from src.training.ttt import AdaptedModel
from src.utils.evaluation import evaluate_taskset, k_levels, predict_taskset, score_task
from src.utils.metadata import run_metadata
from tests.helpers import identity_oracle, tiny_config


def fake_adaptation(calls=None, fail_on=()):
    """Stand-in for test_time_train returning an untouched tiny model."""
    def adapt(base, task, cfg, aux_tasks=None, device="cpu"):
        if calls is not None:
            calls.append((task.task_id, cfg.seed))
        if task.task_id in fail_on:
            raise RuntimeError("adaptation diverged")
        model = VarcViT(tiny_config(num_task_embeddings=len(aux_tasks)))
        return AdaptedModel(model, list(aux_tasks), task.task_id)
    return adapt


def mirror_task(task_id="mirror"):
    pair = ExamplePair(Grid([[1, 2]]), Grid([[2, 1]]))
    return Task(task_id, (pair, pair), (ExamplePair(Grid([[3, 4]]), Grid([[4, 3]])),))


class TestScoring(unittest.TestCase):
    def test_k_levels(self):
        """Test the reported pass@k levels."""
        self.assertEqual(k_levels(2), [1, 2])
        self.assertEqual(k_levels(7), [1, 2, 5, 7])
        self.assertEqual(k_levels(300), [1, 2, 5, 10, 20, 50, 100, 200, 300])
        self.assertEqual(k_levels(10, single_view=True), [1])

    def test_task_passes_only_when_every_input_passes(self):
        """Test task passes only when every input passes."""
        a, b = Grid([[1]]), Grid([[2]])
        task = Task("t", (ExamplePair(a, a),), (ExamplePair(a, a), ExamplePair(b, b)))
        tallies = [majority_vote([a, a, b]), majority_vote([a, a, b])]
        result = score_task(task, tallies, [1, 2])
        self.assertEqual([r.passed for r in result.inputs], [{1: True, 2: True}, {1: False, 2: True}])
        self.assertFalse(result.pass_at_1)
        self.assertTrue(result.pass_at_2)
        self.assertEqual(result.inputs[0].top_counts, [2, 1])


class TestEvaluateTaskset(unittest.TestCase):
    def setUp(self):
        self.checkpoint = checkpoint_from_model(VarcViT(tiny_config()), run_metadata({}, 0))
        identity = make_task("identity", "identity", np.random.default_rng(0), num_demo=2, num_infer=2, max_side=3)
        self.tasks = TaskSet((identity, mirror_task()), split="eval")
        self.ttt_config = TrainConfig.for_ttt(epochs=2, warmup_epochs=1, seed=7)
        self.inference = InferenceConfig(views_per_aux=2)

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_identity_oracle_report(self, _):
        """Test identity oracle report."""
        calls = []
        with patch("src.training.ttt.test_time_train", side_effect=fake_adaptation(calls)):
            report = evaluate_taskset(self.checkpoint, self.tasks, self.ttt_config, self.inference)
        self.assertEqual(calls, [("identity", 7), ("mirror", 8)])
        self.assertEqual(report.num_tasks, 2)
        self.assertEqual(report.pass_at_1, 50.0)
        self.assertEqual(report.pass_at_2, 50.0)
        self.assertEqual(report.per_input_accuracy, {1: 100.0 * 2 / 3, 2: 100.0 * 2 / 3})
        identity, mirror = report.tasks
        self.assertTrue(identity.pass_at_1)
        self.assertEqual([r.total_views for r in identity.inputs], [102, 102])
        self.assertEqual(identity.inputs[0].top_counts, [102])
        self.assertFalse(mirror.pass_at_1)
        self.assertIsNone(mirror.error)
        self.assertNotIn("runtime", report.deterministic_dump())

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_failed_task_is_recorded(self, _):
        """Test failed task is recorded."""
        with patch("src.training.ttt.test_time_train", side_effect=fake_adaptation(fail_on=("identity",))):
            report = evaluate_taskset(self.checkpoint, self.tasks, self.ttt_config, self.inference)
        identity, mirror = report.tasks
        self.assertIn("RuntimeError", identity.error)
        self.assertEqual(identity.passed, {1: False, 2: False})
        self.assertIsNone(mirror.error)
        self.assertEqual(report.pass_at_1, 0.0)

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_single_view(self, _):
        """Test single-view evaluation."""
        inference = InferenceConfig(single_view=True, k=5)
        with patch("src.training.ttt.test_time_train", side_effect=fake_adaptation()):
            report = evaluate_taskset(self.checkpoint, self.tasks, self.ttt_config, inference)
        self.assertEqual(list(report.pass_at_k_curve), [1])
        self.assertIsNone(report.pass_at_2)
        self.assertEqual(report.tasks[0].inputs[0].total_views, 1)

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_candidates_dump(self, _):
        """Test dumping top-k candidates per task."""
        with tempfile.TemporaryDirectory() as tmp:
            with patch("src.training.ttt.test_time_train", side_effect=fake_adaptation()):
                evaluate_taskset(self.checkpoint, self.tasks, self.ttt_config, self.inference, candidates_dir=tmp)
            with open(os.path.join(tmp, "identity.json")) as f:
                dumped = json.load(f)
        self.assertEqual(len(dumped), 2)
        self.assertEqual(dumped[0]["ranked"][0]["count"], 102)

    def test_requires_ground_truth(self):
        """Test requires ground truth."""
        task = Task("blind", (ExamplePair(Grid([[1]]), Grid([[1]])),), (ExamplePair(Grid([[1]])),))
        with self.assertRaises(MissingField):
            evaluate_taskset(self.checkpoint, TaskSet((task,), split="test"), self.ttt_config, self.inference)

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_predict_taskset(self, _):
        """Test submission attempts with a failing task."""
        with patch("src.training.ttt.test_time_train", side_effect=fake_adaptation(fail_on=("mirror",))):
            submission = predict_taskset(self.checkpoint, self.tasks, self.ttt_config, self.inference)
        identity = self.tasks.get("identity")
        self.assertEqual(len(submission["identity"]), 2)
        self.assertEqual(submission["identity"][0]["attempt_1"], identity.infer[0].input.to_list())
        self.assertEqual(submission["identity"][0]["attempt_2"], [[0]])
        self.assertEqual(submission["mirror"], [{"attempt_1": [[0]], "attempt_2": [[0]]}])

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_predict_taskset_joint_ttt(self, _):
        """Test submissions from one jointly adapted model."""
        def adapt_jointly(base, tasks, cfg, aux_tasks=None, device="cpu"):
            model = VarcViT(tiny_config(num_task_embeddings=len(aux_tasks)))
            return [AdaptedModel(model, list(aux_tasks), task.task_id) for task in tasks]

        inference = InferenceConfig(views_per_aux=2, joint_ttt=True)
        with patch("src.training.ttt.test_time_train_joint", side_effect=adapt_jointly) as joint, \
                patch("src.training.ttt.test_time_train") as single:
            submission = predict_taskset(self.checkpoint, self.tasks, self.ttt_config, inference)
        joint.assert_called_once()
        single.assert_not_called()
        identity = self.tasks.get("identity")
        self.assertEqual(submission["identity"][1]["attempt_1"], identity.infer[1].input.to_list())

    @patch("src.inference.predict.forward_probs", side_effect=identity_oracle)
    def test_predict_taskset_parallel_jobs(self, _):
        """Test that parallel jobs give the same submission."""
        submissions, calls = [], []
        for jobs in (1, 2):
            inference = InferenceConfig(views_per_aux=2, jobs=jobs)
            with patch("src.training.ttt.test_time_train", side_effect=fake_adaptation(calls)):
                submissions.append(predict_taskset(self.checkpoint, self.tasks, self.ttt_config, inference))
        self.assertEqual(submissions[0], submissions[1])
        self.assertEqual(list(submissions[1]), ["identity", "mirror"])
        self.assertEqual(sorted(calls[2:]), [("identity", 7), ("mirror", 8)])

    def test_repeated_runs_give_identical_reports(self):
        """Test repeated runs give identical reports."""
        tasks = make_heldout_set(num_tasks=2, seed=1, max_side=3)
        ttt_config = TrainConfig.for_ttt(epochs=2, warmup_epochs=1, seed=3)
        inference = InferenceConfig(views_per_aux=1, num_aux=3)
        dumps = []
        for _ in range(2):
            report = evaluate_taskset(self.checkpoint, tasks, ttt_config, inference, seed=3)
            dumps.append(json.dumps(report.deterministic_dump(), sort_keys=True))
        self.assertEqual(dumps[0], dumps[1])
        self.assertEqual(json.loads(dumps[0])["num_tasks"], 2)


if __name__ == "__main__":
    unittest.main()
