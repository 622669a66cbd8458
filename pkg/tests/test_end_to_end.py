"""
Desk-scale end-to-end runs on the synthetic micro-tasks. These take minutes
on a CPU and only run with VARC_SLOW_TESTS=1.
"""
import unittest

import numpy as np

from src.data.grid import TaskSet
from src.data.synthetic import make_heldout_set, make_task, make_training_set
from src.inference.config import InferenceConfig
from src.model.checkpoint import model_from_checkpoint
from src.model.vit import VitConfig
from src.training.config import TrainConfig
from src.training.offline import train_offline, validate
from src.utils.evaluation import evaluate_taskset
from tests.helpers import SLOW_TESTS


def desk_config(**overrides) -> VitConfig:
    values = dict(
        hidden_dim=64,
        depth=4,
        heads=4,
        mlp_hidden=128,
        mlp_dropout=0.0,
        attn_dropout=0.0,
        patch_size=2,
        canvas_size=16,
        pixel_embed_dim=8,
        num_task_embeddings=4,
    )
    values.update(overrides)
    return VitConfig(**values)


@unittest.skipUnless(SLOW_TESTS, "set VARC_SLOW_TESTS=1 to run")
class TestSyntheticEndToEnd(unittest.TestCase):
    def test_train_adapt_and_vote(self):
        """Test offline training, TTT and voting on held-out tasks."""
        train = make_training_set(pairs_per_family=200, seed=0)
        cfg = TrainConfig(epochs=200, warmup_epochs=10, batch_size=32, base_lr=1e-3, validate_every=50)
        checkpoint = train_offline(train, cfg, desk_config())
        self.assertEqual(checkpoint.metadata["history"][-1]["val_exact_match"], 1.0)

        heldout = make_heldout_set(num_tasks=5, seed=1)
        inference = InferenceConfig(views_per_aux=10, k=2)
        before = evaluate_taskset(checkpoint, heldout, TrainConfig.for_ttt(epochs=0), inference)
        after = evaluate_taskset(
            checkpoint, heldout, TrainConfig.for_ttt(epochs=40, warmup_epochs=4, base_lr=1e-3), inference
        )
        self.assertEqual(after.tasks[0].inputs[0].total_views, 510)
        self.assertEqual(after.pass_at_1, 100.0)
        self.assertLess(before.per_input_accuracy[1], after.per_input_accuracy[1])


@unittest.skipUnless(SLOW_TESTS, "set VARC_SLOW_TESTS=1 to run")
class TestPositionalAblation(unittest.TestCase):
    def test_rope2d_beats_no_positions_on_mirror(self):
        """Test that 2D RoPE beats no positions on the mirror task."""
        rng = np.random.default_rng(0)
        task = make_task("mirror", "mirror", rng, num_demo=300, num_infer=50)
        taskset = TaskSet((task,), split="train")
        cfg = TrainConfig(epochs=60, warmup_epochs=5, batch_size=32, base_lr=1e-3, validate_every=0)
        accuracy = {}
        for mode in ("rope2d", "none"):
            checkpoint = train_offline(taskset, cfg, desk_config(positional_mode=mode))
            accuracy[mode] = validate(model_from_checkpoint(checkpoint), taskset)
        self.assertGreater(accuracy["rope2d"], accuracy["none"])


if __name__ == "__main__":
    unittest.main()
