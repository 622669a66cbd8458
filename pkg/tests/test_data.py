"""
Tests for grid parsing, task loading and RE-ARC merging.
"""
import json
import os
import tempfile
import unittest

from src.data.grid import ExamplePair, Grid, Task, TaskSet, parse_grid
from src.data.json_loader import load_task_file, parse_task
from src.data.synthetic import FAMILIES, make_heldout_set, make_training_set, write_taskset
from src.data.task_loader import load_report, load_taskset, merge_rearc
from src.errors import (
    ColorOutOfRange, DuplicateTaskId, EmptyGrid, EmptyTaskSet, GridTooLarge, MissingField, RaggedRows,
    TaskFileError,
)

TASK_JSON = {
    "train": [
        {"input": [[1, 2], [3, 4]], "output": [[2, 1], [4, 3]]},
        {"input": [[5]], "output": [[5]]},
    ],
    "test": [{"input": [[0, 7]]}],
}


def _write(directory, name, data):
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        json.dump(data, f)
    return path


class TestGrid(unittest.TestCase):
    def test_parse_valid_grid(self):
        """Test parsing a well-formed grid."""
        grid = parse_grid([[0, 1, 2], [3, 4, 5]])
        self.assertEqual(grid.shape, (2, 3))
        self.assertEqual(grid.to_list(), [[0, 1, 2], [3, 4, 5]])
        self.assertEqual(grid.cells, [0, 1, 2, 3, 4, 5])

    def test_parse_errors(self):
        """Test grids that fail to parse."""
        with self.assertRaises(EmptyGrid):
            parse_grid([])
        with self.assertRaises(EmptyGrid):
            parse_grid([[]])
        with self.assertRaises(RaggedRows):
            parse_grid([[1, 2], [3]])
        with self.assertRaises(ColorOutOfRange):
            parse_grid([[10]])
        with self.assertRaises(ColorOutOfRange):
            parse_grid([[-1]])
        with self.assertRaises(GridTooLarge):
            parse_grid([[0] * 31])

    def test_size_limit_can_be_lifted(self):
        """Test size limit can be lifted."""
        grid = parse_grid([[0] * 40], max_size=None)
        self.assertEqual(grid.shape, (1, 40))

    def test_equality_and_hash(self):
        """Test grid equality and hashing."""
        a = Grid([[1, 2], [3, 4]])
        b = Grid([[1, 2], [3, 4]])
        c = Grid([[1, 2, 3, 4]])
        self.assertEqual(a, b)
        self.assertEqual(hash(a), hash(b))
        self.assertNotEqual(a, c)

    def test_pixels_are_read_only(self):
        """Test pixels are read only."""
        grid = Grid([[1, 2]])
        with self.assertRaises(ValueError):
            grid.pixels[0, 0] = 5


class TestTaskParsing(unittest.TestCase):
    def test_parse_task(self):
        """Test parsing a task from ARC JSON."""
        task = parse_task("abc", TASK_JSON)
        self.assertEqual(task.task_id, "abc")
        self.assertEqual(len(task.demo), 2)
        self.assertEqual(len(task.infer), 1)
        self.assertIsNone(task.infer[0].output)

    def test_missing_fields(self):
        """Test task JSON with missing fields."""
        with self.assertRaises(MissingField):
            parse_task("x", {"train": TASK_JSON["train"]})
        with self.assertRaises(MissingField):
            parse_task("x", {"train": [], "test": TASK_JSON["test"]})
        with self.assertRaises(MissingField):
            parse_task("x", {"train": [{"input": [[1]]}], "test": TASK_JSON["test"]})

    def test_solutions_fill_test_outputs(self):
        """Test solutions fill test outputs."""
        task = parse_task("abc", TASK_JSON, solutions=[[[7, 0]]])
        self.assertEqual(task.infer[0].output, Grid([[7, 0]]))

    def test_output_ratio(self):
        """Test the demo output-to-input size ratio."""
        task = Task("t", (ExamplePair(Grid([[1, 2]]), Grid([[1, 2], [1, 2]])),), ())
        self.assertEqual(task.output_ratio(), (2.0, 1.0))

    def test_task_file_error_names_path(self):
        """Test task file error names path."""
        with tempfile.TemporaryDirectory() as tmp:
            path = _write(tmp, "bad.json", {"train": [{"input": [[1, 2], [3]], "output": [[1]]}], "test": []})
            with self.assertRaises(TaskFileError) as ctx:
                load_task_file(path, "bad")
            self.assertIn("bad.json", str(ctx.exception))
            self.assertIsInstance(ctx.exception.cause, RaggedRows)


class TestTaskSetLoading(unittest.TestCase):
    def test_directory_is_sorted_by_task_id(self):
        """Test directory is sorted by task id."""
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("zeta", "alpha", "mid"):
                _write(tmp, f"{name}.json", TASK_JSON)
            _write(tmp, "notes.txt", {})
            taskset = load_taskset(tmp)
        self.assertEqual(taskset.task_ids, ["alpha", "mid", "zeta"])
        self.assertEqual(taskset.split, "train")

    def test_empty_directory(self):
        """Test loading a directory with no task files."""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(EmptyTaskSet):
                load_taskset(tmp)

    def test_manifest_with_solutions(self):
        """Test manifest with solutions."""
        with tempfile.TemporaryDirectory() as tmp:
            challenges = _write(tmp, "challenges.json", {"b": TASK_JSON, "a": TASK_JSON})
            solutions = _write(tmp, "solutions.json", {"a": [[[1]]], "b": [[[2]]]})
            taskset = load_taskset(challenges, split="eval", solutions_path=solutions)
        self.assertEqual(taskset.task_ids, ["a", "b"])
        self.assertEqual(taskset.get("b").infer[0].output, Grid([[2]]))

    def test_duplicate_task_ids(self):
        """Test rejecting duplicate task ids."""
        task = parse_task("same", TASK_JSON)
        with self.assertRaises(DuplicateTaskId):
            TaskSet((task, task))

    def test_invalid_split(self):
        """Test rejecting an unknown split name."""
        with self.assertRaises(ValueError):
            TaskSet((), split="validation")


class TestRearcMerge(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.base = TaskSet((parse_task("a", TASK_JSON), parse_task("b", TASK_JSON)))
        pairs = [{"input": [[i % 10]], "output": [[(i + 1) % 10]]} for i in range(6)]
        _write(self.tmp.name, "a.json", pairs)
        _write(self.tmp.name, "unknown.json", pairs)

    def tearDown(self):
        self.tmp.cleanup()

    def test_appends_without_touching_base_pairs(self):
        """Test appends without touching base pairs."""
        merged, report = merge_rearc(self.base, self.tmp.name, pairs_per_task=4, seed=0)
        self.assertEqual(len(merged.get("a").demo), 2 + 4)
        self.assertEqual(merged.get("a").demo[:2], self.base.get("a").demo)
        self.assertEqual(merged.get("b").demo, self.base.get("b").demo)
        self.assertEqual(report.tasks_extended, 1)
        self.assertEqual(report.pairs_added, 4)
        self.assertEqual(report.skipped_task_ids, ["unknown"])
        self.assertEqual(report.total_pairs, 8)

    def test_without_replacement_caps_at_available_pairs(self):
        """Test sampling without replacement."""
        merged, report = merge_rearc(self.base, self.tmp.name, pairs_per_task=100, seed=0)
        self.assertEqual(report.pairs_added, 6)
        added = merged.get("a").demo[2:]
        self.assertEqual(len(set(added)), 6)

    def test_with_replacement_draws_exact_count(self):
        """Test sampling with replacement."""
        _, report = merge_rearc(self.base, self.tmp.name, pairs_per_task=20, seed=0, with_replacement=True)
        self.assertEqual(report.pairs_added, 20)

    def test_seeded_merge_is_reproducible(self):
        """Test seeded merge is reproducible."""
        first, _ = merge_rearc(self.base, self.tmp.name, pairs_per_task=3, seed=7)
        second, _ = merge_rearc(self.base, self.tmp.name, pairs_per_task=3, seed=7)
        self.assertEqual(first.get("a").demo, second.get("a").demo)

    def test_load_report(self):
        """Test loading an ingest report."""
        merged, merge = merge_rearc(self.base, self.tmp.name, pairs_per_task=2, seed=0)
        report = load_report(merged, merge)
        self.assertEqual(report["num_tasks"], 2)
        self.assertEqual(report["num_demo_pairs"], 6)
        self.assertEqual(report["num_infer_pairs"], 2)
        self.assertEqual(report["rearc"]["pairs_added"], 2)
        self.assertEqual(len(report["data_hash"]), 64)


class TestSynthetic(unittest.TestCase):
    def test_training_set_families(self):
        """Test training set families."""
        taskset = make_training_set(pairs_per_family=20, seed=0)
        self.assertEqual(taskset.task_ids, sorted(FAMILIES))
        mirror = taskset.get("mirror")
        for pair in mirror.demo:
            self.assertEqual(pair.output.to_list(), [row[::-1] for row in pair.input.to_list()])
            self.assertLessEqual(max(pair.input.shape), 5)

    def test_heldout_set_round_trips_through_files(self):
        """Test heldout set round trips through files."""
        heldout = make_heldout_set(num_tasks=5, seed=1)
        self.assertEqual(len(heldout), 5)
        with tempfile.TemporaryDirectory() as tmp:
            write_taskset(heldout, tmp)
            loaded = load_taskset(tmp, split="eval")
        self.assertEqual(loaded.task_ids, heldout.task_ids)
        for task in heldout:
            self.assertEqual(loaded.get(task.task_id), task)
            self.assertEqual(len(task.demo), 3)

    def test_heldout_swaps_are_shown_by_demos(self):
        """Test that held-out colour swaps appear in the demos."""
        for seed in range(5):
            for task in make_heldout_set(num_tasks=6, seed=seed, max_side=2):
                if not task.task_id.endswith("color_swap"):
                    continue
                shown = {v for pair in task.demo for row in pair.input.to_list() for v in row}
                changed = {
                    v
                    for pair in task.demo + task.infer
                    for row_in, row_out in zip(pair.input.to_list(), pair.output.to_list())
                    for a, b in zip(row_in, row_out) if a != b
                    for v in (a, b)
                }
                self.assertLessEqual(changed, shown, task.task_id)


if __name__ == "__main__":
    unittest.main()
