"""
Tests for the artifact writers.
"""
import json
import os
import tempfile
import unittest

import numpy as np

from src.canvas.placement import BD, BG
from src.utils.artifacts import canvas_text, heatmap_image, pgm_bytes, write_canvas, write_csv, write_json


class TestArtifacts(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def test_csv_matrix_is_parseable(self):
        """Test that a CSV matrix reads back with its header line."""
        matrix = np.array([[1.0, -0.5, 2.25], [0.125, 3.0, 1e-9]])
        path = write_csv(os.path.join(self.root, "sim.csv"), matrix, header="a,b,c")
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "a,b,c")
        self.assertEqual(len(lines), 3)
        loaded = np.loadtxt(path, delimiter=",", skiprows=1)
        self.assertTrue(np.allclose(loaded, matrix))

    def test_csv_without_header(self):
        """Test that a vector is written as a single row when no header is given."""
        path = write_csv(os.path.join(self.root, "row.csv"), np.array([1, 2, 3]))
        with open(path) as f:
            self.assertEqual(f.read(), "1,2,3\n")

    def test_json_is_sorted_and_leaves_no_temp_files(self):
        """Test that JSON reports are key-sorted and written atomically."""
        path = write_json(os.path.join(self.root, "nested", "report.json"), {"b": 1, "a": 2})
        with open(path) as f:
            text = f.read()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {"a": 2, "b": 1})
        self.assertEqual(os.listdir(os.path.dirname(path)), ["report.json"])

    def test_pgm_header(self):
        """Test the binary PGM header and payload size."""
        data = pgm_bytes(np.zeros((2, 3), dtype=np.uint8))
        self.assertTrue(data.startswith(b"P5\n3 2\n255\n"))
        self.assertEqual(len(data), len(b"P5\n3 2\n255\n") + 6)

    def test_heatmap_is_normalised_and_upscaled(self):
        """Test min-max normalisation and upscaling of heatmaps."""
        image = heatmap_image(np.array([[0.0, 1.0], [0.5, 1.0]]), upscale=2)
        self.assertEqual(image.shape, (4, 4))
        self.assertEqual(image.min(), 0)
        self.assertEqual(image.max(), 255)
        self.assertTrue(np.all(heatmap_image(np.ones((2, 2))) == 0))

    def test_canvas_dump(self):
        """Test the text and PGM dumps of a canvas."""
        canvas = np.array([[1, BD], [BG, BG]])
        self.assertEqual(canvas_text(canvas), "1#\n..\n")
        paths = write_canvas(os.path.join(self.root, "canvas"), canvas, upscale=2)
        with open(paths["pgm"], "rb") as f:
            self.assertTrue(f.read().startswith(b"P5\n4 4\n255\n"))
        with self.assertRaises(ValueError):
            write_canvas(os.path.join(self.root, "bad"), np.array([[12]]))


if __name__ == "__main__":
    unittest.main()
