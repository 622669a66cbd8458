"""
Tests for dihedral/colour transforms, canvas placement and decoding.
"""
import itertools
import unittest

import numpy as np

from src.canvas.placement import (
    BD, BG, DecodeFailure, ViewTransform, decode_prediction, estimate_output_shape, max_feasible_scale, new_canvas,
    one_hot, place_input, place_target, sample_view,
)
from src.canvas.transforms import (
    AUGMENTATION_DIHEDRALS, ColorPerm, Dihedral, apply_color_perm, apply_dihedral, dihedral_array,
    downsample_majority, scale_grid,
)
from src.data.grid import Grid
from src.errors import NoFeasibleView, PlacementOverflow, ScaleOverflow


def random_grid(rng, max_side=10):
    rows, cols = rng.integers(1, max_side + 1, size=2)
    return Grid(rng.integers(0, 10, size=(rows, cols)))


class TestDihedral(unittest.TestCase):
    def test_named_elements_match_numpy(self):
        """Test named elements match numpy."""
        a = np.arange(6).reshape(2, 3)
        self.assertTrue(np.array_equal(dihedral_array(a, Dihedral.FLIP_H), np.fliplr(a)))
        self.assertTrue(np.array_equal(dihedral_array(a, Dihedral.FLIP_V), np.flipud(a)))
        self.assertTrue(np.array_equal(dihedral_array(a, Dihedral.ROT90), np.rot90(a, k=-1)))
        self.assertTrue(np.array_equal(dihedral_array(a, Dihedral.ROT180), np.rot90(a, k=2)))
        self.assertTrue(np.array_equal(dihedral_array(a, Dihedral.TRANSPOSE), a.T))
        self.assertTrue(np.array_equal(dihedral_array(a, Dihedral.ANTI_TRANSPOSE), np.rot90(a, k=2).T))

    def test_cayley_table_matches_array_composition(self):
        """Test cayley table matches array composition."""
        a = np.arange(12).reshape(3, 4)
        for x, y in itertools.product(Dihedral, repeat=2):
            composed = dihedral_array(dihedral_array(a, x), y)
            self.assertTrue(np.array_equal(composed, dihedral_array(a, x.then(y))), f"{x} then {y}")

    def test_group_laws(self):
        """Test the dihedral group laws."""
        for x in Dihedral:
            self.assertEqual(x.then(x.inverse()), Dihedral.IDENTITY)
            self.assertEqual(x.inverse().then(x), Dihedral.IDENTITY)
            self.assertEqual(x.then(Dihedral.IDENTITY), x)
        for x, y, z in itertools.product(Dihedral, repeat=3):
            self.assertEqual(x.then(y).then(z), x.then(y.then(z)))

    def test_augmentation_subset(self):
        """Test augmentation subset."""
        self.assertEqual(len(AUGMENTATION_DIHEDRALS), 6)
        self.assertEqual(AUGMENTATION_DIHEDRALS[0], Dihedral.IDENTITY)

    def test_transform_shape(self):
        """Test the output shape of each dihedral element."""
        self.assertEqual(Dihedral.ROT90.transform_shape((2, 5)), (5, 2))
        self.assertEqual(Dihedral.FLIP_V.transform_shape((2, 5)), (2, 5))
        grid = Grid(np.zeros((2, 5), dtype=int))
        for d in Dihedral:
            self.assertEqual(apply_dihedral(grid, d).shape, d.transform_shape(grid.shape))


class TestColorPerm(unittest.TestCase):
    def test_bijection_required(self):
        """Test bijection required."""
        with self.assertRaises(ValueError):
            ColorPerm((0,) * 10)

    def test_inverse_and_commutation_randomised(self):
        """Test inverse and commutation randomised."""
        rng = np.random.default_rng(0)
        for _ in range(10000):
            grid = random_grid(rng, max_side=4)
            perm = ColorPerm.random(rng)
            d = AUGMENTATION_DIHEDRALS[int(rng.integers(6))]
            self.assertEqual(apply_color_perm(apply_color_perm(grid, perm), perm.inverse()), grid)
            self.assertEqual(
                apply_color_perm(apply_dihedral(grid, d), perm),
                apply_dihedral(apply_color_perm(grid, perm), d),
            )
            self.assertEqual(apply_dihedral(apply_dihedral(grid, d), d.inverse()), grid)

    def test_composition(self):
        """Test composing colour permutations."""
        a = ColorPerm.from_swaps([(1, 2)])
        b = ColorPerm.from_swaps([(2, 3)])
        grid = Grid([[1, 2, 3]])
        self.assertEqual(apply_color_perm(grid, a.then(b)), apply_color_perm(apply_color_perm(grid, a), b))
        self.assertTrue(a.then(a).is_identity)


class TestScaling(unittest.TestCase):
    def test_scale_and_downsample(self):
        """Test scale and downsample."""
        grid = Grid([[1, 2], [3, 4]])
        scaled = scale_grid(grid, 3)
        self.assertEqual(scaled.shape, (6, 6))
        self.assertEqual(scaled.to_list()[0], [1, 1, 1, 2, 2, 2])
        self.assertEqual(downsample_majority(scaled, 3), grid)

    def test_scale_overflow(self):
        """Test a scale that does not fit the canvas."""
        with self.assertRaises(ScaleOverflow):
            scale_grid(Grid([[1] * 10]), 4, limit=30)


class TestPlacement(unittest.TestCase):
    def test_target_border(self):
        """Test the BD border of a placed target."""
        view = ViewTransform(scale=2, offset=(1, 3))
        canvas = place_target(Grid([[5, 6]]), view, size=16)
        self.assertEqual(canvas[1, 3:7].tolist(), [5, 5, 6, 6])
        self.assertEqual(canvas[3, 3:8].tolist(), [BD] * 5)
        self.assertEqual(canvas[1:4, 7].tolist(), [BD] * 3)
        self.assertEqual(canvas[0, 0], BG)
        self.assertEqual(int((canvas == BD).sum()), 5 + 2)

    def test_input_has_no_border(self):
        """Test input has no border."""
        canvas = place_input(Grid([[1, 2], [3, 4]]), ViewTransform(offset=(2, 2)), size=8)
        self.assertFalse((canvas == BD).any())
        self.assertEqual(int((canvas != BG).sum()), 4)

    def test_overflow_errors(self):
        """Test placements that overflow the canvas."""
        grid = Grid(np.zeros((5, 5), dtype=int))
        with self.assertRaises(ScaleOverflow):
            place_input(grid, ViewTransform(scale=2), size=8)
        with self.assertRaises(PlacementOverflow):
            place_input(grid, ViewTransform(offset=(4, 0)), size=8)
        with self.assertRaises(ScaleOverflow):
            place_target(Grid(np.zeros((8, 8), dtype=int)), ViewTransform(), size=8)

    def test_new_canvas_is_background(self):
        """Test new canvas is background."""
        canvas = new_canvas(4)
        self.assertTrue((canvas == BG).all())

    def test_sample_view_keeps_everything_visible(self):
        """Test sample view keeps everything visible."""
        rng = np.random.default_rng(1)
        for _ in range(500):
            inp, out = random_grid(rng), random_grid(rng)
            d = AUGMENTATION_DIHEDRALS[int(rng.integers(6))]
            view = sample_view(rng, inp.shape, out.shape, size=32, dihedral=d)
            self.assertGreaterEqual(view.scale, 1)
            place_input(inp, view, 32)
            place_target(out, view, 32)

    def test_sample_view_is_seeded(self):
        """Test sample view is seeded."""
        views = [sample_view(np.random.default_rng(3), (4, 5), (6, 2), size=64) for _ in range(2)]
        self.assertEqual(views[0], views[1])

    def test_sample_view_without_augmentation(self):
        """Test sample view without augmentation."""
        view = sample_view(np.random.default_rng(0), (3, 3), (3, 3), scale_aug=False, translate_aug=False)
        self.assertEqual((view.scale, view.offset), (1, (0, 0)))

    def test_no_feasible_view(self):
        """Test inputs too large for any view."""
        with self.assertRaises(NoFeasibleView):
            sample_view(np.random.default_rng(0), (9, 9), None, size=8)
        self.assertEqual(max_feasible_scale((8, 8), (8, 8), size=8), 0)

    def test_estimate_output_shape(self):
        """Test estimate output shape."""
        self.assertEqual(estimate_output_shape((3, 4), (2.0, 0.5)), (6, 2))
        self.assertEqual(estimate_output_shape((1, 1), (0.1, 0.1)), (1, 1))


class TestDecode(unittest.TestCase):
    def test_round_trip_randomised(self):
        """Test round trip randomised."""
        rng = np.random.default_rng(2)
        for _ in range(1000):
            grid = random_grid(rng)
            d = AUGMENTATION_DIHEDRALS[int(rng.integers(6))]
            view = sample_view(
                rng, grid.shape, grid.shape, size=64, max_scale=3,
                dihedral=d, color=ColorPerm.random(rng),
            )
            decoded = decode_prediction(one_hot(place_target(grid, view)), view)
            self.assertEqual(decoded, grid)

    def test_missing_border(self):
        """Test decoding a canvas without a border."""
        canvas = place_input(Grid([[1]]), ViewTransform(), size=8)
        result = decode_prediction(one_hot(canvas), ViewTransform())
        self.assertIsInstance(result, DecodeFailure)
        self.assertEqual(result.reason, DecodeFailure.NO_BORDER)

    def test_misaligned_border(self):
        """Test decoding a canvas with a misaligned border."""
        canvas = place_target(Grid([[1, 2, 3]]), ViewTransform(), size=8)
        result = decode_prediction(one_hot(canvas), ViewTransform(scale=2))
        self.assertEqual(result.reason, DecodeFailure.MISALIGNED)

    def test_degenerate_border(self):
        """Test decoding a border with no content."""
        canvas = place_target(Grid([[1]]), ViewTransform(), size=8)
        result = decode_prediction(one_hot(canvas), ViewTransform(offset=(3, 3)))
        self.assertEqual(result.reason, DecodeFailure.DEGENERATE)

    def test_block_average_recovers_majority(self):
        """Test block average recovers majority."""
        view = ViewTransform(scale=2)
        probs = one_hot(place_target(Grid([[4]]), view, size=8))
        probs[0, 0] = np.eye(12)[7]
        self.assertEqual(decode_prediction(probs, view), Grid([[4]]))


if __name__ == "__main__":
    unittest.main()
