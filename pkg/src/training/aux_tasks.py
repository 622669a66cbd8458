"""
Auxiliary tasks for test-time training: each demo pair is re-expressed under
a dihedral element and a colour permutation, and every such combination gets
its own task embedding.
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from src.canvas.transforms import ColorPerm, Dihedral

AUX_DIHEDRALS = (Dihedral.FLIP_H, Dihedral.FLIP_V, Dihedral.ROT90, Dihedral.ROT180, Dihedral.ROT270)
NUM_COLOR_PERMS = 10
AUX_SEED = 0


@dataclass(frozen=True)
class AuxTask:
    aux_index: int
    dihedral: Dihedral
    color: ColorPerm


def color_permutations(seed: int = AUX_SEED, count: int = NUM_COLOR_PERMS) -> List[ColorPerm]:
    """``count`` distinct permutations, the identity first."""
    rng = np.random.default_rng(seed)
    perms = [ColorPerm.identity()]
    while len(perms) < count:
        perm = ColorPerm.random(rng)
        if perm not in perms:
            perms.append(perm)
    return perms


def build_aux_tasks(seed: int = AUX_SEED, num_color_perms: int = NUM_COLOR_PERMS) -> List[AuxTask]:
    """
    The original task plus every (dihedral, colour permutation) combination.

    Args:
        seed: Seed for the predefined colour permutations
        num_color_perms: Number of permutations (identity included)

    Returns:
        1 + 5 * num_color_perms AuxTasks; index 0 is (identity, identity)
    """
    aux = [AuxTask(0, Dihedral.IDENTITY, ColorPerm.identity())]
    for dihedral in AUX_DIHEDRALS:
        for perm in color_permutations(seed, num_color_perms):
            aux.append(AuxTask(len(aux), dihedral, perm))
    return aux
