"""
Exact-match majority voting over candidate grids and pass@k scoring.
"""
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from src.data.grid import Grid


@dataclass(frozen=True)
class VoteTally:
    """
    Candidate grids ranked by vote count.

    Ties are ordered by the first view that produced the grid. Counts plus
    failures always add up to ``total_views``.
    """
    ranked: Tuple[Tuple[Grid, int], ...] = ()
    total_views: int = 0
    failures: int = 0

    @property
    def winner(self) -> Optional[Grid]:
        return self.ranked[0][0] if self.ranked else None

    def top(self, k: int) -> List[Grid]:
        return [grid for grid, _ in self.ranked[:k]]

    def to_json(self, limit: Optional[int] = None) -> dict:
        ranked = self.ranked if limit is None else self.ranked[:limit]
        return {
            "ranked": [{"grid": grid.to_list(), "count": count} for grid, count in ranked],
            "total_views": self.total_views,
            "failures": self.failures,
        }


def majority_vote(candidates: Sequence[Grid], failures: int = 0) -> VoteTally:
    """
    Group identical grids and rank the groups by size.

    Args:
        candidates: Decoded grids in view order
        failures: Views that produced no grid

    Returns:
        VoteTally over len(candidates) + failures views
    """
    # Counter keeps first-insertion order and sorted() is stable
    counts = Counter(candidates)
    ranked = tuple(sorted(counts.items(), key=lambda item: -item[1]))
    return VoteTally(ranked=ranked, total_views=len(candidates) + failures, failures=failures)


def pass_at_k(tally: VoteTally, truth: Grid, k: int) -> bool:
    """True iff ``truth`` equals one of the ``k`` most voted grids."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return any(grid == truth for grid in tally.top(k))
