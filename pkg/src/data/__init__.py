"""
ARC task data: grids, tasks, task sets and RE-ARC expansion.
"""
