"""
Offline multi-task training and per-task test-time training.
"""
