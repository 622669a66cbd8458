"""
Numerical core on top of torch: layer operations, optimiser helpers and
gradient checking.
"""
