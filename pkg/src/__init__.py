"""
VARC - ARC puzzles as image-to-image translation on a fixed canvas.
"""
