"""
Canvas geometry: symmetry and colour augmentation, integer scaling, canvas
placement with background/border tokens, view sampling and decoding.
"""
