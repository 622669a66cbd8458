"""
The VARC vision transformer and its checkpoint file format.
"""
