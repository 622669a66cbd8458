"""
Utility functions for VARC: evaluation, provenance metadata, artifact writers.
"""
