"""
Test suite for VARC.
"""
