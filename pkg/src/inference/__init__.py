"""
Multi-view prediction, majority voting and model probes.
"""
