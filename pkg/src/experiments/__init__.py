"""
Experiment commands behind the censorlab CLI and their report emission.
"""
