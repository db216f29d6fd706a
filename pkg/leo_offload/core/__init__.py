"""
Core modules: settings, errors and the evaluation job queue.
"""
