"""
Utility modules: scenario presets and provenance-stamped CSV output.
"""
