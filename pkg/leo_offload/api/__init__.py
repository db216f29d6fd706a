"""
Command layer behind the app.py entry point.
"""
