"""
Simulation, metrics, environment and learning services.
"""
