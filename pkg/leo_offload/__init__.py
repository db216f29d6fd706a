"""
LEO Offload Simulator

Privacy-aware computation offloading from a ground user to a moving LEO
constellation: a deterministic timeline simulator, a sequential decision
environment, PPO/DQN trainers, heuristic baselines and an exhaustive oracle.
"""

__version__ = "1.0.0"
__description__ = "Privacy-aware LEO task offloading simulator and learners"
