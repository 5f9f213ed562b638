"""Autonomous sub-goal discovery in a goal-graph cognitive loop."""

__version__ = "0.1.0"
