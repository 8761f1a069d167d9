"""Desk-scale human-in-the-loop semantic SLAM: factor-graph back-end over
poses, planes and rooms, a scenario simulator, evaluation metrics, and a
live intervention service with a browser UI."""

__version__ = "0.1.0"

from .geometry import Pose

__all__ = ["Pose", "__version__"]
