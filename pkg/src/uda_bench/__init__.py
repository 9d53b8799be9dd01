"""
uda-bench - unsupervised domain adaptation algorithms and their validators.

This package trains UDA algorithms on synthetic transfer tasks with its own
dense reverse-mode autodiff, scores every checkpoint with label-free
validators, and analyzes how well those validators track target accuracy.
"""

from .models.config import BenchConfig, TrialConfig
from .models.records import TrialRecord

__version__ = "0.1.0"
__all__ = ["BenchConfig", "TrialConfig", "TrialRecord"]
