"""Time-aware road network and trajectory representation learning.

A self-contained numpy implementation of a traffic-context-enhanced
skip-gram embedder, a trajectory-pre-trained Transformer encoder, learnable
trigonometric temporal encodings, and three time-sensitive evaluation
tasks, all driven by a synthetic dynamic-city generator.
"""

__version__ = "0.1.0"

from . import autodiff

__all__ = ["autodiff"]
