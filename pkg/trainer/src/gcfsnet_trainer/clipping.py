"""Percentile-based adaptive gradient clipping.

The clip threshold is the p-th percentile (linear interpolation) of every
gradient norm observed so far, including the current one; gradients are
rescaled so their global norm never exceeds it.
"""

from __future__ import annotations

import numpy as np
import torch


def autoclip_threshold(history: list[float], percentile: float = 10.0) -> float:
    if not history:
        raise ValueError("gradient-norm history is empty")
    return float(np.percentile(history, percentile))


class AutoClip:
    def __init__(self, percentile: float = 10.0):
        self.percentile = percentile
        self.history: list[float] = []

    def clip(self, parameters) -> tuple[float, float]:
        """Observe the current global norm, then clip to the percentile.

        Returns (observed norm, threshold used).
        """
        parameters = [p for p in parameters if p.grad is not None]
        norm = float(torch.linalg.vector_norm(
            torch.stack([torch.linalg.vector_norm(p.grad) for p in parameters])
        ))
        self.history.append(norm)
        threshold = autoclip_threshold(self.history, self.percentile)
        if norm > threshold > 0.0:
            scale = threshold / norm
            for p in parameters:
                p.grad.mul_(scale)
        return norm, threshold
