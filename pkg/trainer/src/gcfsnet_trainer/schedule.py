"""Learning-rate schedule: per-epoch decay plus plateau halving."""

from __future__ import annotations

from .config import TrainConfig


def lr_at(epoch: int, n_plateau_events: int, cfg: TrainConfig = TrainConfig()) -> float:
    """lr_init * decay^epoch * plateau_factor^(number of plateau events)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return (cfg.lr_init * cfg.lr_decay_per_epoch**epoch
            * cfg.plateau_factor**n_plateau_events)


class PlateauTracker:
    """Counts epochs without dev-loss improvement; fires after `patience`."""

    def __init__(self, patience: int = 5):
        self.patience = patience
        self.best = float("inf")
        self.stale = 0
        self.events = 0

    def update(self, dev_loss: float) -> bool:
        """Record one epoch's dev loss; True when a halving event fires."""
        if dev_loss < self.best:
            self.best = dev_loss
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.events += 1
            self.stale = 0
            return True
        return False
