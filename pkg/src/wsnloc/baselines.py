"""Ablation temporal encoders: the single-snapshot pass-through and the
exponentially weighted moving average. Both produce an (N, N+2) matrix
that feeds the same spatial attention stack as the learned encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EwmaConfig:
    decay: float = 0.6  # weight on the newest timestamp, in (0, 1]

    def validate(self):
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"ewma decay must lie in (0, 1], got {self.decay}")


def snapshot_features(slices: list[np.ndarray]) -> np.ndarray:
    """The last timestamp only; earlier slices are ignored entirely."""
    if not slices:
        raise ValueError("snapshot_features: empty sequence")
    return slices[-1]


def ewma_encode(slices: list[np.ndarray], cfg: EwmaConfig) -> np.ndarray:
    """Recursive average favoring recent timestamps:

    E_1 = S_1;  E_t = decay * S_t + (1 - decay) * E_{t-1}

    The effective weights over timestamps sum to one, so a constant
    sequence is a fixed point and decay = 1 reduces to the snapshot.
    """
    cfg.validate()
    if not slices:
        raise ValueError("ewma_encode: empty sequence")
    acc = slices[0]
    for s in slices[1:]:
        acc = cfg.decay * s + (1.0 - cfg.decay) * acc
    return acc
