"""Empirical CDF emission for per-node localization errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CdfSeries:
    """Sorted error values paired with step probabilities k/M; both
    coordinates are nondecreasing and the last probability is exactly 1."""

    errors: np.ndarray
    probabilities: np.ndarray

    def quantile(self, q: float) -> float:
        """Smallest error whose cumulative probability reaches q."""
        idx = int(np.searchsorted(self.probabilities, q))
        idx = min(idx, len(self.errors) - 1)
        return float(self.errors[idx])


def emit_cdf(per_node_errors) -> CdfSeries:
    errors = np.asarray(per_node_errors, dtype=float)
    if errors.size == 0:
        raise ValueError("emit_cdf: empty error list")
    ordered = np.sort(errors)
    probs = np.arange(1, errors.size + 1) / errors.size
    return CdfSeries(errors=ordered, probabilities=probs)
