"""Feature conditioning: mean imputation over each node/feature time
series, per-feature standardization, and per-timestamp slicing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netsim import FeatureTensor

_SIGMA_FLOOR = 1e-12


@dataclass
class NormalizationStats:
    mean: np.ndarray   # (N+2,) per-feature mean over all nodes and timestamps
    std: np.ndarray    # (N+2,) population standard deviation


@dataclass
class ProcessedFeatures:
    values: np.ndarray  # (N, N+2, T), standardized

    def slice_at(self, t: int) -> np.ndarray:
        return self.values[:, :, t]


def impute_mean(tensor: FeatureTensor) -> FeatureTensor:
    """Replace each missing entry by the mean of the present values in
    the same (node, feature) series across time; a fully missing series
    becomes zeros. Present values are never touched."""
    values = tensor.values
    missing = tensor.missing_mask
    if values.shape != missing.shape:
        raise ValueError(f"mask shape {missing.shape} != values shape {values.shape}")
    present = ~missing
    counts = present.sum(axis=2)
    sums = np.where(present, values, 0.0).sum(axis=2)
    with np.errstate(invalid="ignore"):
        series_mean = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    filled = np.where(missing, series_mean[:, :, None], values)
    return FeatureTensor(values=filled, missing_mask=np.zeros_like(missing))


def zscore_normalize(tensor: FeatureTensor) -> tuple[ProcessedFeatures, NormalizationStats]:
    """Standardize each feature column over all N*T entries (population
    std). Constant features map to all zeros rather than dividing by a
    vanishing sigma."""
    if tensor.missing_mask.any():
        raise ValueError("impute before normalizing: missing entries remain")
    values = tensor.values
    mean = values.mean(axis=(0, 2))
    std = values.std(axis=(0, 2))
    safe = np.where(std < _SIGMA_FLOOR, 1.0, std)
    normalized = (values - mean[None, :, None]) / safe[None, :, None]
    normalized[:, std < _SIGMA_FLOOR, :] = 0.0
    return ProcessedFeatures(values=normalized), NormalizationStats(mean=mean, std=std)


def slice_timesteps(processed: ProcessedFeatures) -> list[np.ndarray]:
    """The T per-timestamp matrices, each (N, N+2)."""
    return [processed.values[:, :, t] for t in range(processed.values.shape[2])]


def preprocess(tensor: FeatureTensor) -> tuple[list[np.ndarray], NormalizationStats]:
    """Impute, standardize, and slice in one call."""
    processed, stats = zscore_normalize(impute_mean(tensor))
    return slice_timesteps(processed), stats
