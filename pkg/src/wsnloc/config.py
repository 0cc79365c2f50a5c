"""Simulation and training configuration dataclasses plus JSON loading."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


@dataclass
class SimConfig:
    """Field geometry, radio channel, and acquisition-window parameters."""

    field_side: float = 100.0          # square field edge, meters
    node_count: int = 100
    anchor_fraction: float = 0.2
    radio_range: float = 20.0          # meters
    window: int = 10                   # RSSI timestamps per sample
    noise_variance: float = 0.5        # shadowing variance, dB^2
    interference_scale: float = 0.0    # in [0, 1]; disturbance std = scale * sqrt(N)
    path_loss_exponent: float = 3.0
    ref_rssi: float = -40.0            # dBm at ref_distance
    ref_distance: float = 1.0          # meters
    miss_probability: float = 0.02
    min_distance: float = 0.1          # clamp before the log term, meters
    seed: int = 0

    def validate(self) -> None:
        if self.field_side <= 0:
            raise ValueError("field_side must be positive")
        if self.node_count < 2:
            raise ValueError("node_count must be at least 2")
        if not 0.0 <= self.anchor_fraction <= 1.0:
            raise ValueError("anchor_fraction must lie in [0, 1]")
        if self.radio_range <= 0:
            raise ValueError("radio_range must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        if not 0.0 <= self.interference_scale <= 1.0:
            raise ValueError("interference_scale must lie in [0, 1]")
        if self.ref_distance <= 0:
            raise ValueError("ref_distance must be positive")
        if self.min_distance <= 0:
            raise ValueError("min_distance must be positive")
        if not 0.0 <= self.miss_probability < 1.0:
            raise ValueError("miss_probability must lie in [0, 1)")


@dataclass
class TrainConfig:
    """Model selection, optimization, and data-handling parameters."""

    model: str = "ubigtloc"            # ubigtloc | baseline1 | baseline2
    batch_size: int = 16
    epochs: int = 100
    learning_rate: float = 0.001
    dropout: float = 0.5
    augment_probability: float = 0.5
    edge_removal_fraction: float = 0.10
    feature_noise_std: float = 0.1
    folds: int = 5
    seed: int = 0

    # architecture
    lstm_hidden: int = 500
    attn_hidden: int = 500
    attn_heads: int = 4
    ewma_decay: float = 0.6
    dropout_after_second_layer: bool = True

    # data handling
    test_fraction: float = 0.2
    topology_disjoint_splits: bool = True

    # cross-validation grid; singletons mean "no search"
    cv_learning_rates: list = field(default_factory=list)
    cv_dropouts: list = field(default_factory=list)

    def validate(self) -> None:
        if self.model not in ("ubigtloc", "baseline1", "baseline2"):
            raise ValueError(f"unknown model selector: {self.model!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        for name in ("dropout", "augment_probability", "edge_removal_fraction",
                     "test_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.ewma_decay <= 1.0:
            raise ValueError("ewma_decay must lie in (0, 1]")
        if self.lstm_hidden < 1 or self.attn_hidden < 1 or self.attn_heads < 1:
            raise ValueError("hidden sizes and head count must be positive")


_SIM_FIELDS = {f.name for f in dataclasses.fields(SimConfig)}
_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}
# dataset-size keys consumed by gen/sweep
_EXTRA_KEYS = {"topologies", "draws"}


def config_from_dict(raw: dict) -> tuple[SimConfig, TrainConfig, dict]:
    """Split a flat JSON object into (SimConfig, TrainConfig, extras).

    Keys mirror the dataclass field names; unknown keys are an error so
    typos do not silently fall back to defaults.
    """
    unknown = set(raw) - _SIM_FIELDS - _TRAIN_FIELDS - _EXTRA_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    sim = SimConfig(**{k: v for k, v in raw.items() if k in _SIM_FIELDS})
    train = TrainConfig(**{k: v for k, v in raw.items() if k in _TRAIN_FIELDS})
    sim.validate()
    train.validate()
    extras = {k: v for k, v in raw.items() if k in _EXTRA_KEYS}
    return sim, train, extras


def load_config(path: str) -> tuple[SimConfig, TrainConfig, dict]:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def sim_config_to_dict(cfg: SimConfig) -> dict:
    return dataclasses.asdict(cfg)


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)
