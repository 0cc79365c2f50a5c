"""RSSI wireless-sensor-network localization lab.

Simulates shadowed RSSI channels over random sensor fields, trains a
BiLSTM + graph-transformer coordinate regressor (and its snapshot/EWMA
ablations) on a from-scratch tape autodiff core, and sweeps the channel
and network parameters that drive localization accuracy.
"""

from .config import SimConfig, TrainConfig

__all__ = ["SimConfig", "TrainConfig"]
__version__ = "0.1.0"
