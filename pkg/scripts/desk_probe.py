#!/usr/bin/env python3
"""Desk-scale probe runs: train one configuration per command-line spec
and print a one-line summary. Used to calibrate the trend experiments.

Usage:
    python3 scripts/desk_probe.py model=ubigtloc alpha=0 sigma2=0.5 seed=1
"""

import sys
import time

sys.path.insert(0, "src")

from wsnloc.config import SimConfig, TrainConfig
from wsnloc import data, train


def run_probe(**kw):
    spec = dict(model="ubigtloc", alpha=0.2, sigma2=0.5, seed=1, epochs=60,
                lr=0.01, dropout=0.2, twindow=5, nodes=60, hidden=32, heads=2,
                topologies=40, draws=5, topo_split=0, aug=0.5, pmiss=0.02)
    unknown = set(kw) - set(spec)
    if unknown:
        raise SystemExit(f"unknown probe keys: {sorted(unknown)}")
    spec.update(kw)
    sim = SimConfig(node_count=int(spec["nodes"]), window=int(spec["twindow"]),
                    noise_variance=float(spec["sigma2"]),
                    miss_probability=float(spec["pmiss"]),
                    anchor_fraction=float(spec["alpha"]), seed=int(spec["seed"]))
    tc = TrainConfig(model=spec["model"], epochs=int(spec["epochs"]), batch_size=16,
                     lstm_hidden=int(spec["hidden"]), attn_hidden=int(spec["hidden"]),
                     attn_heads=int(spec["heads"]), dropout=float(spec["dropout"]),
                     seed=int(spec["seed"]), learning_rate=float(spec["lr"]),
                     augment_probability=float(spec["aug"]),
                     topology_disjoint_splits=bool(int(spec["topo_split"])))
    samples = data.build_dataset(sim, int(spec["topologies"]), int(spec["draws"]),
                                 int(spec["seed"]))
    tr, te = data.train_test_split(samples, tc.test_fraction, tc.seed,
                                   by_topology=tc.topology_disjoint_splits)
    t0 = time.time()
    model, hist = train.train_model(tr, sim, tc)
    table = train.evaluate(model, te)
    tag = " ".join(f"{k}={spec[k]}" for k in
                   ("model", "alpha", "sigma2", "twindow", "lr", "dropout",
                    "aug", "pmiss", "seed"))
    print(f"{tag}: train {hist[0].mean_train_loss:.0f}->{hist[-1].mean_train_loss:.0f} "
          f"TEST mse={table.mse_mean:.2f} euclid={table.euclid_mean:.3f} "
          f"({time.time() - t0:.0f}s)", flush=True)
    return table.mse_mean


if __name__ == "__main__":
    kw = dict(part.split("=", 1) for part in sys.argv[1:])
    run_probe(**kw)
