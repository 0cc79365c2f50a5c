#!/usr/bin/env python3
"""Reproduce the trend experiments at desk scale and emit their CSVs.

Runs the noise, anchor-percentage, and time-window sweeps for the full
model and both ablations on a 60-node field, writing one CSV per sweep
into results/. Expect roughly an hour of CPU for the whole set; pass
sweep names to run a subset:

    python3 scripts/run_desk_sweeps.py noise alpha
"""

import os
import sys

sys.path.insert(0, "src")

from wsnloc.config import SimConfig, TrainConfig
from wsnloc.sweep import SweepSpec, run_sweep, write_sweep_csv

DESK_SIM = SimConfig(
    node_count=60,
    window=5,
    noise_variance=0.5,
    anchor_fraction=0.2,
    seed=1,
)

DESK_TRAIN = TrainConfig(
    epochs=60,
    batch_size=16,
    learning_rate=0.01,
    dropout=0.2,
    lstm_hidden=32,
    attn_hidden=32,
    attn_heads=2,
    topology_disjoint_splits=False,
)

SWEEPS = {
    "noise": dict(param="noise", values=[0.04, 0.1, 0.25, 0.5],
                  models=["ubigtloc", "baseline1", "baseline2"]),
    "alpha": dict(param="alpha", values=[0.0, 0.2, 0.5],
                  models=["ubigtloc", "baseline1", "baseline2"]),
    "twindow": dict(param="twindow", values=[2, 5, 8, 12],
                    models=["ubigtloc", "baseline2"]),
    "dth": dict(param="dth", values=[10.0, 20.0, 40.0],
                models=["ubigtloc"]),
    "kappa": dict(param="kappa", values=[0.0, 0.5, 1.0],
                  models=["ubigtloc"]),
    "nodes": dict(param="nodes", values=[40, 60, 80],
                  models=["ubigtloc"]),
}


def main(names):
    os.makedirs("results", exist_ok=True)
    for name in names:
        kw = SWEEPS[name]
        spec = SweepSpec(seeds=[1, 2, 3], sim=DESK_SIM, tc=DESK_TRAIN,
                         topologies=40, draws=5, **kw)
        rows = run_sweep(spec)
        out = os.path.join("results", f"sweep_{name}.csv")
        write_sweep_csv(out, rows)
        aggregates = [r for r in rows if r["row_type"] == "aggregate"]
        print(f"[{name}] -> {out}")
        for r in aggregates:
            print(f"  {r['model']:<10} {r['param']}={r['value']:<6} "
                  f"mse {r['masked_mse']:.2f} +- {r['masked_mse_std']:.2f}")


if __name__ == "__main__":
    chosen = sys.argv[1:] or list(SWEEPS)
    unknown = set(chosen) - set(SWEEPS)
    if unknown:
        raise SystemExit(f"unknown sweep names: {sorted(unknown)}")
    main(chosen)
