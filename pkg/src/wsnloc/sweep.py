"""Parameter sweeps: build, train, and evaluate a model per sweep point
and emit per-run plus aggregate CSV rows."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import data, train
from .config import SimConfig, TrainConfig

SWEEP_PARAMS = {
    "noise": "noise_variance",
    "nodes": "node_count",
    "kappa": "interference_scale",
    "twindow": "window",
    "dth": "radio_range",
    "alpha": "anchor_fraction",
}

CSV_COLUMNS = ["row_type", "model", "param", "value", "seed",
               "masked_mse", "masked_mse_std", "euclid", "euclid_std", "note"]


@dataclass
class SweepSpec:
    param: str
    values: list
    models: list
    seeds: list
    sim: SimConfig
    tc: TrainConfig
    topologies: int = 100
    draws: int = 10

    def validate(self):
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.param!r}; "
                             f"choose from {sorted(SWEEP_PARAMS)}")
        if not self.values or not self.models or not self.seeds:
            raise ValueError("sweep needs at least one value, model, and seed")


def apply_sweep_value(sim: SimConfig, param: str, value) -> SimConfig:
    attr = SWEEP_PARAMS[param]
    caster = int if attr in ("node_count", "window") else float
    return dataclasses.replace(sim, **{attr: caster(value)})


def run_point(sim: SimConfig, tc: TrainConfig, topologies: int, draws: int,
              seed: int) -> train.MetricsTable:
    """One sweep point: dataset, split, train, evaluate on the held-out part."""
    sim = dataclasses.replace(sim, seed=seed)
    tc = dataclasses.replace(tc, seed=seed)
    samples = data.build_dataset(sim, topologies, draws, seed)
    train_set, test_set = data.train_test_split(
        samples, tc.test_fraction, seed, by_topology=tc.topology_disjoint_splits)
    model, _, _ = train.fit(train_set, sim, tc)
    return train.evaluate(model, test_set)


def run_sweep(spec: SweepSpec) -> list[dict]:
    """All (model, value, seed) points in spec order, then aggregates.

    A failing point is recorded with its error message and the sweep
    moves on.
    """
    spec.validate()
    rows = []
    for model_name in spec.models:
        for value in spec.values:
            point_metrics = []
            for seed in spec.seeds:
                sim = apply_sweep_value(spec.sim, spec.param, value)
                tc = dataclasses.replace(spec.tc, model=model_name)
                row = {"row_type": "run", "model": model_name, "param": spec.param,
                       "value": value, "seed": seed, "masked_mse": "",
                       "masked_mse_std": "", "euclid": "", "euclid_std": "", "note": ""}
                try:
                    metrics = run_point(sim, tc, spec.topologies, spec.draws, seed)
                    row["masked_mse"] = metrics.mse_mean
                    row["euclid"] = metrics.euclid_mean
                    point_metrics.append(metrics)
                except Exception as exc:  # noqa: BLE001 - flagged, sweep continues
                    row["row_type"] = "failed"
                    row["note"] = f"{type(exc).__name__}: {exc}"
                rows.append(row)
            if point_metrics:
                mses = [m.mse_mean for m in point_metrics]
                eucs = [m.euclid_mean for m in point_metrics]
                rows.append({
                    "row_type": "aggregate", "model": model_name, "param": spec.param,
                    "value": value, "seed": "",
                    "masked_mse": float(np.mean(mses)),
                    "masked_mse_std": float(np.std(mses)),
                    "euclid": float(np.mean(eucs)),
                    "euclid_std": float(np.std(eucs)),
                    "note": "",
                })
    return rows


def write_sweep_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
