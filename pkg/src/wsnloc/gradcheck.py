"""End-to-end gradient verification against central finite differences.

Builds a miniature network, runs the full train-mode pipeline (temporal
encoder, both attention layers, batch normalization, projection, masked
MSE), and compares every analytic parameter gradient with its numeric
estimate. Dropout is disabled so the loss stays a deterministic function
of the parameters.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import autodiff as ad
from . import data
from .config import SimConfig, TrainConfig
from .train import new_model

REL_TOLERANCE = 1e-4

# A small field keeps the squared-meter loss O(10), which keeps the
# finite-difference roundoff term (machine eps * loss / h) well below
# the tolerance even for the softest parameter directions.
TINY_SIM = SimConfig(
    field_side=8.0,
    node_count=6,
    anchor_fraction=0.2,
    radio_range=5.0,
    window=3,
    noise_variance=0.25,
    miss_probability=0.1,
    seed=5,
)

TINY_TRAIN = TrainConfig(
    lstm_hidden=4,
    attn_hidden=4,
    attn_heads=2,
    dropout=0.0,
    seed=5,
)


def check_model(model_kind: str, sim: SimConfig | None = None,
                tc: TrainConfig | None = None, n_graphs: int = 2,
                h: float = 1e-4) -> dict[str, float]:
    """Per-parameter max relative error between analytic and numeric
    gradients for one model variant."""
    sim = sim or TINY_SIM
    tc = dataclasses.replace(tc or TINY_TRAIN, model=model_kind)
    samples = data.build_dataset(sim, n_graphs, 1, sim.seed)
    prepared = [data.prepare_sample(s) for s in samples]
    model = new_model(sim, tc)
    params = model.parameters()

    def loss_value() -> float:
        # batch-norm running stats are restored so repeated evaluations
        # stay pure functions of the parameters
        saved = (model.bn.run_mean.copy(), model.bn.run_var.copy())
        loss, _, _ = model.batch_loss(prepared, train=True, dropout_p=0.0)
        model.bn.run_mean, model.bn.run_var = saved
        return float(loss.data)

    saved = (model.bn.run_mean.copy(), model.bn.run_var.copy())
    loss, _, tape = model.batch_loss(prepared, train=True, dropout_p=0.0)
    model.bn.run_mean, model.bn.run_var = saved
    ad.zero_grads(params)
    ad.backward(tape, loss)
    analytic = {name: ad.grad_of(t) for name, t in params.items()}
    numeric = ad.finite_diff_grad(loss_value, params, h=h)

    report = {}
    for name in sorted(params):
        report[name] = ad.max_relative_error(
            {name: analytic[name]}, {name: numeric[name]})
    return report


def run_gradcheck(sim: SimConfig | None = None, tc: TrainConfig | None = None,
                  models: tuple = ("ubigtloc", "baseline1", "baseline2"),
                  verbose: bool = True) -> float:
    """Check every model variant; returns the worst relative error."""
    worst = 0.0
    for kind in models:
        report = check_model(kind, sim, tc)
        kind_worst = max(report.values())
        worst = max(worst, kind_worst)
        if verbose:
            print(f"{kind}: max relative error {kind_worst:.3e} "
                  f"over {len(report)} parameter blocks")
            offenders = {k: v for k, v in report.items() if v >= REL_TOLERANCE}
            for name, err in sorted(offenders.items()):
                print(f"  FAIL {name}: {err:.3e}")
    return worst
