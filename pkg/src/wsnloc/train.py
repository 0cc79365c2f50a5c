"""Mini-batch training loop, evaluation, and cross-validation selection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import data, head
from .config import SimConfig, TrainConfig
from .data import GraphSample
from .model import LocalizationModel, ModelDims


class NonFiniteLossError(RuntimeError):
    pass


@dataclass
class HistoryRow:
    epoch: int
    mean_train_loss: float
    mean_val_loss: float | None = None


@dataclass
class MetricsTable:
    """Per-sample losses plus the pooled per-node error list for CDF plots."""

    per_sample_mse: list = field(default_factory=list)
    per_sample_euclid: list = field(default_factory=list)
    per_node_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def mse_mean(self) -> float:
        return float(np.mean(self.per_sample_mse))

    @property
    def mse_std(self) -> float:
        return float(np.std(self.per_sample_mse))

    @property
    def euclid_mean(self) -> float:
        return float(np.mean(self.per_sample_euclid))

    @property
    def euclid_std(self) -> float:
        return float(np.std(self.per_sample_euclid))


def model_dims_from_config(tc: TrainConfig, n_nodes: int) -> ModelDims:
    return ModelDims(
        kind=tc.model,
        n_nodes=n_nodes,
        lstm_hidden=tc.lstm_hidden,
        attn_hidden=tc.attn_hidden,
        attn_heads=tc.attn_heads,
        ewma_decay=tc.ewma_decay,
        dropout_after_second_layer=tc.dropout_after_second_layer,
    )


def new_model(sim_cfg: SimConfig, tc: TrainConfig) -> LocalizationModel:
    dims = model_dims_from_config(tc, sim_cfg.node_count)
    center = (sim_cfg.field_side / 2.0, sim_cfg.field_side / 2.0)
    return LocalizationModel(dims, np.random.default_rng([tc.seed, 10]), coord_center=center)


def train_model(train_set: list[GraphSample], sim_cfg: SimConfig, tc: TrainConfig,
                val_set: list[GraphSample] | None = None,
                model: LocalizationModel | None = None,
                ) -> tuple[LocalizationModel, list[HistoryRow]]:
    """Seeded mini-batch gradient descent: shuffle each epoch, augment per
    sample, forward in train mode, masked MSE, reverse pass, Adam step.

    Bit-reproducible for a given TrainConfig.seed. Aborts with a
    diagnostic on a non-finite loss rather than silently diverging.
    """
    if not train_set:
        raise ValueError("train_model: empty training set")
    if model is None:
        model = new_model(sim_cfg, tc)
    params = model.parameters()
    adam = ad.AdamState(params, learning_rate=tc.learning_rate)
    history = []

    for epoch in range(tc.epochs):
        shuffle_rng = np.random.default_rng([tc.seed, 20, epoch])
        batch_rng = np.random.default_rng([tc.seed, 30, epoch])
        order = shuffle_rng.permutation(len(train_set))
        epoch_loss = 0.0
        epoch_graphs = 0
        for start in range(0, len(order), tc.batch_size):
            batch_ids = order[start:start + tc.batch_size]
            batch = []
            for idx in batch_ids:
                sample = data.augment(
                    train_set[idx], batch_rng,
                    augment_probability=tc.augment_probability,
                    edge_removal_fraction=tc.edge_removal_fraction,
                    feature_noise_std=tc.feature_noise_std)
                batch.append(data.prepare_sample(sample))
            loss, _, tape = model.batch_loss(
                batch, train=True, dropout_p=tc.dropout, rng=batch_rng)
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                raise NonFiniteLossError(
                    f"non-finite loss {loss_value} at epoch {epoch}, "
                    f"batch starting {start}; "
                    f"param norm {_param_norm(params):.3e}, "
                    f"adam step count {adam.t}")
            ad.zero_grads(params)
            ad.backward(tape, loss)
            grads = {name: ad.grad_of(t) for name, t in params.items()}
            ad.adam_step(params, grads, adam)
            epoch_loss += loss_value * len(batch_ids)
            epoch_graphs += len(batch_ids)
        row = HistoryRow(epoch=epoch, mean_train_loss=epoch_loss / epoch_graphs)
        if val_set:
            row.mean_val_loss = evaluate(model, val_set).mse_mean
        history.append(row)
    return model, history


def _param_norm(params) -> float:
    return float(np.sqrt(sum((t.data ** 2).sum() for t in params.values())))


def evaluate(model: LocalizationModel, samples: list[GraphSample],
             batch_size: int = 32) -> MetricsTable:
    """Eval-mode metrics: per-sample masked MSE and mean Euclidean error,
    plus every regular node's individual error for CDF emission."""
    if not samples:
        raise ValueError("evaluate: empty evaluation set")
    table = MetricsTable()
    node_errors = []
    n = model.dims.n_nodes
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        prepared = [data.prepare_sample(s) for s in chunk]
        pred, _ = model.forward_batch(prepared, train=False)
        for idx, s in enumerate(chunk):
            rows = pred.data[idx * n:(idx + 1) * n]
            mask = ~s.anchor_flags
            table.per_sample_mse.append(head.masked_mse_value(rows, s.positions, mask))
            table.per_sample_euclid.append(
                head.mean_euclidean_error(rows, s.positions, mask))
            node_errors.append(head.per_node_errors(rows, s.positions, mask))
    table.per_node_errors = np.concatenate(node_errors)
    return table


def cross_validate(train_set: list[GraphSample], sim_cfg: SimConfig, tc: TrainConfig,
                   ) -> tuple[TrainConfig, list[dict]]:
    """Grid search over (learning rate x dropout) with topology-granular
    k-fold validation; returns the winning config and the search log.

    An empty grid means no search: the configured point wins outright.
    """
    rates = tc.cv_learning_rates or [tc.learning_rate]
    drops = tc.cv_dropouts or [tc.dropout]
    grid = list(itertools.product(rates, drops))
    if len(grid) == 1:
        chosen = _with_hyperparams(tc, *grid[0])
        return chosen, [{"learning_rate": grid[0][0], "dropout": grid[0][1],
                         "mean_val_mse": None, "selected": True}]

    folds = data.kfold_split(train_set, tc.folds, tc.seed)
    log = []
    best = None
    for lr, p_drop in grid:
        candidate = _with_hyperparams(tc, lr, p_drop)
        fold_scores = []
        for fold_train, fold_val in folds:
            fold_model, _ = train_model(fold_train, sim_cfg, candidate)
            fold_scores.append(evaluate(fold_model, fold_val).mse_mean)
        score = float(np.mean(fold_scores))
        log.append({"learning_rate": lr, "dropout": p_drop,
                    "mean_val_mse": score, "selected": False})
        if best is None or score < best[0]:
            best = (score, candidate, len(log) - 1)
    log[best[2]]["selected"] = True
    return best[1], log


def _with_hyperparams(tc: TrainConfig, lr: float, p_drop: float) -> TrainConfig:
    import dataclasses
    return dataclasses.replace(tc, learning_rate=lr, dropout=p_drop)


def fit(samples: list[GraphSample], sim_cfg: SimConfig, tc: TrainConfig,
        ) -> tuple[LocalizationModel, list[HistoryRow], list[dict]]:
    """Cross-validation selection (when a grid is declared) followed by a
    retrain on the full training set with the winning hyperparameters."""
    chosen, cv_log = cross_validate(samples, sim_cfg, tc)
    model, history = train_model(samples, sim_cfg, chosen)
    return model, history, cv_log
