"""Output stage: batch normalization, the coordinate projection, and the
regular-node loss metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass
class BatchNormParams:
    scale: Tensor              # learnable, length hidden
    shift: Tensor              # learnable, length hidden
    run_mean: np.ndarray       # eval-mode statistics, updated during training
    run_var: np.ndarray
    eps: float = BN_EPS
    momentum: float = BN_MOMENTUM


@dataclass
class ProjectionParams:
    weight: Tensor  # (2, hidden)
    bias: Tensor    # (2,)


def init_batch_norm(hidden: int) -> BatchNormParams:
    return BatchNormParams(
        scale=ad.parameter(np.ones(hidden)),
        shift=ad.parameter(np.zeros(hidden)),
        run_mean=np.zeros(hidden),
        run_var=np.ones(hidden),
    )


def init_projection(hidden: int, rng: np.random.Generator,
                    bias_init: tuple[float, float] = (0.0, 0.0)) -> ProjectionParams:
    bound = 1.0 / np.sqrt(hidden)
    return ProjectionParams(
        weight=ad.parameter(rng.uniform(-bound, bound, size=(2, hidden))),
        bias=ad.parameter(np.asarray(bias_init, dtype=float)),
    )


def batch_norm(tape: Tape, x: Tensor, p: BatchNormParams, train: bool) -> Tensor:
    """Normalize per channel. Train mode uses the pooled batch statistics
    and folds them into the running estimates; eval mode reuses the
    running estimates."""
    if train:
        y, mu, var = ad.batch_norm_train(tape, x, p.scale, p.shift, p.eps)
        p.run_mean = (1.0 - p.momentum) * p.run_mean + p.momentum * mu
        p.run_var = (1.0 - p.momentum) * p.run_var + p.momentum * var
        return y
    return ad.batch_norm_eval(tape, x, p.scale, p.shift, p.run_mean, p.run_var, p.eps)


def project_coordinates(tape: Tape, z: Tensor, p: ProjectionParams) -> Tensor:
    """Map each node row to its predicted (x, y): z @ W.T + b."""
    return ad.add(tape, ad.matmul_t(tape, z, p.weight), p.bias)


def masked_mse(tape: Tape, pred: Tensor, truth: np.ndarray,
               regular_mask: np.ndarray) -> Tensor:
    """Mean squared coordinate error over the regular nodes only (m^2).

    Anchors never contribute; rejects inputs without any regular node.
    """
    n_regular = int(regular_mask.sum())
    if n_regular == 0:
        raise ValueError("masked_mse: no regular nodes to score")
    if pred.shape != truth.shape:
        raise ad.ShapeError(f"masked_mse: pred {pred.shape} vs truth {truth.shape}")
    diff = ad.sub(tape, pred, ad.constant(truth))
    sq = ad.mul(tape, diff, diff)
    weights = np.where(regular_mask[:, None], 1.0 / n_regular, 0.0)
    weights = np.broadcast_to(weights, truth.shape).copy()
    return ad.sum_all(tape, ad.mul(tape, sq, ad.constant(weights)))


def masked_mse_value(pred: np.ndarray, truth: np.ndarray,
                     regular_mask: np.ndarray) -> float:
    """Plain-array version of the training objective."""
    n_regular = int(regular_mask.sum())
    if n_regular == 0:
        raise ValueError("masked_mse: no regular nodes to score")
    d = pred[regular_mask] - truth[regular_mask]
    return float((d ** 2).sum(axis=1).mean())


def mean_euclidean_error(pred: np.ndarray, truth: np.ndarray,
                         regular_mask: np.ndarray) -> float:
    """Average straight-line positioning error over regular nodes (m)."""
    return float(np.mean(per_node_errors(pred, truth, regular_mask)))


def per_node_errors(pred: np.ndarray, truth: np.ndarray,
                    regular_mask: np.ndarray) -> np.ndarray:
    """Euclidean error of each regular node, in meters."""
    n_regular = int(regular_mask.sum())
    if n_regular == 0:
        raise ValueError("per_node_errors: no regular nodes to score")
    d = pred[regular_mask] - truth[regular_mask]
    return np.sqrt((d ** 2).sum(axis=1))


def head_param_dict(bn: BatchNormParams, proj: ProjectionParams) -> dict[str, Tensor]:
    return {
        "bn.scale": bn.scale,
        "bn.shift": bn.shift,
        "head.W": proj.weight,
        "head.b": proj.bias,
    }
