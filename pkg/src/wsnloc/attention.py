"""Graph-transformer spatial layers.

Each layer runs multi-head scaled dot-product attention restricted to
graph neighbors (self excluded; a node's own features enter through a
separate skip transform), concatenates the heads, projects back to the
layer width, and adds the skip path. Two such layers with ReLU and
inverted dropout form the spatial stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor


@dataclass
class AttentionLayerWeights:
    """Per-head query/key/value transforms (hidden, in_width), a skip
    transform of the same shape, and the head-merging projection
    (hidden, heads*hidden)."""

    queries: list  # E tensors (hidden, in_width)
    keys: list
    values: list
    skip: Tensor       # (hidden, in_width)
    merge: Tensor      # (hidden, heads*hidden)

    @property
    def heads(self) -> int:
        return len(self.queries)

    @property
    def hidden_size(self) -> int:
        return self.skip.shape[0]

    @property
    def input_width(self) -> int:
        return self.skip.shape[1]


def init_attention_weights(hidden: int, input_width: int, heads: int,
                           rng: np.random.Generator) -> AttentionLayerWeights:
    def w(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return ad.parameter(rng.uniform(-bound, bound, size=(rows, cols)))

    return AttentionLayerWeights(
        queries=[w(hidden, input_width) for _ in range(heads)],
        keys=[w(hidden, input_width) for _ in range(heads)],
        values=[w(hidden, input_width) for _ in range(heads)],
        skip=w(hidden, input_width),
        merge=w(hidden, heads * hidden),
    )


def neighbor_mask(adjacency: np.ndarray) -> np.ndarray:
    """Boolean attention mask: in-range pairs, self excluded."""
    mask = adjacency.astype(bool).copy()
    np.fill_diagonal(mask, False)
    return mask


def attention_coefficients(tape: Tape, node_feats: Tensor, adjacency: np.ndarray,
                           w: AttentionLayerWeights) -> list[Tensor]:
    """Per-head softmax-normalized query-key scores over each node's
    neighborhood. Off-neighborhood entries are exactly zero; isolated
    nodes get an all-zero row."""
    if node_feats.shape[1] != w.input_width:
        raise ad.ShapeError(
            f"attention: features {node_feats.shape} vs input width {w.input_width}")
    mask = neighbor_mask(adjacency)
    inv_sqrt = 1.0 / math.sqrt(w.hidden_size)
    coeffs = []
    for wq, wk in zip(w.queries, w.keys):
        q = ad.matmul_t(tape, node_feats, wq)
        k = ad.matmul_t(tape, node_feats, wk)
        scores = ad.scale(tape, ad.matmul_t(tape, q, k), inv_sqrt)
        coeffs.append(ad.row_softmax(tape, scores, mask))
    return coeffs


def transformer_conv(tape: Tape, node_feats: Tensor, adjacency: np.ndarray,
                     w: AttentionLayerWeights) -> Tensor:
    """One attention layer: skip transform plus the merged multi-head
    neighbor aggregation. Isolated nodes keep only the skip term."""
    coeffs = attention_coefficients(tape, node_feats, adjacency, w)
    gathered = None
    for beta, wv in zip(coeffs, w.values):
        v = ad.matmul_t(tape, node_feats, wv)
        head_out = ad.matmul(tape, beta, v)
        gathered = head_out if gathered is None else ad.concat_cols(tape, gathered, head_out)
    merged = ad.matmul_t(tape, gathered, w.merge)
    skip = ad.matmul_t(tape, node_feats, w.skip)
    return ad.add(tape, skip, merged)


def spatial_forward(tape: Tape, node_feats: Tensor, adjacency: np.ndarray,
                    layer1: AttentionLayerWeights, layer2: AttentionLayerWeights,
                    train: bool, dropout_p: float, rng: np.random.Generator | None,
                    dropout_after_second_layer: bool = True) -> Tensor:
    """Both spatial layers with ReLU and (train-mode) inverted dropout
    after each; in eval mode dropout is the identity."""
    x = ad.relu(tape, transformer_conv(tape, node_feats, adjacency, layer1))
    if train and dropout_p > 0.0:
        x = ad.dropout(tape, x, dropout_p, rng)
    x = ad.relu(tape, transformer_conv(tape, x, adjacency, layer2))
    if train and dropout_p > 0.0 and dropout_after_second_layer:
        x = ad.dropout(tape, x, dropout_p, rng)
    return x


def attention_param_dict(prefix: str, w: AttentionLayerWeights) -> dict[str, Tensor]:
    params = {f"{prefix}.W_skip": w.skip, f"{prefix}.W_merge": w.merge}
    for e in range(w.heads):
        params[f"{prefix}.head{e + 1}.Wq"] = w.queries[e]
        params[f"{prefix}.head{e + 1}.Wk"] = w.keys[e]
        params[f"{prefix}.head{e + 1}.Wv"] = w.values[e]
    return params
