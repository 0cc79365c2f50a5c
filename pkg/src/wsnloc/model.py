"""Model assembly: the full temporal + spatial localization network and
its two ablation variants, batched forward passes, and checkpoint IO.

A checkpoint is bound to one network size N because the feature width is
N+2; each experimental configuration trains its own model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from . import attention, baselines, head, temporal
from .autodiff import Tape, Tensor

CHECKPOINT_FORMAT_VERSION = 1

MODEL_KINDS = ("ubigtloc", "baseline1", "baseline2")


@dataclass
class ModelDims:
    kind: str
    n_nodes: int
    lstm_hidden: int = 500
    attn_hidden: int = 500
    attn_heads: int = 4
    ewma_decay: float = 0.6
    dropout_after_second_layer: bool = True

    @property
    def input_width(self) -> int:
        return self.n_nodes + 2

    @property
    def encoder_width(self) -> int:
        """Width of the temporal encoding handed to the spatial layers."""
        if self.kind == "ubigtloc":
            return 2 * self.lstm_hidden
        return self.input_width


@dataclass
class PreparedSample:
    """One graph ready for the forward pass: standardized feature slices,
    attention adjacency, and loss targets."""

    slices: list            # T arrays (N, N+2)
    adjacency: np.ndarray   # (N, N) binary
    positions: np.ndarray   # (N, 2)
    regular_mask: np.ndarray  # (N,) bool


class LocalizationModel:
    """Owns the parameters of one model variant and runs batched passes."""

    def __init__(self, dims: ModelDims, rng: np.random.Generator,
                 coord_center: tuple[float, float] = (0.0, 0.0)):
        if dims.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind: {dims.kind!r}")
        self.dims = dims
        if dims.kind == "ubigtloc":
            self.lstm_fwd = temporal.init_lstm_weights(dims.lstm_hidden, dims.input_width, rng)
            self.lstm_bwd = temporal.init_lstm_weights(dims.lstm_hidden, dims.input_width, rng)
        else:
            self.lstm_fwd = None
            self.lstm_bwd = None
        self.attn1 = attention.init_attention_weights(
            dims.attn_hidden, dims.encoder_width, dims.attn_heads, rng)
        self.attn2 = attention.init_attention_weights(
            dims.attn_hidden, dims.attn_hidden, dims.attn_heads, rng)
        self.bn = head.init_batch_norm(dims.attn_hidden)
        # starting every prediction at the field centroid keeps the head
        # bias from having to crawl there at optimizer speed
        self.proj = head.init_projection(dims.attn_hidden, rng, bias_init=coord_center)

    # -- parameters -----------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        if self.lstm_fwd is not None:
            params.update(temporal.lstm_param_dict("lstm.fwd", self.lstm_fwd))
            params.update(temporal.lstm_param_dict("lstm.bwd", self.lstm_bwd))
        params.update(attention.attention_param_dict("attn1", self.attn1))
        params.update(attention.attention_param_dict("attn2", self.attn2))
        params.update(head.head_param_dict(self.bn, self.proj))
        return params

    def buffers(self) -> dict[str, np.ndarray]:
        return {"bn.run_mean": self.bn.run_mean, "bn.run_var": self.bn.run_var}

    # -- forward --------------------------------------------------------

    def encode_temporal(self, tape: Tape, samples: list[PreparedSample]) -> Tensor:
        """Temporal stage over the whole batch, stacked along rows."""
        if self.dims.kind == "ubigtloc":
            t_steps = len(samples[0].slices)
            stacked = [
                ad.constant(np.concatenate([s.slices[t] for s in samples], axis=0))
                for t in range(t_steps)
            ]
            return temporal.bilstm_encode(tape, stacked, self.lstm_fwd, self.lstm_bwd)
        if self.dims.kind == "baseline1":
            rows = [baselines.snapshot_features(s.slices) for s in samples]
        else:
            cfg = baselines.EwmaConfig(decay=self.dims.ewma_decay)
            rows = [baselines.ewma_encode(s.slices, cfg) for s in samples]
        return ad.constant(np.concatenate(rows, axis=0))

    def forward_batch(self, samples: list[PreparedSample], train: bool,
                      dropout_p: float = 0.0,
                      rng: np.random.Generator | None = None,
                      tape: Tape | None = None) -> tuple[Tensor, Tape]:
        """Predicted coordinates for every node of every graph in the
        batch, stacked along rows in sample order."""
        if tape is None:
            tape = Tape()
        n = self.dims.n_nodes
        for s in samples:
            if s.slices[0].shape != (n, n + 2):
                raise ad.ShapeError(
                    f"sample feature slice {s.slices[0].shape} does not match "
                    f"model built for N={n} (expected {(n, n + 2)})")
        encoded = self.encode_temporal(tape, samples)

        def conv_layer(x: Tensor, layer) -> Tensor:
            outs = []
            for idx, s in enumerate(samples):
                rows = ad.slice_rows(tape, x, idx * n, (idx + 1) * n)
                outs.append(attention.transformer_conv(tape, rows, s.adjacency, layer))
            return outs[0] if len(outs) == 1 else ad.concat_rows(tape, outs)

        x = ad.relu(tape, conv_layer(encoded, self.attn1))
        if train and dropout_p > 0.0:
            x = ad.dropout(tape, x, dropout_p, rng)
        x = ad.relu(tape, conv_layer(x, self.attn2))
        if train and dropout_p > 0.0 and self.dims.dropout_after_second_layer:
            x = ad.dropout(tape, x, dropout_p, rng)
        z = head.batch_norm(tape, x, self.bn, train=train)
        pred = head.project_coordinates(tape, z, self.proj)
        return pred, tape

    def batch_loss(self, samples: list[PreparedSample], train: bool,
                   dropout_p: float = 0.0,
                   rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor, Tape]:
        """(loss, predictions, tape) with the loss averaged per regular
        node across the whole batch."""
        pred, tape = self.forward_batch(samples, train, dropout_p, rng)
        truth = np.concatenate([s.positions for s in samples], axis=0)
        mask = np.concatenate([s.regular_mask for s in samples])
        loss = head.masked_mse(tape, pred, truth, mask)
        return loss, pred, tape


# ---------------------------------------------------------------------------
# checkpoint IO
# ---------------------------------------------------------------------------

def save_checkpoint(path: str, model: LocalizationModel, train_config: dict | None = None,
                    extra: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "dims": asdict(model.dims),
        "params": {
            name: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
            for name, t in sorted(model.parameters().items())
        },
        "buffers": {
            name: {"shape": list(a.shape), "data": a.ravel().tolist()}
            for name, a in sorted(model.buffers().items())
        },
        "train_config": train_config or {},
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str) -> tuple[LocalizationModel, dict]:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    dims = ModelDims(**payload["dims"])
    model = LocalizationModel(dims, np.random.default_rng(0))
    params = model.parameters()
    stored = payload["params"]
    if set(stored) != set(params):
        missing = set(params) - set(stored)
        surplus = set(stored) - set(params)
        raise ValueError(f"checkpoint parameter mismatch: missing={sorted(missing)} "
                         f"unexpected={sorted(surplus)}")
    for name, entry in stored.items():
        arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        if arr.shape != params[name].data.shape:
            raise ValueError(f"checkpoint {name}: shape {arr.shape} vs "
                             f"expected {params[name].data.shape}")
        params[name].data = arr
    model.bn.run_mean = np.asarray(payload["buffers"]["bn.run_mean"]["data"], dtype=float)
    model.bn.run_var = np.asarray(payload["buffers"]["bn.run_var"]["data"], dtype=float)
    return model, payload
