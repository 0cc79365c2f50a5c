"""Bidirectional LSTM temporal encoder.

One shared-weight cell per direction processes the per-timestamp feature
matrices (batch dimension = nodes); only the final hidden state of each
direction survives, concatenated into an (N, 2*H) encoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor


@dataclass
class LstmWeights:
    """Gate weights, each (hidden, hidden + input_width); biases length hidden.

    Gate layout matches the cell equations: forget and input gates and
    the candidate/output transforms all read the concatenated
    [prev_hidden, current_input] block.
    """

    w_forget: Tensor
    w_cand: Tensor
    w_input: Tensor
    w_out: Tensor
    b_forget: Tensor
    b_cand: Tensor
    b_input: Tensor
    b_out: Tensor

    @property
    def hidden_size(self) -> int:
        return self.w_forget.shape[0]

    @property
    def input_width(self) -> int:
        return self.w_forget.shape[1] - self.w_forget.shape[0]


@dataclass
class LstmState:
    h: Tensor  # (N, hidden)
    c: Tensor  # (N, hidden)


def init_lstm_weights(hidden: int, input_width: int, rng: np.random.Generator) -> LstmWeights:
    """Uniform init in +-1/sqrt(fan_in); biases zero."""
    fan_in = hidden + input_width
    bound = 1.0 / np.sqrt(fan_in)

    def w():
        return ad.parameter(rng.uniform(-bound, bound, size=(hidden, fan_in)))

    return LstmWeights(
        w_forget=w(), w_cand=w(), w_input=w(), w_out=w(),
        b_forget=ad.parameter(np.zeros(hidden)),
        b_cand=ad.parameter(np.zeros(hidden)),
        b_input=ad.parameter(np.zeros(hidden)),
        b_out=ad.parameter(np.zeros(hidden)),
    )


def zero_state(n_rows: int, hidden: int) -> LstmState:
    return LstmState(h=ad.constant(np.zeros((n_rows, hidden))),
                     c=ad.constant(np.zeros((n_rows, hidden))))


def lstm_cell(tape: Tape, x_t: Tensor, state: LstmState, w: LstmWeights) -> LstmState:
    """One gated update.

    forget = sig(W_f . [h, x] + b_f)
    cand   = tanh(W_c . [h, x] + b_c)
    gate_in = sig(W_i . [h, x] + b_i)
    c_new  = forget * c + gate_in * cand
    gate_out = sig(W_o . [h, x] + b_o)
    h_new  = gate_out * tanh(c_new)
    """
    if x_t.shape[1] != w.input_width or state.h.shape[1] != w.hidden_size:
        raise ad.ShapeError(
            f"lstm_cell: input {x_t.shape}, state {state.h.shape}, "
            f"weights expect width {w.input_width} hidden {w.hidden_size}")
    hx = ad.concat_cols(tape, state.h, x_t)

    def gate(weight, bias, activation):
        pre = ad.add(tape, ad.matmul_t(tape, hx, weight), bias)
        return activation(tape, pre)

    forget = gate(w.w_forget, w.b_forget, ad.sigmoid)
    cand = gate(w.w_cand, w.b_cand, ad.tanh)
    gate_in = gate(w.w_input, w.b_input, ad.sigmoid)
    c_new = ad.add(tape, ad.mul(tape, forget, state.c), ad.mul(tape, gate_in, cand))
    gate_out = gate(w.w_out, w.b_out, ad.sigmoid)
    h_new = ad.mul(tape, gate_out, ad.tanh(tape, c_new))
    return LstmState(h=h_new, c=c_new)


def bilstm_encode(tape: Tape, slices: list[Tensor], w_fwd: LstmWeights,
                  w_bwd: LstmWeights) -> Tensor:
    """Run both directions over the timestamp sequence and concatenate
    the two final hidden states: (N, 2*hidden)."""
    if not slices:
        raise ValueError("bilstm_encode: empty sequence")
    n_rows = slices[0].shape[0]
    state = zero_state(n_rows, w_fwd.hidden_size)
    for x_t in slices:
        state = lstm_cell(tape, x_t, state, w_fwd)
    forward_final = state.h
    state = zero_state(n_rows, w_bwd.hidden_size)
    for x_t in reversed(slices):
        state = lstm_cell(tape, x_t, state, w_bwd)
    return ad.concat_cols(tape, forward_final, state.h)


def lstm_param_dict(prefix: str, w: LstmWeights) -> dict[str, Tensor]:
    return {
        f"{prefix}.W_forget": w.w_forget,
        f"{prefix}.W_cand": w.w_cand,
        f"{prefix}.W_input": w.w_input,
        f"{prefix}.W_out": w.w_out,
        f"{prefix}.b_forget": w.b_forget,
        f"{prefix}.b_cand": w.b_cand,
        f"{prefix}.b_input": w.b_input,
        f"{prefix}.b_out": w.b_out,
    }
