"""Dense-tensor math with tape-based reverse-mode differentiation.

Provides exactly the primitives the localization models need (matmul,
bias add, elementwise gates, masked row softmax, concat/slice, batch
norm, dropout) plus the Adam optimizer and a central finite-difference
oracle for gradient checks. Broadcasting is limited to the documented
cases; any other shape mismatch raises ShapeError.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float64


class ShapeError(ValueError):
    """Incompatible operand shapes for a primitive operation."""


class Tensor:
    """A dense array plus a gradient slot filled in by backward()."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        # copy on first write: g may alias another tensor's live gradient
        if self.grad is None:
            self.grad = np.array(g)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Execution-ordered record of primitive ops for reverse replay.

    Construction is single-threaded; independent tapes may run in
    parallel on distinct inputs.
    """

    __slots__ = ("_steps",)

    def __init__(self):
        self._steps = []

    def _record(self, backward_step):
        self._steps.append(backward_step)

    def __len__(self):
        return len(self._steps)


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)


def parameter(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype)


def _simple_op(tape, data, inputs, step_builder):
    """Create an op output; record its backward step when any input needs grads."""
    needs = any(t.requires_grad for t in inputs)
    result = Tensor(data, requires_grad=needs)
    if needs and tape is not None:
        tape._record(step_builder(result))
    return result


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------

def matmul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ result.grad)
        return step

    return _simple_op(tape, a.data @ b.data, (a, b), build)


def matmul_t(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    """a @ b.T for weights stored (out_dim, in_dim)."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"matmul_t: {a.shape} @ {b.shape}.T")

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad @ b.data)
            if b.requires_grad:
                b._accumulate(result.grad.T @ a.data)
        return step

    return _simple_op(tape, a.data @ b.data.T, (a, b), build)


def add(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also supports adding a length-M bias to an (N, M) matrix."""
    bias = a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]
    if not bias and a.shape != b.shape:
        raise ShapeError(f"add: {a.shape} + {b.shape}")

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad)
            if b.requires_grad:
                b._accumulate(result.grad.sum(axis=0) if bias else result.grad)
        return step

    return _simple_op(tape, a.data + b.data, (a, b), build)


def sub(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: {a.shape} - {b.shape}")

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad)
            if b.requires_grad:
                b._accumulate(-result.grad)
        return step

    return _simple_op(tape, a.data - b.data, (a, b), build)


def mul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: {a.shape} * {b.shape}")

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad * b.data)
            if b.requires_grad:
                b._accumulate(result.grad * a.data)
        return step

    return _simple_op(tape, a.data * b.data, (a, b), build)


def scale(tape: Tape, a: Tensor, c: float) -> Tensor:
    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad * c)
        return step

    return _simple_op(tape, a.data * c, (a,), build)


def sigmoid(tape: Tape, a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad * y * (1.0 - y))
        return step

    return _simple_op(tape, y, (a,), build)


def tanh(tape: Tape, a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad * (1.0 - y * y))
        return step

    return _simple_op(tape, y, (a,), build)


def relu(tape: Tape, a: Tensor) -> Tensor:
    positive = a.data > 0

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad * positive)
        return step

    return _simple_op(tape, np.where(positive, a.data, 0.0), (a,), build)


def row_softmax(tape: Tape, scores: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over each row, restricted to `mask` when given.

    Applies max-subtraction for stability. Entries outside the mask get
    coefficient 0; a row with an empty mask comes out all-zero.
    """
    s = scores.data
    if s.ndim != 2:
        raise ShapeError(f"row_softmax: expected matrix, got {scores.shape}")
    if mask is None:
        mask = np.ones(s.shape, dtype=bool)
    elif mask.shape != s.shape:
        raise ShapeError(f"row_softmax: mask {mask.shape} vs scores {scores.shape}")

    neg_inf = np.where(mask, s, -np.inf)
    row_max = neg_inf.max(axis=1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)  # empty rows
    e = np.where(mask, np.exp(neg_inf - row_max), 0.0)
    denom = e.sum(axis=1, keepdims=True)
    y = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)

    def build(result):
        def step():
            if scores.requires_grad:
                g = result.grad
                inner = (g * y).sum(axis=1, keepdims=True)
                scores._accumulate(y * (g - inner))
        return step

    return _simple_op(tape, y, (scores,), build)


def concat_cols(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: {a.shape} | {b.shape}")
    na = a.shape[1]

    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(result.grad[:, :na])
            if b.requires_grad:
                b._accumulate(result.grad[:, na:])
        return step

    return _simple_op(tape, np.concatenate([a.data, b.data], axis=1), (a, b), build)


def concat_rows(tape: Tape, tensors: list[Tensor]) -> Tensor:
    width = tensors[0].shape[1]
    for t in tensors:
        if t.data.ndim != 2 or t.shape[1] != width:
            raise ShapeError(f"concat_rows: widths {[t.shape for t in tensors]}")
    offsets = np.cumsum([0] + [t.shape[0] for t in tensors])

    def build(result):
        def step():
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    t._accumulate(result.grad[lo:hi])
        return step

    return _simple_op(tape, np.concatenate([t.data for t in tensors], axis=0),
                      tuple(tensors), build)


def slice_rows(tape: Tape, a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2 or not (0 <= start <= stop <= a.shape[0]):
        raise ShapeError(f"slice_rows: [{start}:{stop}] of {a.shape}")

    def build(result):
        def step():
            if a.requires_grad:
                g = np.zeros_like(a.data)
                g[start:stop] = result.grad
                a._accumulate(g)
        return step

    return _simple_op(tape, a.data[start:stop].copy(), (a,), build)


def sum_all(tape: Tape, a: Tensor) -> Tensor:
    def build(result):
        def step():
            if a.requires_grad:
                a._accumulate(np.full_like(a.data, float(result.grad)))
        return step

    return _simple_op(tape, np.asarray(a.data.sum()), (a,), build)


def rowwise_affine(tape: Tape, x: Tensor, scale_vec: Tensor, shift_vec: Tensor) -> Tensor:
    """y = x * scale + shift with per-column scale/shift vectors."""
    if x.data.ndim != 2 or scale_vec.shape != (x.shape[1],) or shift_vec.shape != (x.shape[1],):
        raise ShapeError(
            f"rowwise_affine: x {x.shape}, scale {scale_vec.shape}, shift {shift_vec.shape}")

    def build(result):
        def step():
            if x.requires_grad:
                x._accumulate(result.grad * scale_vec.data)
            if scale_vec.requires_grad:
                scale_vec._accumulate((result.grad * x.data).sum(axis=0))
            if shift_vec.requires_grad:
                shift_vec._accumulate(result.grad.sum(axis=0))
        return step

    return _simple_op(tape, x.data * scale_vec.data + shift_vec.data,
                      (x, scale_vec, shift_vec), build)


def batch_norm_train(tape: Tape, x: Tensor, scale_vec: Tensor, shift_vec: Tensor,
                     eps: float = 1e-5):
    """Train-mode batch normalization over the rows of x.

    Returns (y, batch_mean, batch_var); the caller owns the running-stat
    update. Gradients flow through the batch statistics. Rejects
    single-row batches, whose variance is degenerate.
    """
    if x.data.ndim != 2:
        raise ShapeError(f"batch_norm_train: expected matrix, got {x.shape}")
    rows = x.shape[0]
    if rows < 2:
        raise ValueError("batch_norm_train: need at least 2 rows in train mode")
    if scale_vec.shape != (x.shape[1],) or shift_vec.shape != (x.shape[1],):
        raise ShapeError(
            f"batch_norm_train: x {x.shape}, scale {scale_vec.shape}, shift {shift_vec.shape}")

    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std

    def build(result):
        def step():
            g = result.grad
            if shift_vec.requires_grad:
                shift_vec._accumulate(g.sum(axis=0))
            if scale_vec.requires_grad:
                scale_vec._accumulate((g * xhat).sum(axis=0))
            if x.requires_grad:
                gx = g * scale_vec.data
                x._accumulate(inv_std * (
                    gx
                    - gx.mean(axis=0)
                    - xhat * (gx * xhat).mean(axis=0)
                ))
        return step

    y = _simple_op(tape, scale_vec.data * xhat + shift_vec.data,
                   (x, scale_vec, shift_vec), build)
    return y, mu, var


def batch_norm_eval(tape: Tape, x: Tensor, scale_vec: Tensor, shift_vec: Tensor,
                    run_mean: np.ndarray, run_var: np.ndarray, eps: float = 1e-5) -> Tensor:
    """Eval-mode batch normalization using frozen running statistics."""
    inv_std = 1.0 / np.sqrt(run_var + eps)
    centered = rowwise_affine(tape, x,
                              constant(inv_std), constant(-run_mean * inv_std))
    return rowwise_affine(tape, centered, scale_vec, shift_vec)


def dropout(tape: Tape, x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability p, scale the rest by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability out of range: {p}")
    if p == 0.0:
        return x
    keep = rng.random(x.shape) >= p
    factor = keep / (1.0 - p)

    def build(result):
        def step():
            if x.requires_grad:
                x._accumulate(result.grad * factor)
        return step

    return _simple_op(tape, x.data * factor, (x,), build)


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------

def backward(tape: Tape, loss: Tensor) -> None:
    """Replay the tape in reverse, accumulating grads into every tensor
    that requires them. Parameters untouched by the tape keep grad=None
    (read them through `grad_of`, which yields zeros)."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.data)
    for step in reversed(tape._steps):
        step()


def grad_of(t: Tensor) -> np.ndarray:
    return t.grad if t.grad is not None else np.zeros_like(t.data)


def zero_grads(params: dict[str, Tensor]) -> None:
    for t in params.values():
        t.grad = None


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class AdamState:
    """Adam with bias correction; deterministic given the gradient stream."""

    def __init__(self, params: dict[str, Tensor], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One Adam update over named parameters, in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name in sorted(params):
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(params[name].data)
        if g.shape != params[name].data.shape:
            raise ShapeError(f"adam_step: grad {g.shape} vs param {params[name].data.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        params[name].data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def finite_diff_grad(f, params: dict[str, Tensor], h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences (f(p+h) - f(p-h)) / 2h, one coordinate at a time.

    `f` must be a pure scalar function of the current parameter values.
    """
    if h <= 0:
        raise ValueError("finite_diff_grad: h must be positive")
    grads = {}
    for name in sorted(params):
        p = params[name].data
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(f())
            flat[i] = orig - h
            down = float(f())
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray],
                       floor: float = 1e-6) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all coordinates."""
    worst = 0.0
    for name in analytic:
        a = analytic[name]
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)) if a.size else 0.0)
    return worst
