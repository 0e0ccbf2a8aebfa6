"""Dense tensors with reverse-mode automatic differentiation.

Tensors wrap float64 numpy arrays. Operations executed while a
:class:`Tape` is active are recorded in execution order together with a
backward rule; :func:`backward` replays the tape in reverse and
accumulates gradients into ``Tensor.grad``. The tape is rebuilt on every
forward pass, so there is no graph reuse between iterations.

Outside a tape (evaluation mode) every operation is a plain numpy
computation with no recording overhead.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DomainError, ShapeError
from .sparse import SparseMatrix

PROB_FLOOR = 1e-10  # lower clamp applied before taking logs of probabilities


class Tensor:
    """A dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "_src_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._src_tape: "Tape | None" = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    @classmethod
    def zeros(cls, shape, requires_grad: bool = False) -> "Tensor":
        return cls(np.zeros(shape), requires_grad=requires_grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of operations from one forward pass.

    Entries are appended in execution order, which for define-by-run
    execution is automatically a topological order of the graph.
    Usable as a context manager::

        with Tape() as tape:
            loss = ...
        backward(loss, tape)
    """

    def __init__(self):
        self.entries: list[tuple[Tensor, tuple[Tensor, ...], Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _TAPE_STACK.remove(self)

    def __len__(self) -> int:
        return len(self.entries)

    def zero_grad(self) -> None:
        """Clear gradients of every tensor this tape touched."""
        for out, inputs, _ in self.entries:
            out.grad = None
            for t in inputs:
                t.grad = None


_TAPE_STACK: list[Tape] = []


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _tracked(t: Tensor, tape: Tape) -> bool:
    return t.requires_grad or t._src_tape is tape


def _record(out: Tensor, inputs: tuple[Tensor, ...], back: Callable[[np.ndarray], None]) -> Tensor:
    tape = active_tape()
    if tape is not None and any(_tracked(t, tape) for t in inputs):
        out._src_tape = tape
        tape.entries.append((out, inputs, back))
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate gradients of every tracked tensor reachable from ``loss``.

    Gradients accumulate additively across multiple uses of a tensor
    within the tape, and across repeated backward calls; a rerun from the
    same forward state after ``tape.zero_grad()`` reproduces the first
    result exactly.
    """
    if loss.shape != ():
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    _accum(loss, np.array(1.0))
    for out, _inputs, back in reversed(tape.entries):
        if out.grad is None:
            continue  # not on any path to the loss
        back(out.grad)


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")
    out = Tensor(a.data + b.data)
    tape = active_tape()

    def back(g):
        if tape and _tracked(a, tape):
            _accum(a, g)
        if tape and _tracked(b, tape):
            _accum(b, g)

    return _record(out, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")
    out = Tensor(a.data - b.data)
    tape = active_tape()

    def back(g):
        if tape and _tracked(a, tape):
            _accum(a, g)
        if tape and _tracked(b, tape):
            _accum(b, -g)

    return _record(out, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    _require_same_shape(a, b, "mul")
    out = Tensor(a.data * b.data)
    tape = active_tape()

    def back(g):
        if tape and _tracked(a, tape):
            _accum(a, g * b.data)
        if tape and _tracked(b, tape):
            _accum(b, g * a.data)

    return _record(out, (a, b), back)


def neg(x: Tensor) -> Tensor:
    out = Tensor(-x.data)

    def back(g):
        _accum(x, -g)

    return _record(out, (x,), back)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    c = float(c)
    out = Tensor(x.data * c)

    def back(g):
        _accum(x, g * c)

    return _record(out, (x,), back)


def add_scalar(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(x.data + c)

    def back(g):
        _accum(x, g)

    return _record(out, (x,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with backward dA = G Bᵀ, dB = Aᵀ G."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    out = Tensor(a.data @ b.data)
    tape = active_tape()

    def back(g):
        if tape and _tracked(a, tape):
            _accum(a, g @ b.data.T)
        if tape and _tracked(b, tape):
            _accum(b, a.data.T @ g)

    return _record(out, (a, b), back)


def spmm(s: SparseMatrix, d: Tensor) -> Tensor:
    """Sparse-dense product s @ d. The sparse operand is a constant."""
    if d.ndim != 2 or s.n_cols != d.shape[0]:
        raise ShapeError(
            f"spmm: sparse {s.n_rows}x{s.n_cols} incompatible with dense {d.shape}"
        )
    out = Tensor(s.matmul_dense(d.data))

    def back(g):
        _accum(d, s.transpose().matmul_dense(g))

    return _record(out, (d,), back)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a row vector to every row of a matrix (the one allowed broadcast)."""
    if x.ndim != 2 or b.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: shapes {x.shape} and {b.shape} are incompatible")
    out = Tensor(x.data + b.data)
    tape = active_tape()

    def back(g):
        if tape and _tracked(x, tape):
            _accum(x, g)
        if tape and _tracked(b, tape):
            _accum(b, g.sum(axis=0))

    return _record(out, (x, b), back)


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0.0

    def back(g):
        _accum(x, g * mask)

    return _record(out, (x,), back)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    out = Tensor(np.where(x.data > 0.0, x.data, slope * x.data))
    mask = x.data > 0.0

    def back(g):
        _accum(x, g * np.where(mask, 1.0, slope))

    return _record(out, (x,), back)


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    neg_part = alpha * np.expm1(np.minimum(x.data, 0.0))
    out = Tensor(np.where(x.data > 0.0, x.data, neg_part))

    def back(g):
        _accum(x, g * np.where(x.data > 0.0, 1.0, neg_part + alpha))

    return _record(out, (x,), back)


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign to avoid overflow in exp.
    v = np.where(
        x.data >= 0.0,
        1.0 / (1.0 + np.exp(-np.abs(x.data))),
        np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))),
    )
    out = Tensor(v)

    def back(g):
        _accum(x, g * v * (1.0 - v))

    return _record(out, (x,), back)


def exp(x: Tensor) -> Tensor:
    v = np.exp(x.data)
    out = Tensor(v)

    def back(g):
        _accum(x, g * v)

    return _record(out, (x,), back)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise DomainError("log requires strictly positive inputs")
    out = Tensor(np.log(x.data))

    def back(g):
        _accum(x, g / x.data)

    return _record(out, (x,), back)


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); gradient passes only where the input was not clamped."""
    out = Tensor(np.maximum(x.data, floor))
    mask = x.data >= floor

    def back(g):
        _accum(x, g * mask)

    return _record(out, (x,), back)


# ---------------------------------------------------------------------------
# softmax and structured reductions


def _as_tau_column(tau, m: int) -> tuple[np.ndarray, Tensor | None]:
    """Return (column of τ values broadcastable over rows, source tensor or None)."""
    if isinstance(tau, Tensor):
        if tau.shape == ():
            col = tau.data.reshape(1, 1)
        elif tau.shape == (m,):
            col = tau.data.reshape(m, 1)
        else:
            raise ShapeError(f"tau shape {tau.shape} does not match {m} rows")
        return col, tau
    col = np.full((1, 1), float(tau))
    return col, None


def softmax_rows(z: Tensor, tau=1.0) -> Tensor:
    """Row-wise softmax of z/τ with max-subtraction for stability.

    ``tau`` may be a python scalar, a scalar Tensor, or a length-m Tensor
    of per-row temperatures; every entry must be positive. Gradients flow
    into both ``z`` and a tracked ``tau``.
    """
    if z.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {z.shape}")
    m = z.shape[0]
    tau_col, tau_t = _as_tau_column(tau, m)
    if np.any(tau_col <= 0.0):
        raise DomainError("softmax temperature must be positive")
    s = z.data / tau_col
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)
    tape = active_tape()
    inputs = (z, tau_t) if tau_t is not None else (z,)

    def back(g):
        ds = y * (g - (g * y).sum(axis=1, keepdims=True))
        if tape and _tracked(z, tape):
            _accum(z, ds / tau_col)
        if tau_t is not None and tape and _tracked(tau_t, tape):
            dtau = -(ds * z.data).sum(axis=1, keepdims=True) / (tau_col**2)
            _accum(tau_t, dtau.reshape(tau_t.shape))

    return _record(out, inputs, back)


def segment_sum(x: Tensor, segment_ids: Sequence[int], n_segments: int) -> Tensor:
    """Sum rows of x into segments; empty segments yield zero rows."""
    if x.ndim != 2:
        raise ShapeError(f"segment_sum expects a matrix, got shape {x.shape}")
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape != (x.shape[0],):
        raise ShapeError(f"segment_ids length {ids.shape} does not match {x.shape[0]} rows")
    if ids.size and (ids.min() < 0 or ids.max() >= n_segments):
        raise IndexError(f"segment id out of range [0, {n_segments})")
    acc = np.zeros((n_segments, x.shape[1]))
    np.add.at(acc, ids, x.data)
    out = Tensor(acc)

    def back(g):
        _accum(x, g[ids])

    return _record(out, (x,), back)


def segment_softmax(e: Tensor, segment_ids: Sequence[int], n_segments: int) -> Tensor:
    """Softmax of a vector within each segment (stable; segments may be empty)."""
    if e.ndim != 1:
        raise ShapeError(f"segment_softmax expects a vector, got shape {e.shape}")
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape != e.shape:
        raise ShapeError("segment_ids length does not match input length")
    if ids.size and (ids.min() < 0 or ids.max() >= n_segments):
        raise IndexError(f"segment id out of range [0, {n_segments})")
    seg_max = np.full(n_segments, -np.inf)
    np.maximum.at(seg_max, ids, e.data)
    shifted = np.exp(e.data - seg_max[ids])
    denom = np.zeros(n_segments)
    np.add.at(denom, ids, shifted)
    y = shifted / denom[ids]
    out = Tensor(y)

    def back(g):
        seg_dot = np.zeros(n_segments)
        np.add.at(seg_dot, ids, g * y)
        _accum(e, y * (g - seg_dot[ids]))

    return _record(out, (e,), back)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Columns of a followed by columns of b."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: row counts {a.shape} and {b.shape} differ")
    out = Tensor(np.concatenate([a.data, b.data], axis=1))
    p = a.shape[1]
    tape = active_tape()

    def back(g):
        if tape and _tracked(a, tape):
            _accum(a, g[:, :p])
        if tape and _tracked(b, tape):
            _accum(b, g[:, p:])

    return _record(out, (a, b), back)


def gather_rows(x: Tensor, indices) -> Tensor:
    """Select rows (or elements of a vector) by index; backward scatter-adds."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise IndexError(f"row index out of range [0, {x.shape[0]})")
    out = Tensor(x.data[idx])

    def back(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        np.add.at(x.grad, idx, g)

    return _record(out, (x,), back)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def back(g):
        _accum(x, g.reshape(x.shape))

    return _record(out, (x,), back)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum())

    def back(g):
        _accum(x, np.full_like(x.data, float(g)))

    return _record(out, (x,), back)


def sum_rows(x: Tensor) -> Tensor:
    """Row sums of a matrix, returned as a vector."""
    if x.ndim != 2:
        raise ShapeError(f"sum_rows expects a matrix, got shape {x.shape}")
    out = Tensor(x.data.sum(axis=1))

    def back(g):
        _accum(x, np.repeat(g[:, None], x.shape[1], axis=1))

    return _record(out, (x,), back)


def scale_rows(x: Tensor, v: Tensor) -> Tensor:
    """Multiply row i of x by v[i]."""
    if x.ndim != 2 or v.shape != (x.shape[0],):
        raise ShapeError(f"scale_rows: shapes {x.shape} and {v.shape} are incompatible")
    out = Tensor(x.data * v.data[:, None])
    tape = active_tape()

    def back(g):
        if tape and _tracked(x, tape):
            _accum(x, g * v.data[:, None])
        if tape and _tracked(v, tape):
            _accum(v, (g * x.data).sum(axis=1))

    return _record(out, (x, v), back)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p and scale survivors by 1/(1-p).

    Identity in eval mode or at p=0, so inference never depends on the rng.
    """
    if not 0.0 <= p < 1.0:
        raise DomainError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode requires an rng")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * mask)

    def back(g):
        _accum(x, g * mask)

    return _record(out, (x,), back)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Batch normalization over axis 0 with running statistics.

    Training normalizes by batch mean and (biased) variance and updates the
    running statistics in place (unbiased variance, momentum-weighted).
    Eval, and a training batch of a single row, normalize by the running
    statistics instead; the single-row case emits a warning.
    """
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(
            f"batch_norm: x {x.shape}, gamma {gamma.shape}, beta {beta.shape} are incompatible"
        )
    m = x.shape[0]
    use_batch_stats = training and m > 1
    if training and m == 1:
        import warnings

        warnings.warn("batch_norm: batch of size 1 in training, using running stats")
    if use_batch_stats:
        mean = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * x.data.var(axis=0, ddof=1)
    else:
        mean = running_mean.copy()
        var = running_var.copy()
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    out = Tensor(gamma.data * x_hat + beta.data)
    tape = active_tape()

    def back(g):
        if tape and _tracked(gamma, tape):
            _accum(gamma, (g * x_hat).sum(axis=0))
        if tape and _tracked(beta, tape):
            _accum(beta, g.sum(axis=0))
        if tape and _tracked(x, tape):
            if use_batch_stats:
                gx = g * gamma.data
                dx = inv_std / m * (m * gx - gx.sum(axis=0) - x_hat * (gx * x_hat).sum(axis=0))
            else:
                dx = g * gamma.data * inv_std
            _accum(x, dx)

    return _record(out, (x, gamma, beta), back)
