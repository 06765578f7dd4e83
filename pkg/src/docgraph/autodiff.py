"""Dense-tensor computation with reverse-mode differentiation and Adam.

Everything numeric in this package runs through the small op set defined
here: 64-bit float tensors (1-D or 2-D), a tape that records executed ops
in order, a reverse pass that accumulates gradients, and the Adam update.

Design rules:

* ops compute with numpy but the tape, every backward rule, and the
  optimizer are implemented here;
* an op records onto the active tape (see :class:`Tape`) only when one
  is active, so evaluation-time forwards carry no graph overhead;
* gradients accumulate into ``Tensor.grad``; zeroing between steps is
  the caller's job;
* no broadcasting beyond adding/multiplying a 1-by-n (or flat n) row
  against an m-by-n matrix, which keeps every backward rule explicit.

Backward rules live in the module-level ``BACKWARD_RULES`` registry keyed
by op name, which also lets the gradient self-check suite inject a broken
rule as a negative control.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "Tensor",
    "Tape",
    "TapeEntry",
    "AdamState",
    "BACKWARD_RULES",
    "OP_NAMES",
    "matmul",
    "add",
    "sub",
    "mul",
    "sigmoid",
    "tanh",
    "leaky_relu",
    "exp",
    "log",
    "softmax_rows",
    "max_over_rows",
    "concat_cols",
    "concat_rows",
    "cross_entropy_logits",
    "gather_rows",
    "transpose",
    "reshape",
    "slice_rows",
    "pad_rows",
    "scale",
    "sum_all",
    "backward",
    "zero_grads",
    "adam_step",
]


class Tensor:
    """A 1-D or 2-D array of 64-bit floats, optionally carrying a gradient.

    ``requires_grad`` marks leaf parameters; intermediate results receive
    transient ``grad`` buffers during :func:`backward` regardless of the
    flag. Values supplied from outside must be finite.
    """

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim not in (1, 2):
            raise ShapeError(f"tensors are 1-D or 2-D, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor values must be finite")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Fast path for op outputs: skips the finite check on the hot loop.
        t = cls.__new__(cls)
        t.values = arr
        t.requires_grad = False
        t.grad = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


@dataclass
class TapeEntry:
    """One executed op: inputs, output, and whatever backward needs."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    ctx: dict


_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "docgraph_active_tape", default=None
)


class Tape:
    """Ordered record of executed ops, in execution (topological) order.

    Use as a context manager around a forward pass; ops executed inside
    the ``with`` block are recorded. A tape and its tensors are owned by
    one forward/backward pass; distinct tapes may run in parallel because
    activation is tracked per execution context.
    """

    def __init__(self):
        self.entries: list[TapeEntry] = []

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _ACTIVE_TAPE.reset(self._token)
        return False

    def __len__(self) -> int:
        return len(self.entries)


def _record(op: str, inputs: tuple[Tensor, ...], output: Tensor, **ctx) -> Tensor:
    tape = _ACTIVE_TAPE.get()
    if tape is not None:
        tape.entries.append(TapeEntry(op, inputs, output, ctx))
    return output


BACKWARD_RULES: dict[str, Callable[[TapeEntry], tuple]] = {}


def _rule(name: str):
    def register(fn):
        BACKWARD_RULES[name] = fn
        return fn

    return register


# ---------------------------------------------------------------------------
# matmul

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors; c[i,j] = sum_k a[i,k] b[k,j]."""
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError("matmul requires 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = Tensor._wrap(a.values @ b.values)
    return _record("matmul", (a, b), out)


@_rule("matmul")
def _matmul_bwd(e: TapeEntry):
    a, b = e.inputs
    g = e.output.grad
    return g @ b.values.T, a.values.T @ g


# ---------------------------------------------------------------------------
# elementwise binary ops (equal shapes, plus row-broadcast of a 1-by-n bias)

def _check_binary(a: Tensor, b: Tensor) -> bool:
    """Validate shapes; returns True when b row-broadcasts over a."""
    if a.shape == b.shape:
        return False
    if a.values.ndim == 2 and b.shape in ((a.shape[1],), (1, a.shape[1])):
        return True
    raise ShapeError(f"incompatible shapes for elementwise op: {a.shape} vs {b.shape}")


def _broadcast_grad(b: Tensor, g: np.ndarray) -> np.ndarray:
    return g.sum(axis=0).reshape(b.shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    bcast = _check_binary(a, b)
    out = Tensor._wrap(a.values + b.values)
    return _record("add", (a, b), out, bcast=bcast)


@_rule("add")
def _add_bwd(e: TapeEntry):
    _, b = e.inputs
    g = e.output.grad
    return g, _broadcast_grad(b, g) if e.ctx["bcast"] else g


def sub(a: Tensor, b: Tensor) -> Tensor:
    bcast = _check_binary(a, b)
    out = Tensor._wrap(a.values - b.values)
    return _record("sub", (a, b), out, bcast=bcast)


@_rule("sub")
def _sub_bwd(e: TapeEntry):
    _, b = e.inputs
    g = e.output.grad
    return g, _broadcast_grad(b, -g) if e.ctx["bcast"] else -g


def mul(a: Tensor, b: Tensor) -> Tensor:
    bcast = _check_binary(a, b)
    out = Tensor._wrap(a.values * b.values)
    return _record("mul", (a, b), out, bcast=bcast)


@_rule("mul")
def _mul_bwd(e: TapeEntry):
    a, b = e.inputs
    g = e.output.grad
    db = g * a.values
    return g * b.values, _broadcast_grad(b, db) if e.ctx["bcast"] else db


# ---------------------------------------------------------------------------
# elementwise unary ops

def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    out_v = np.empty_like(v)
    pos = v >= 0
    out_v[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out_v[~pos] = ev / (1.0 + ev)
    out = Tensor._wrap(out_v)
    return _record("sigmoid", (x,), out)


@_rule("sigmoid")
def _sigmoid_bwd(e: TapeEntry):
    y = e.output.values
    return (e.output.grad * y * (1.0 - y),)


def tanh(x: Tensor) -> Tensor:
    out = Tensor._wrap(np.tanh(x.values))
    return _record("tanh", (x,), out)


@_rule("tanh")
def _tanh_bwd(e: TapeEntry):
    y = e.output.values
    return (e.output.grad * (1.0 - y * y),)


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    v = x.values
    out = Tensor._wrap(np.where(v > 0, v, slope * v))
    return _record("leaky_relu", (x,), out, slope=slope)


@_rule("leaky_relu")
def _leaky_relu_bwd(e: TapeEntry):
    # Derivative at exactly 0 is defined as the slope.
    x = e.inputs[0].values
    slope = e.ctx["slope"]
    return (e.output.grad * np.where(x > 0, 1.0, slope),)


def exp(x: Tensor) -> Tensor:
    out = Tensor._wrap(np.exp(x.values))
    return _record("exp", (x,), out)


@_rule("exp")
def _exp_bwd(e: TapeEntry):
    return (e.output.grad * e.output.values,)


def log(x: Tensor) -> Tensor:
    if np.any(x.values <= 0):
        raise NumericError("log requires strictly positive values")
    out = Tensor._wrap(np.log(x.values))
    return _record("log", (x,), out)


@_rule("log")
def _log_bwd(e: TapeEntry):
    return (e.output.grad / e.inputs[0].values,)


# ---------------------------------------------------------------------------
# softmax over rows with optional boolean mask

def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax with max-subtraction; masked entries are exactly 0.

    ``mask`` is a boolean array of x's shape (True = keep). Every row must
    keep at least one entry.
    """
    if x.values.ndim != 2:
        raise ShapeError("softmax_rows requires a 2-D tensor")
    v = x.values
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != v.shape:
            raise ShapeError("mask shape must match input shape")
        if not mask.any(axis=1).all():
            raise NumericError("softmax row is fully masked")
        shifted = np.where(mask, v, -np.inf)
        shifted = shifted - shifted.max(axis=1, keepdims=True)
        ev = np.exp(shifted, where=mask, out=np.zeros_like(v))
    else:
        shifted = v - v.max(axis=1, keepdims=True)
        ev = np.exp(shifted)
    out_v = ev / ev.sum(axis=1, keepdims=True)
    out = Tensor._wrap(out_v)
    return _record("softmax_rows", (x,), out)


@_rule("softmax_rows")
def _softmax_rows_bwd(e: TapeEntry):
    # dx_j = y_j * (g_j - sum_k g_k y_k); masked entries have y = 0.
    y = e.output.values
    g = e.output.grad
    dot = (g * y).sum(axis=1, keepdims=True)
    return (y * (g - dot),)


# ---------------------------------------------------------------------------
# pooling / structural ops

def max_over_rows(x: Tensor) -> Tensor:
    """Column-wise maximum of a 2-D tensor; gradient goes to the argmax row
    per column (lowest index on ties)."""
    if x.values.ndim != 2:
        raise ShapeError("max_over_rows requires a 2-D tensor")
    if x.shape[0] < 1:
        raise ShapeError("max_over_rows requires at least one row")
    argmax = np.argmax(x.values, axis=0)  # first occurrence wins ties
    out = Tensor._wrap(x.values[argmax, np.arange(x.shape[1])])
    return _record("max_over_rows", (x,), out, argmax=argmax)


@_rule("max_over_rows")
def _max_over_rows_bwd(e: TapeEntry):
    x = e.inputs[0]
    g = e.output.grad
    dx = np.zeros_like(x.values)
    dx[e.ctx["argmax"], np.arange(x.shape[1])] = g
    return (dx,)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Column-wise concatenation of 2-D tensors with equal row counts."""
    if not parts:
        raise ShapeError("concat_cols requires at least one part")
    rows = parts[0].shape[0]
    for p in parts:
        if p.values.ndim != 2 or p.shape[0] != rows:
            raise ShapeError("concat_cols parts must be 2-D with equal row counts")
    out = Tensor._wrap(np.concatenate([p.values for p in parts], axis=1))
    widths = [p.shape[1] for p in parts]
    return _record("concat_cols", tuple(parts), out, widths=widths)


@_rule("concat_cols")
def _concat_cols_bwd(e: TapeEntry):
    g = e.output.grad
    grads = []
    start = 0
    for w in e.ctx["widths"]:
        grads.append(g[:, start : start + w])
        start += w
    return tuple(grads)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Row-wise concatenation of 2-D tensors with equal column counts."""
    if not parts:
        raise ShapeError("concat_rows requires at least one part")
    cols = parts[0].shape[1] if parts[0].values.ndim == 2 else None
    for p in parts:
        if p.values.ndim != 2 or p.shape[1] != cols:
            raise ShapeError("concat_rows parts must be 2-D with equal column counts")
    out = Tensor._wrap(np.concatenate([p.values for p in parts], axis=0))
    heights = [p.shape[0] for p in parts]
    return _record("concat_rows", tuple(parts), out, heights=heights)


@_rule("concat_rows")
def _concat_rows_bwd(e: TapeEntry):
    g = e.output.grad
    grads = []
    start = 0
    for h in e.ctx["heights"]:
        grads.append(g[start : start + h, :])
        start += h
    return tuple(grads)


def gather_rows(matrix: Tensor, ids: Sequence[int]) -> Tensor:
    """Select rows of a 2-D tensor by index; repeated ids sum gradients."""
    if matrix.values.ndim != 2:
        raise ShapeError("gather_rows requires a 2-D tensor")
    idx = np.asarray(list(ids), dtype=np.intp)
    if idx.size == 0:
        raise ShapeError("gather_rows requires at least one index")
    if idx.min() < 0 or idx.max() >= matrix.shape[0]:
        raise ShapeError(
            f"row index out of range: max id {int(idx.max())} for {matrix.shape[0]} rows"
        )
    out = Tensor._wrap(matrix.values[idx])
    return _record("gather_rows", (matrix,), out, ids=idx)


@_rule("gather_rows")
def _gather_rows_bwd(e: TapeEntry):
    dm = np.zeros_like(e.inputs[0].values)
    np.add.at(dm, e.ctx["ids"], e.output.grad)
    return (dm,)


def transpose(x: Tensor) -> Tensor:
    if x.values.ndim != 2:
        raise ShapeError("transpose requires a 2-D tensor")
    out = Tensor._wrap(x.values.T.copy())
    return _record("transpose", (x,), out)


@_rule("transpose")
def _transpose_bwd(e: TapeEntry):
    return (e.output.grad.T,)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if len(shape) not in (1, 2):
        raise ShapeError("reshape target must be 1-D or 2-D")
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}")
    out = Tensor._wrap(x.values.reshape(shape))
    return _record("reshape", (x,), out, shape=x.shape)


@_rule("reshape")
def _reshape_bwd(e: TapeEntry):
    return (e.output.grad.reshape(e.ctx["shape"]),)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice (element slice for 1-D tensors)."""
    n = x.shape[0]
    if not (0 <= start < stop <= n):
        raise ShapeError(f"invalid slice [{start}:{stop}] of {n} rows")
    out = Tensor._wrap(x.values[start:stop].copy())
    return _record("slice_rows", (x,), out, start=start, stop=stop)


@_rule("slice_rows")
def _slice_rows_bwd(e: TapeEntry):
    dx = np.zeros_like(e.inputs[0].values)
    dx[e.ctx["start"] : e.ctx["stop"]] = e.output.grad
    return (dx,)


def pad_rows(x: Tensor, before: int, after: int) -> Tensor:
    """Prepend/append zero rows to a 2-D tensor."""
    if x.values.ndim != 2:
        raise ShapeError("pad_rows requires a 2-D tensor")
    if before < 0 or after < 0:
        raise ShapeError("pad counts must be non-negative")
    out_v = np.zeros((x.shape[0] + before + after, x.shape[1]))
    out_v[before : before + x.shape[0]] = x.values
    out = Tensor._wrap(out_v)
    return _record("pad_rows", (x,), out, before=before, rows=x.shape[0])


@_rule("pad_rows")
def _pad_rows_bwd(e: TapeEntry):
    b, r = e.ctx["before"], e.ctx["rows"]
    return (e.output.grad[b : b + r],)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a Python float constant."""
    out = Tensor._wrap(x.values * c)
    return _record("scale", (x,), out, c=c)


@_rule("scale")
def _scale_bwd(e: TapeEntry):
    return (e.output.grad * e.ctx["c"],)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all entries, as a length-1 tensor."""
    out = Tensor._wrap(np.array([x.values.sum()]))
    return _record("sum_all", (x,), out)


@_rule("sum_all")
def _sum_all_bwd(e: TapeEntry):
    return (np.full_like(e.inputs[0].values, e.output.grad[0]),)


# ---------------------------------------------------------------------------
# classification loss

def cross_entropy_logits(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label], computed stably; returns a scalar tensor."""
    if logits.values.ndim != 1:
        raise ShapeError("cross_entropy_logits requires a 1-D logits tensor")
    c = logits.shape[0]
    if not (0 <= label < c):
        raise ShapeError(f"label {label} out of range for {c} classes")
    v = logits.values
    m = v.max()
    lse = m + np.log(np.exp(v - m).sum())
    out = Tensor._wrap(np.array([lse - v[label]]))
    return _record("cross_entropy_logits", (logits,), out, label=label)


@_rule("cross_entropy_logits")
def _cross_entropy_bwd(e: TapeEntry):
    v = e.inputs[0].values
    m = v.max()
    ev = np.exp(v - m)
    p = ev / ev.sum()
    p[e.ctx["label"]] -= 1.0
    return (p * e.output.grad[0],)


# Every differentiable op, for the gradient self-check suite.
OP_NAMES: tuple[str, ...] = tuple(sorted(BACKWARD_RULES))


# ---------------------------------------------------------------------------
# reverse pass

def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) for every tensor reachable from ``loss``.

    The tape is walked once in reverse execution order; entries whose
    output received no gradient are skipped. Gradients add into existing
    ``grad`` buffers; callers zero parameters between optimizer steps.
    """
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss.grad is None:
        loss.grad = np.ones_like(loss.values)
    else:
        loss.grad = loss.grad + np.ones_like(loss.values)
    for entry in reversed(tape.entries):
        if entry.output.grad is None:
            continue
        grads = BACKWARD_RULES[entry.op](entry)
        for t, g in zip(entry.inputs, grads):
            if g is None:
                continue
            if t.grad is None:
                t.grad = np.array(g)
            else:
                t.grad = t.grad + g


def zero_grads(params: dict[str, Tensor]) -> None:
    for t in params.values():
        t.zero_grad()


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    """Per-parameter Adam moments plus the shared step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, Tensor], lr: float = 0.001) -> "AdamState":
        state = cls(lr=lr)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        return state


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> None:
    """One Adam update with bias correction over every named parameter.

    Aborts before touching any parameter if a gradient is non-finite or
    mis-shaped, so a failed step leaves the model unchanged.
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise NumericError(f"missing gradient for parameter '{name}'")
        if g.shape != p.values.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape "
                             f"{p.values.shape} for '{name}'")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.values = p.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
