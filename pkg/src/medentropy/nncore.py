"""Dense-matrix reverse-mode autodiff: tape, primitive ops, losses, Adam, grad checker.

Define-by-run engine over float64 numpy arrays. Every value is a 2D Matrix;
vectors are 1xN rows. Ops executed while a Tape is active record a backward
closure onto it; `backward` replays the tape in reverse, accumulating (adding)
gradients into every input, so parameters used several times get the sum of
their contributions. Forward evaluation with no active tape is pure and
allocation-light, which is what inference uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

LOG_FLOOR = 1e-12  # probability floor inside logs; pairs with the 0*log0 := 0 convention


class ShapeError(ValueError):
    """Operand shapes do not admit the requested operation."""


class NonFiniteError(ValueError):
    """A NaN or Inf crossed an op boundary."""


class Matrix:
    """2D float64 value plus an optional gradient buffer of the same shape."""

    __slots__ = ("value", "grad")

    def __init__(self, value) -> None:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"Matrix must be 2D, got shape {arr.shape}")
        if not np.isfinite(arr.sum()):
            raise NonFiniteError("matrix contains NaN or Inf")
        self.value = arr
        self.grad: np.ndarray | None = None

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Matrix(shape={self.value.shape})"


def zeros(rows: int, cols: int) -> Matrix:
    return Matrix(np.zeros((rows, cols)))


# --- tape -------------------------------------------------------------------

_TAPE_STACK: list["Tape"] = []


class Tape:
    """Execution-ordered record of backward closures for one forward pass."""

    def __init__(self) -> None:
        self._ops: list[Callable[[], None]] = []

    def record(self, backward_fn: Callable[[], None]) -> None:
        self._ops.append(backward_fn)

    def __len__(self) -> int:
        return len(self._ops)

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()


def _record(backward_fn: Callable[[], None]) -> None:
    if _TAPE_STACK:
        _TAPE_STACK[-1].record(backward_fn)


def accumulate_grad(m: Matrix, g: np.ndarray) -> None:
    """Add g into m's gradient buffer, allocating it on first touch."""
    if m.grad is None:
        m.grad = np.array(g, dtype=np.float64)
    else:
        m.grad += g


def backward(tape: Tape, loss: Matrix) -> None:
    """Reverse-replay the tape from a scalar loss, accumulating gradients."""
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be a 1x1 scalar, got shape {loss.shape}")
    accumulate_grad(loss, np.ones((1, 1)))
    for fn in reversed(tape._ops):
        fn()


# --- primitive ops ----------------------------------------------------------

def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.cols != b.rows:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = Matrix(a.value @ b.value)

    def back() -> None:
        if out.grad is None:
            return
        g = out.grad
        accumulate_grad(a, g @ b.value.T)
        accumulate_grad(b, a.value.T @ g)

    _record(back)
    return out


def add(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Matrix(a.value + b.value)

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad)
        accumulate_grad(b, out.grad)

    _record(back)
    return out


def sub(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    out = Matrix(a.value - b.value)

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad)
        accumulate_grad(b, -out.grad)

    _record(back)
    return out


def mul(a: Matrix, b: Matrix) -> Matrix:
    """Elementwise product."""
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    out = Matrix(a.value * b.value)

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad * b.value)
        accumulate_grad(b, out.grad * a.value)

    _record(back)
    return out


def affine(a: Matrix, mul_by: float, add_to: float) -> Matrix:
    """Elementwise a*mul_by + add_to with scalar constants."""
    out = Matrix(a.value * mul_by + add_to)

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad * mul_by)

    _record(back)
    return out


def sigmoid(a: Matrix) -> Matrix:
    # evaluate on the non-overflowing branch per sign
    v = a.value
    out_val = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                       np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = Matrix(out_val)

    def back() -> None:
        if out.grad is None:
            return
        s = out.value
        accumulate_grad(a, out.grad * s * (1.0 - s))

    _record(back)
    return out


def tanh(a: Matrix) -> Matrix:
    out = Matrix(np.tanh(a.value))

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad * (1.0 - out.value * out.value))

    _record(back)
    return out


def concat_cols(a: Matrix, b: Matrix) -> Matrix:
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols row mismatch: {a.shape} vs {b.shape}")
    out = Matrix(np.concatenate([a.value, b.value], axis=1))
    na = a.cols

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad[:, :na])
        accumulate_grad(b, out.grad[:, na:])

    _record(back)
    return out


def transpose(a: Matrix) -> Matrix:
    out = Matrix(a.value.T.copy())

    def back() -> None:
        if out.grad is None:
            return
        accumulate_grad(a, out.grad.T)

    _record(back)
    return out


def stack_rows(rows: list[Matrix]) -> Matrix:
    """Stack 1xC rows into an NxC matrix."""
    if not rows:
        raise ShapeError("stack_rows needs at least one row")
    for r in rows:
        if r.rows != 1 or r.cols != rows[0].cols:
            raise ShapeError(f"stack_rows row shape mismatch: {r.shape}")
    out = Matrix(np.concatenate([r.value for r in rows], axis=0))

    def back() -> None:
        if out.grad is None:
            return
        for i, r in enumerate(rows):
            accumulate_grad(r, out.grad[i:i + 1, :])

    _record(back)
    return out


def row_lookup(table: Matrix, index: int) -> Matrix:
    """Embedding lookup: row `index` of the table as a 1xC Matrix."""
    if not 0 <= index < table.rows:
        raise ShapeError(f"row_lookup index {index} out of range for {table.rows} rows")
    out = Matrix(table.value[index:index + 1, :].copy())

    def back() -> None:
        if out.grad is None:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.value)
        table.grad[index, :] += out.grad[0, :]

    _record(back)
    return out


def sum_mats(mats: list[Matrix]) -> Matrix:
    if not mats:
        raise ShapeError("sum_mats needs at least one matrix")
    for m in mats:
        if m.shape != mats[0].shape:
            raise ShapeError(f"sum_mats shape mismatch: {m.shape} vs {mats[0].shape}")
    out = Matrix(sum(m.value for m in mats))

    def back() -> None:
        if out.grad is None:
            return
        for m in mats:
            accumulate_grad(m, out.grad)

    _record(back)
    return out


def softmax_row(a: Matrix) -> Matrix:
    """Row softmax with max-subtraction; output sums to 1 within 1e-12."""
    if a.rows != 1 or a.cols == 0:
        raise ShapeError(f"softmax_row expects a non-empty 1xK row, got {a.shape}")
    z = a.value[0]
    e = np.exp(z - z.max())
    s = e / e.sum()
    out = Matrix(s[None, :])

    def back() -> None:
        if out.grad is None:
            return
        g = out.grad[0]
        sv = out.value[0]
        accumulate_grad(a, (sv * (g - float(g @ sv)))[None, :])

    _record(back)
    return out


def cross_entropy(dist: Matrix, target_index: int) -> Matrix:
    """Negative log-likelihood -ln(dist[target] + floor) as a 1x1 scalar.

    Composed with softmax_row, the logit gradient works out to dist - onehot.
    """
    if dist.rows != 1:
        raise ShapeError(f"cross_entropy expects a 1xK distribution, got {dist.shape}")
    if not 0 <= target_index < dist.cols:
        raise ShapeError(f"target index {target_index} out of range for {dist.cols} classes")
    p = dist.value[0, target_index] + LOG_FLOOR
    out = Matrix([[-math.log(p)]])

    def back() -> None:
        if out.grad is None:
            return
        g = np.zeros_like(dist.value)
        g[0, target_index] = -out.grad[0, 0] / p
        accumulate_grad(dist, g)

    _record(back)
    return out


# --- parameters and optimizer -----------------------------------------------

@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


class Parameter:
    """Named trainable Matrix with a persistent gradient buffer and Adam state."""

    __slots__ = ("name", "mat", "m", "v", "step")

    def __init__(self, name: str, value) -> None:
        self.name = name
        self.mat = Matrix(value)
        self.mat.grad = np.zeros_like(self.mat.value)
        self.m = np.zeros_like(self.mat.value)
        self.v = np.zeros_like(self.mat.value)
        self.step = 0

    @property
    def value(self) -> np.ndarray:
        return self.mat.value

    @property
    def grad(self) -> np.ndarray:
        return self.mat.grad

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.mat.shape})"


def adam_step(params: Iterable[Parameter], hyper: AdamHyper) -> None:
    """Bias-corrected Adam update in place; gradients are zeroed afterwards."""
    for p in params:
        p.step += 1
        g = p.mat.grad
        p.m = hyper.beta1 * p.m + (1.0 - hyper.beta1) * g
        p.v = hyper.beta2 * p.v + (1.0 - hyper.beta2) * (g * g)
        m_hat = p.m / (1.0 - hyper.beta1 ** p.step)
        v_hat = p.v / (1.0 - hyper.beta2 ** p.step)
        p.mat.value -= hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.epsilon)
        g[...] = 0.0


# --- finite-difference gradient checker --------------------------------------

def grad_check(loss_fn: Callable[[], Matrix], params: list[Parameter],
               h: float = 1e-5, max_samples: int = 200, seed: int = 0) -> float:
    """Max relative error between tape gradients and central finite differences.

    Checks every scalar parameter, or a seeded random subsample of
    `max_samples` when there are more. Per-scalar error is
    |analytic - numeric| / max(|analytic|, |numeric|, ginf) where ginf is the
    infinity norm of the whole analytic gradient: components far below the
    gradient's own scale are measured against that scale instead of amplifying
    finite-difference round-off.
    """
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    for p in params:
        p.mat.grad[...] = 0.0
    with Tape() as tape:
        loss = loss_fn()
    if not np.isfinite(loss.value).all():
        raise NonFiniteError("loss is not finite")
    backward(tape, loss)
    analytic = [p.mat.grad.copy() for p in params]
    for p in params:
        p.mat.grad[...] = 0.0

    ginf = max(float(np.abs(a).max()) for a in analytic)
    if ginf == 0.0:
        ginf = 1.0
    coords = [(i, r, c)
              for i, p in enumerate(params)
              for r in range(p.mat.rows)
              for c in range(p.mat.cols)]
    if len(coords) > max_samples:
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(coords), size=max_samples, replace=False)
        coords = [coords[int(k)] for k in picked]

    worst = 0.0
    for i, r, c in coords:
        w = params[i].mat.value
        orig = w[r, c]
        w[r, c] = orig + h
        up = float(loss_fn().value[0, 0])
        w[r, c] = orig - h
        down = float(loss_fn().value[0, 0])
        w[r, c] = orig
        numeric = (up - down) / (2.0 * h)
        a = float(analytic[i][r, c])
        err = abs(a - numeric) / max(abs(a), abs(numeric), ginf)
        worst = max(worst, err)
    return worst
