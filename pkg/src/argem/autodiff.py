"""A small define-by-run reverse-mode tape over float64 numpy arrays.

Only the operations the graph autoencoders need are provided. Every op
records its output together with a vector-Jacobian product; ``Tape.backward``
replays the records in reverse order of recording.

    tape = Tape()
    w = tape.var(np.ones((4, 3)), name="w")
    loss = mean(sigmoid(x @ w))
    tape.backward(loss)
    w.grad
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


class ContractError(ValueError):
    pass


class Var:
    """A value recorded on a :class:`Tape`."""

    __slots__ = ("value", "grad", "tape", "name", "__weakref__")
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", value: np.ndarray, name: str | None = None):
        self.tape = tape
        self.value = value
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var({self.name or '?'}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(self.tape, other)))

    def __rsub__(self, other):
        return add(_lift(self.tape, other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(_lift(self.tape, other), self)

    @property
    def T(self):
        return transpose(self)


@dataclass
class _Record:
    op: str
    out: Var
    parents: tuple
    vjp: Callable


class Tape:
    def __init__(self):
        self.records: list[_Record] = []
        self.leaves: list[Var] = []

    def var(self, value, name: str | None = None) -> Var:
        v = Var(self, np.asarray(value, dtype=np.float64), name)
        self.leaves.append(v)
        return v

    constant = var

    def record(self, op: str, value: np.ndarray, parents: tuple, vjp: Callable) -> Var:
        if not np.isfinite(value).all():
            raise NumericError(f"non-finite output in {op}")
        out = Var(self, value, op)
        self.records.append(_Record(op, out, parents, vjp))
        return out

    def backward(self, loss: Var) -> None:
        """Fill ``.grad`` of every var on this tape with d(loss)/d(var)."""
        if loss.tape is not self:
            raise ContractError("loss was recorded on a different tape")
        if loss.value.size != 1:
            raise ContractError(f"loss must be a scalar, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.out), None)
            rec.out.grad = np.zeros_like(rec.out.value) if g is None else g
            if g is None:
                continue
            for parent, pg in zip(rec.parents, rec.vjp(g)):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for leaf in self.leaves:
            g = grads.get(id(leaf))
            leaf.grad = np.zeros_like(leaf.value) if g is None else g


def _lift(tape: Tape, x) -> Var:
    if isinstance(x, Var):
        return x
    return tape.constant(np.asarray(x, dtype=np.float64))


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise ContractError("at least one operand must be a Var")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return tape.record(
        "add", a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb))
    )


def neg(a: Var) -> Var:
    return a.tape.record("neg", -a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Var:
    """Elementwise (Hadamard) product, broadcasting scalars and row vectors."""
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    _check_broadcast("mul", a, b)
    av, bv = a.value, b.value
    return tape.record(
        "mul", av * bv, (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


hadamard = mul


def matmul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    return tape.record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def spmm(p: sp.spmatrix, z: Var) -> Var:
    """Sparse (constant) times dense product; gradient w.r.t. ``z`` is ``P^T G``."""
    if p.shape[1] != z.shape[0]:
        raise ShapeError(f"spmm: cannot multiply sparse {p.shape} by {z.shape}")
    p = p if sp.isspmatrix_csr(p) else sp.csr_matrix(p)
    return z.tape.record("spmm", np.asarray(p @ z.value), (z,), lambda g: (np.asarray(p.T.tocsr() @ g),))


def transpose(a: Var) -> Var:
    return a.tape.record("transpose", a.value.T, (a,), lambda g: (g.T,))


def relu(a: Var) -> Var:
    mask = a.value > 0
    return a.tape.record("relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """``1/(1+exp(-x))`` for ``x >= 0`` and ``exp(x)/(1+exp(x))`` otherwise.

    The second branch keeps far-negative inputs positive (subnormal) instead of
    rounding ``1/(1+inf)`` to zero.
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Var) -> Var:
    s = stable_sigmoid(a.value)
    return a.tape.record("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def log_sigmoid(a: Var) -> Var:
    """``log(sigmoid(x))`` evaluated as ``-softplus(-x)``; finite for any finite x."""
    x = a.value
    return a.tape.record("log_sigmoid", -np.logaddexp(0.0, -x), (a,), lambda g: (g * expit(-x),))


def exp(a: Var) -> Var:
    with np.errstate(over="ignore"):
        e = np.exp(a.value)
    return a.tape.record("exp", e, (a,), lambda g: (g * e,))


def square(a: Var) -> Var:
    x = a.value
    return a.tape.record("square", x * x, (a,), lambda g: (2.0 * g * x,))


def clip(a: Var, lo: float, hi: float) -> Var:
    x = a.value
    inside = (x >= lo) & (x <= hi)
    return a.tape.record("clip", np.clip(x, lo, hi), (a,), lambda g: (g * inside,))


def take_rows(a: Var, idx) -> Var:
    idx = np.asarray(idx, dtype=np.int64)
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return a.tape.record("take_rows", a.value[idx], (a,), vjp)


def sum(a: Var) -> Var:  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return a.tape.record("sum", np.asarray(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a: Var) -> Var:
    shape, size = a.shape, a.value.size
    return a.tape.record(
        "mean", np.asarray(a.value.mean()), (a,), lambda g: (np.full(shape, float(g) / size),)
    )


def bce_with_logits(logits: Var, targets: np.ndarray) -> Var:
    """Mean sigmoid cross-entropy of ``logits`` against dense 0/1 ``targets``."""
    x = logits.value
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != x.shape:
        raise ShapeError(f"bce_with_logits: logits {x.shape} vs targets {y.shape}")
    size = x.size
    dense, sig = _softplus_sum_and_sigmoid(x)
    value = (dense - float(np.vdot(y, x))) / size

    def vjp(g):
        grad = sig - y
        grad *= float(g) / size
        return (grad,)

    return logits.tape.record("bce_with_logits", np.asarray(value), (logits,), vjp)


def _softplus_sum_and_sigmoid(x: np.ndarray) -> tuple[float, np.ndarray]:
    """``sum(softplus(x))`` and ``sigmoid(x)`` from one shared ``exp(-|x|)``."""
    e = np.abs(x)
    # sum(max(x, 0)) == (sum(x) + sum(|x|)) / 2
    total = 0.5 * (float(x.sum()) + float(e.sum()))
    np.negative(e, out=e)
    np.exp(e, out=e)
    total += float(np.log1p(e).sum())
    r = e + 1.0
    np.reciprocal(r, out=r)
    e *= r
    return total, np.where(x >= 0, r, e)


def weighted_bce_with_logits(logits: Var, rows, cols, pos_weight: float, norm: float) -> Var:
    """``norm * mean(pos_weight*y*softplus(-x) + (1-y)*softplus(x))`` over all entries.

    ``y`` is 1 exactly at ``(rows[k], cols[k])`` and 0 elsewhere. The dense part
    is ``softplus(x)`` everywhere; the positive entries only add a sparse
    correction, so the target never has to be materialised.
    """
    x = logits.value
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    scale = norm / x.size
    xp = x[rows, cols]
    dense, sig = _softplus_sum_and_sigmoid(x)
    corr = ((pos_weight - 1.0) * np.logaddexp(0.0, -xp) - xp).sum()

    def vjp(g):
        c = float(g) * scale
        grad = sig * c
        np.add.at(grad, (rows, cols), c * (-(pos_weight - 1.0) * expit(-xp) - 1.0))
        return (grad,)

    return logits.tape.record("weighted_bce_with_logits", np.asarray(scale * (dense + corr)), (logits,), vjp)


def inner_product_bce(z: Var, rows, cols, pos_weight: float, norm: float, block: int = 512) -> Var:
    """Same value as ``weighted_bce_with_logits(z @ z.T, ...)`` without the n x n logits.

    ``z z^T`` is symmetric, so only upper row-blocks are formed; the dense part
    of the gradient is ``2 G z`` with ``G`` the symmetric per-entry derivative.
    The positive set ``(rows, cols)`` may be any list of ordered pairs.
    """
    zv = z.value
    n = zv.shape[0]
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    scale = norm / (n * n)
    dense = 0.0
    sigmas = []
    for s in range(0, n, block):
        e = min(s + block, n)
        x = zv[s:e] @ zv[s:].T
        diag_total, sig = _softplus_sum_and_sigmoid(x[:, : e - s])
        off_total, sig_off = _softplus_sum_and_sigmoid(x[:, e - s:])
        dense += diag_total + 2.0 * off_total
        sigmas.append((s, e, sig, sig_off))
    xp = np.einsum("ij,ij->i", zv[rows], zv[cols])
    corr = ((pos_weight - 1.0) * np.logaddexp(0.0, -xp) - xp).sum()

    def vjp(g):
        c = float(g) * scale
        grad = np.zeros_like(zv)
        for s, e, sig, sig_off in sigmas:
            grad[s:e] += 2.0 * (sig @ zv[s:e])
            if e < n:
                grad[s:e] += 2.0 * (sig_off @ zv[e:])
                grad[e:] += 2.0 * (sig_off.T @ zv[s:e])
        grad *= c
        coef = c * (-(pos_weight - 1.0) * expit(-xp) - 1.0)
        np.add.at(grad, rows, coef[:, None] * zv[cols])
        np.add.at(grad, cols, coef[:, None] * zv[rows])
        return (grad,)

    return z.tape.record("inner_product_bce", np.asarray(scale * (dense + corr)), (z,), vjp)


# -- initialisation and randomness -----------------------------------------

def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


# -- finite-difference checking --------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: dict = field(default_factory=dict)
    tol: float = 1e-4
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and all(e < self.tol for e in self.max_rel_error.values())

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def check_gradients(
    f: Callable[[Tape, Mapping[str, Var]], Var],
    params: Mapping[str, np.ndarray],
    step: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare tape gradients of ``f`` with central differences.

    ``f(tape, vars)`` must build a scalar on ``tape`` from the leaves in ``vars``.
    The relative error of an entry is ``|g - fd| / max(|g|, |fd|, floor)``, so
    entries whose gradient is below ``floor`` are effectively compared in
    absolute terms.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    report = GradCheckReport(tol=tol)

    def evaluate(values):
        tape = Tape()
        vs = {k: tape.var(v, name=k) for k, v in values.items()}
        return tape, vs, f(tape, vs)

    try:
        tape, vs, loss = evaluate(params)
        tape.backward(loss)
    except (NumericError, FloatingPointError) as exc:
        report.failures.append(f"base evaluation: {exc}")
        return report
    for name, base in params.items():
        analytic = vs[name].grad
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            vals = []
            for sign in (1.0, -1.0):
                trial = dict(params)
                pert = base.copy()
                pert[idx] += sign * step
                trial[name] = pert
                try:
                    vals.append(float(evaluate(trial)[2].value))
                except (NumericError, FloatingPointError) as exc:
                    report.failures.append(f"{name}{idx}: {exc}")
                    vals.append(np.nan)
            numeric[idx] = (vals[0] - vals[1]) / (2.0 * step)
        if not np.isfinite(numeric).all():
            report.failures.append(f"{name}: non-finite finite difference")
            report.max_rel_error[name] = np.inf
            continue
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
        report.max_rel_error[name] = float((np.abs(analytic - numeric) / denom).max(initial=0.0))
    return report
