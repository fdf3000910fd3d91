"""Reverse-mode automatic differentiation over numpy arrays.

The engine records every primitive op on a tape and replays it backward to
obtain d(scalar)/d(parameter).  Forward computations elsewhere in the package
(jet propagation, quadrature losses, layer-bound factors) are written in terms
of these primitives, so one reverse pass differentiates all of them, including
losses that depend on input-derivatives of the network.

Everything is float64.  Constants (numpy arrays, python scalars) mix freely
with traced variables; only values reachable from registered parameters get
gradients.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray


class NonFiniteError(FloatingPointError):
    """A public operation produced NaN or Inf."""


class DegenerateLayerError(ValueError):
    """A weight matrix is numerically rank-zero where the math needs it."""


def as_tensor(x, shape=None) -> Tensor:
    """Coerce to a float64 C-contiguous array, rejecting non-finite entries."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"expected shape {tuple(shape)}, got {arr.shape}")
    check_finite(arr, "as_tensor input")
    return arr


def check_finite(arr: Tensor, what: str) -> Tensor:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")
    return arr


def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Sum a broadcast gradient back down to the parent's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return np.reshape(g, shape)


class _Node:
    __slots__ = ("parents", "vjps")

    def __init__(self, parents, vjps):
        self.parents = parents
        self.vjps = vjps


class Var:
    """A traced array. Build math with the ops below; read .value freely."""

    __slots__ = ("value", "tape", "idx")

    def __init__(self, value: Tensor, tape: "GradTape", idx: int):
        self.value = value
        self.tape = tape
        self.idx = idx

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return getitem(self, key)


class GradTape:
    """Append-only record of a computation, replayable for gradients.

    Parameters are registered with .param(); their gradients come back from
    loss_param_grad() in registration order.  Node order is fixed by
    construction, so accumulation order (and hence bit pattern) is identical
    across replays.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._params: list[Var] = []

    def _record(self, value: Tensor, parents=(), vjps=()) -> Var:
        self._nodes.append(_Node(tuple(p.idx for p in parents), tuple(vjps)))
        return Var(np.asarray(value, dtype=np.float64), self, len(self._nodes) - 1)

    def param(self, value) -> Var:
        v = self._record(as_tensor(value))
        self._params.append(v)
        return v

    def constant(self, value) -> Var:
        """A traced leaf that accumulates no parameter gradient."""
        return self._record(np.asarray(value, dtype=np.float64))

    @property
    def params(self) -> list[Var]:
        return list(self._params)

    def gradients(self, loss: Var) -> list[Tensor]:
        """Per-parameter gradients of a scalar, in registration order."""
        if loss.tape is not self:
            raise ValueError("loss was recorded on a different tape")
        if loss.value.shape != ():
            raise ValueError("tape is not scalar-terminated: loss has shape "
                             f"{loss.value.shape}")
        check_finite(loss.value, "loss value")
        grads: list[Tensor | None] = [None] * (loss.idx + 1)
        grads[loss.idx] = np.ones(())
        for i in range(loss.idx, -1, -1):
            g = grads[i]
            if g is None:
                continue
            node = self._nodes[i]
            for pidx, vjp in zip(node.parents, node.vjps):
                contrib = vjp(g)
                if grads[pidx] is None:
                    grads[pidx] = contrib
                else:
                    grads[pidx] = grads[pidx] + contrib
        out = []
        for p in self._params:
            g = grads[p.idx] if p.idx <= loss.idx else None
            if g is None:
                g = np.zeros_like(p.value)
            out.append(np.asarray(g, dtype=np.float64))
        return out


def loss_param_grad(loss: Var) -> Tensor:
    """Flat gradient of a scalar loss w.r.t. every registered parameter."""
    parts = loss.tape.gradients(loss)
    flat = (np.concatenate([p.ravel() for p in parts])
            if parts else np.zeros(0))
    return check_finite(flat, "loss_param_grad output")


def _lift(tape: GradTape, x):
    if isinstance(x, Var):
        return x
    return None  # constants stay raw


def _tape_of(*xs) -> GradTape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a Var")


# ---------------------------------------------------------------------------
# arithmetic primitives


def add(a, b):
    tape = _tape_of(a, b)
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=np.float64)
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, s=av.shape: _unbroadcast(g, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, s=bv.shape: _unbroadcast(g, s))
    return tape._record(av + bv, parents, vjps)


def sub(a, b):
    tape = _tape_of(a, b)
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=np.float64)
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, s=av.shape: _unbroadcast(g, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, s=bv.shape: _unbroadcast(-g, s))
    return tape._record(av - bv, parents, vjps)


def mul(a, b):
    tape = _tape_of(a, b)
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=np.float64)
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, o=bv, s=av.shape: _unbroadcast(g * o, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, o=av, s=bv.shape: _unbroadcast(g * o, s))
    return tape._record(av * bv, parents, vjps)


def div(a, b):
    tape = _tape_of(a, b)
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=np.float64)
    out = av / bv
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, o=bv, s=av.shape: _unbroadcast(g / o, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, num=av, den=bv, s=bv.shape:
                    _unbroadcast(-g * num / (den * den), s))
    return tape._record(out, parents, vjps)


def neg(a: Var):
    return a.tape._record(-a.value, [a], [lambda g: -g])


def matmul(a, b):
    """2-D matrix product; reshape operands first for batched contractions."""
    tape = _tape_of(a, b)
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=np.float64)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError("matmul is 2-D only")
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, o=bv: g @ o.T)
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, o=av: o.T @ g)
    return tape._record(av @ bv, parents, vjps)


def reshape(a: Var, shape):
    orig = a.value.shape
    return a.tape._record(np.reshape(a.value, shape), [a],
                          [lambda g, s=orig: np.reshape(g, s)])


def moveaxis(a: Var, src, dst):
    return a.tape._record(np.moveaxis(a.value, src, dst), [a],
                          [lambda g, s=src, d=dst: np.moveaxis(g, d, s)])


def getitem(a: Var, key):
    def vjp(g, k=key, s=a.value.shape):
        z = np.zeros(s)
        z[k] = g  # basic (non-repeating) indexing only
        return z

    return a.tape._record(a.value[key], [a], [vjp])


def vsum(a: Var, axis=None, keepdims=False):
    orig = a.value.shape

    def vjp(g, ax=axis, kd=keepdims, s=orig):
        if ax is not None and not kd:
            g = np.expand_dims(g, ax)
        return np.broadcast_to(g, s).copy()

    return a.tape._record(a.value.sum(axis=axis, keepdims=keepdims), [a], [vjp])


def vmean(a: Var, axis=None, keepdims=False):
    n = a.value.size if axis is None else a.value.shape[axis]
    return mul(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def square(a: Var):
    return a.tape._record(a.value * a.value, [a],
                          [lambda g, x=a.value: g * (2.0 * x)])


def sqrt(a: Var):
    out = np.sqrt(a.value)
    return a.tape._record(out, [a], [lambda g, o=out: g * (0.5 / o)])


def exp(a: Var):
    out = np.exp(a.value)
    return a.tape._record(out, [a], [lambda g, o=out: g * o])


def log(a: Var):
    return a.tape._record(np.log(a.value), [a],
                          [lambda g, x=a.value: g / x])


def log_clamped(a: Var, floor: float):
    """log(max(a, floor)); gradient is zero on the clamped branch."""
    clamped = a.value <= floor
    out = np.log(np.maximum(a.value, floor))

    def vjp(g, x=a.value, m=clamped):
        return np.where(m, 0.0, g / np.where(m, 1.0, x))

    return a.tape._record(out, [a], [vjp])


def logcosh(a):
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    x = np.abs(av)
    out = x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)
    if not isinstance(a, Var):
        return out
    return a.tape._record(out, [a], [lambda g, x=av: g * np.tanh(x)])


def log_2p2cosh(a):
    """log(2 + 2 cosh a), evaluated without overflow for large |a|."""
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)
    x = np.abs(av)
    out = x + 2.0 * np.log1p(np.exp(-x))
    if not isinstance(a, Var):
        return out
    return a.tape._record(out, [a],
                          [lambda g, x=av: g * np.tanh(x / 2.0)])


def max_abs(a: Var):
    """max_i |a_i| with subgradient into the first maximizing entry."""
    flat = np.abs(a.value).ravel()
    k = int(np.argmax(flat))

    def vjp(g, idx=k, x=a.value):
        z = np.zeros(x.size)
        z[idx] = g * np.sign(x.ravel()[idx])
        return z.reshape(x.shape)

    return a.tape._record(flat[k], [a], [vjp])


# ---------------------------------------------------------------------------
# activations: value and input-derivatives as traced primitives

_ACT_KINDS = ("tanh", "sigmoid", "none")


def _act_derivative_values(kind: str, z: Tensor, upto: int) -> list[Tensor]:
    """Raw derivative arrays d0..d(upto) of the activation at z."""
    if kind == "tanh":
        t = np.tanh(z)
        one = 1.0 - t * t
        ders = [t, one, -2.0 * t * one, -2.0 * one * (1.0 - 3.0 * t * t)]
    elif kind == "sigmoid":
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        sp = s * (1.0 - s)
        ders = [s, sp, sp * (1.0 - 2.0 * s),
                sp * (1.0 - 6.0 * s + 6.0 * s * s)]
    elif kind == "none":
        ders = [z, np.ones_like(z), np.zeros_like(z), np.zeros_like(z)]
    else:
        raise ValueError(f"unsupported activation {kind!r}")
    return ders[:upto + 1]


def activation(z, kind: str, order: int):
    """order-th derivative of the activation, traced w.r.t. z if z is a Var."""
    if not isinstance(z, Var):
        zv = np.asarray(z, dtype=np.float64)
        return _act_derivative_values(kind, zv, order)[order]
    ders = _act_derivative_values(kind, z.value, order + 1)
    nxt = ders[order + 1]
    return z.tape._record(ders[order], [z], [lambda g, d=nxt: g * d])


# ---------------------------------------------------------------------------
# linear-algebra primitives with custom adjoints


def spectral_norm(w):
    """Largest singular value, gradient u v^T from the top singular pair.

    Computed by full SVD rather than power iteration: the rank-one adjoint
    is only as accurate as the singular vectors, and power iteration stalls
    when the top two singular values nearly coincide.
    """
    wv = w.value if isinstance(w, Var) else np.asarray(w, dtype=np.float64)
    if wv.ndim != 2:
        raise ValueError("spectral_norm expects a matrix")
    u_full, s, vt_full = np.linalg.svd(wv, full_matrices=False)
    sigma = float(s[0])
    if sigma == 0.0:
        raise DegenerateLayerError("zero matrix: spectral norm 0 gives a "
                                   "degenerate pre-activation box")
    if not isinstance(w, Var):
        return sigma
    u, v = u_full[:, 0].copy(), vt_full[0].copy()
    return w.tape._record(sigma, [w],
                          [lambda g, uu=u, vv=v: g * np.outer(uu, vv)])


def svd_geomean(w, offset: float = 1e-8, rank_tol: float = 1e-10):
    """Geometric mean of (singular value + offset) over the positive ones.

    Computed in log space; gradient flows through the SVD factors.
    """
    wv = w.value if isinstance(w, Var) else np.asarray(w, dtype=np.float64)
    u_full, s, vt_full = np.linalg.svd(wv, full_matrices=False)
    mask = s > rank_tol
    r = int(mask.sum())
    if r == 0:
        raise DegenerateLayerError("zero matrix: no positive singular values")
    d = float(np.exp(np.mean(np.log(s[mask] + offset))))
    if not isinstance(w, Var):
        return d

    def vjp(g, U=u_full[:, mask].copy(), S=s[mask].copy(),
            Vt=vt_full[mask].copy(), D=d, R=r):
        return g * (D / R) * (U @ np.diag(1.0 / (S + offset)) @ Vt)

    return w.tape._record(d, [w], [vjp])


# ---------------------------------------------------------------------------
# finite-difference harness


def fd_check(f, point: Tensor, step: float = 1e-6) -> float:
    """max_i |autodiff_i - central_fd_i| / (|central_fd_i| + 1e-12).

    f maps a flat float64 vector to a scalar Var on a fresh tape whose only
    parameter is that vector.
    """
    point = as_tensor(point)
    loss = f(point)
    grad = loss_param_grad(loss)
    if grad.shape != point.shape:
        raise ValueError("f must register exactly the point as its parameter")
    worst = 0.0
    for i in range(point.size):
        lo = point.copy()
        hi = point.copy()
        lo[i] -= step
        hi[i] += step
        fd = (float(f(hi).value) - float(f(lo).value)) / (2.0 * step)
        err = abs(grad[i] - fd) / (abs(fd) + 1e-12)
        worst = max(worst, err)
    return worst
