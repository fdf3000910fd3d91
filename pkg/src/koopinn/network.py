"""Dense networks with exact input-derivatives up to second order.

A forward pass propagates jets (value, Jacobian, Hessian) through each layer:

    affine z = a W^T + b:   v' = v W^T + b,  J' = W J,  H' = W H
    activation s(z):        v' = s(v),
                            J'[n,o,i]   = s'(v) J[n,o,i]
                            H'[n,o,i,j] = s'(v) H[n,o,i,j] + s''(v) J_i J_j

All contractions are reshaped to 2-D GEMMs.  The pass is written in traced
ops (autodiff.Var), so a reverse sweep over the same tape yields parameter
gradients of any scalar built from the jets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (GradTape, Var, Tensor, as_tensor, check_finite,
                       activation, matmul, moveaxis, mul, add, reshape)

ACTIVATIONS = ("tanh", "sigmoid", "none")

SNAPSHOT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MlpParams:
    """Immutable weights: W_l is (d_l, d_{l-1}), b_l is (d_l,)."""

    weights: tuple[Tensor, ...]
    biases: tuple[Tensor, ...]
    activations: tuple[str, ...]
    seed: int | None = None

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases, activations must align")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unsupported activation {act!r}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {l}: W {w.shape} / b {b.shape} mismatch")
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l}: input dim does not chain")
            w.flags.writeable = False
            b.flags.writeable = False

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flatten(self) -> Tensor:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, flat: Tensor) -> "MlpParams":
        flat = as_tensor(flat, (self.n_params,))
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(flat[k:k + w.size].reshape(w.shape).copy())
            k += w.size
            bs.append(flat[k:k + b.size].copy())
            k += b.size
        return MlpParams(tuple(ws), tuple(bs), self.activations, self.seed)


def init_glorot(dims: list[int], activations: list[str], seed: int) -> MlpParams:
    """Uniform Glorot weights, zero biases, deterministic in the seed."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per weight layer")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        smin = np.linalg.svd(w, compute_uv=False)[-1]
        if smin <= 1e-10:
            raise ValueError(f"degenerate init draw: min singular value {smin}")
        ws.append(w)
        bs.append(np.zeros(fan_out))
    return MlpParams(tuple(ws), tuple(bs), tuple(activations), seed)


@dataclass(frozen=True)
class InputNormalizer:
    """Exact affine map of a coordinate box onto [-1, 1]^d."""

    lo: Tensor
    hi: Tensor
    scale: Tensor = field(init=False)
    shift: Tensor = field(init=False)

    def __post_init__(self):
        lo, hi = as_tensor(self.lo), as_tensor(self.hi)
        if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi <= lo):
            raise ValueError("need a non-degenerate box lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "scale", 2.0 / (hi - lo))
        object.__setattr__(self, "shift", -(hi + lo) / (hi - lo))
        for a in (self.lo, self.hi, self.scale, self.shift):
            a.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x: Tensor, tol: float = 1e-12) -> np.ndarray:
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def apply(self, x: Tensor) -> Tensor:
        return x * self.scale + self.shift


@dataclass
class JetBatch:
    """value (n, d_out); jacobian (n, d_out, d_in); hessian (n, d_out, d_in, d_in).

    jacobian/hessian are None when a lower propagation order was requested.
    The hessian is exactly symmetric in its trailing indices.
    """

    value: Tensor
    jacobian: Tensor | None = None
    hessian: Tensor | None = None


def traced_layer_params(tape: GradTape, params: MlpParams) -> list[tuple[Var, Var, str]]:
    """Register every W_l, b_l on the tape, in flatten() order."""
    out = []
    for w, b, act in zip(params.weights, params.biases, params.activations):
        out.append((tape.param(w), tape.param(b), act))
    return out


def traced_jets(layers: list[tuple[Var, Var, str]], x0: Tensor, order: int,
                input_scale: Tensor | None = None) -> tuple[Var, Var | None, Var | None]:
    """Propagate traced jets through registered layers.

    x0 is the raw layer input, (n, d_in).  input_scale, when given, is the
    per-coordinate derivative of the (affine) normalizer, so the returned
    Jacobian/Hessian are taken w.r.t. the pre-normalizer coordinates.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    tape = layers[0][0].tape
    n, d_in = x0.shape
    v = tape.constant(x0)
    jac = None
    hes = None
    if order >= 1:
        scale = np.ones(d_in) if input_scale is None else input_scale
        eye = np.zeros((n, d_in, d_in))
        eye[:, np.arange(d_in), np.arange(d_in)] = scale
        jac = tape.constant(eye)
    if order >= 2:
        hes = None  # stays zero until the first activation curvature

    for w_var, b_var, act in layers:
        d_out, d_prev = w_var.value.shape
        # affine: reshape trailing neuron axis into rows of a single GEMM
        v = add(matmul(v, moveaxis(w_var, 0, 1)), b_var)
        if jac is not None:
            j2 = reshape(moveaxis(jac, 2, 1), (n * d_in, d_prev))
            jac = moveaxis(reshape(matmul(j2, moveaxis(w_var, 0, 1)),
                                   (n, d_in, d_out)), 1, 2)
        if hes is not None:
            h2 = reshape(moveaxis(hes, 1, 3), (n * d_in * d_in, d_prev))
            hes = moveaxis(reshape(matmul(h2, moveaxis(w_var, 0, 1)),
                                   (n, d_in, d_in, d_out)), 3, 1)
        if act == "none":
            continue
        s0 = activation(v, act, 0)
        if jac is not None:
            s1 = activation(v, act, 1)
            new_jac = mul(reshape(s1, (n, d_out, 1)), jac)
            if order >= 2:
                s2 = activation(v, act, 2)
                ji = reshape(jac, (n, d_out, d_in, 1))
                jj = reshape(jac, (n, d_out, 1, d_in))
                curv = mul(reshape(s2, (n, d_out, 1, 1)), mul(ji, jj))
                if hes is None:
                    hes = curv
                else:
                    hes = add(mul(reshape(s1, (n, d_out, 1, 1)), hes), curv)
            jac = new_jac
        v = s0

    if order >= 2 and hes is None:
        hes = tape.constant(np.zeros((n, v.value.shape[1], d_in, d_in)))
    return v, jac, hes


def propagate_jets(params: MlpParams, inputs: Tensor, order: int = 2) -> JetBatch:
    """Exact value/Jacobian/Hessian of the network at a batch of inputs."""
    inputs = as_tensor(inputs)
    if inputs.ndim != 2 or inputs.shape[1] != params.dims[0]:
        raise ValueError(f"inputs must be (batch, {params.dims[0]})")
    tape = GradTape()
    layers = traced_layer_params(tape, params)
    v, jac, hes = traced_jets(layers, inputs, order)
    jets = JetBatch(v.value,
                    None if jac is None else jac.value,
                    None if hes is None else hes.value)
    for name, arr in (("value", jets.value), ("jacobian", jets.jacobian),
                      ("hessian", jets.hessian)):
        if arr is not None:
            check_finite(arr, f"propagate_jets {name}")
    return jets


def forward(params: MlpParams, normalizer: InputNormalizer, x: Tensor,
            order: int = 2) -> JetBatch:
    """Jets w.r.t. physical coordinates; x must lie in the normalizer's box."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != normalizer.dim:
        raise ValueError(f"x must be (batch, {normalizer.dim})")
    if not np.all(normalizer.contains(x)):
        raise ValueError("x outside the domain box")
    tape = GradTape()
    layers = traced_layer_params(tape, params)
    v, jac, hes = traced_jets(layers, normalizer.apply(x), order,
                              input_scale=normalizer.scale)
    jets = JetBatch(v.value,
                    None if jac is None else jac.value,
                    None if hes is None else hes.value)
    check_finite(jets.value, "forward value")
    return jets


# ---------------------------------------------------------------------------
# weight snapshots


def save_snapshot(path, params: MlpParams, domain_lo=None, domain_hi=None) -> None:
    """Versioned JSON snapshot; float repr round-trips bit-exactly."""
    doc = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "dims": params.dims,
        "activations": list(params.activations),
        "seed": params.seed,
        "weights": [w.ravel().tolist() for w in params.weights],  # row-major
        "biases": [b.tolist() for b in params.biases],
    }
    if domain_lo is not None:
        doc["domain_lo"] = list(np.asarray(domain_lo, dtype=float))
        doc["domain_hi"] = list(np.asarray(domain_hi, dtype=float))
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_snapshot(path) -> tuple[MlpParams, InputNormalizer | None]:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != SNAPSHOT_FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot format_version {version!r}")
    dims = doc["dims"]
    ws, bs = [], []
    for l, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        ws.append(as_tensor(doc["weights"][l]).reshape(fan_out, fan_in))
        bs.append(as_tensor(doc["biases"][l], (fan_out,)))
    params = MlpParams(tuple(ws), tuple(bs), tuple(doc["activations"]),
                       doc.get("seed"))
    norm = None
    if "domain_lo" in doc:
        norm = InputNormalizer(as_tensor(doc["domain_lo"]),
                               as_tensor(doc["domain_hi"]))
    return params, norm
