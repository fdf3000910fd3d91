"""Layer-wise composition-operator bounds and the norm regularizer.

Each layer gets a symmetric pre-activation box [-a_l, a_l]^{d_l} with
a_l = ||W_l||_2 * m_{l-1} + ||b_l||_inf, where m is the output bound of the
previous activation (1 for tanh/sigmoid and for the normalized input box).
On that box the squared composition-operator norm of the activation is
bounded by

    tanh:    A_l = (cosh^2 a_l)^{d_l}
    sigmoid: A_l = (2 + 2 cosh a_l)^{d_l}
    none:    A_l = 1   (identity)

A_l is kept in log space: the tanh factor overflows float64 for a_l above
roughly 6.6 at width 64.  The shrinkage factor is A~_l = 1/(1 + 1/A_l) and
the volume factor D_l is the geometric mean of (singular value + 1e-8) over
the positive singular values of W_l.

The regularizer 0.01 * sum_l A~_l / sqrt(D_l) runs over all weight layers and
is differentiable: gradients flow through the power-iteration vectors of the
spectral norm, the max-|b| subgradient, the cosh/sigmoid formulas and the SVD.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .autodiff import (GradTape, Var, Tensor, activation, log_2p2cosh,
                       logcosh, max_abs, spectral_norm, sqrt, svd_geomean)
from .network import MlpParams, traced_layer_params

SING_OFFSET = 1e-8
RANK_TOL = 1e-10
REG_WEIGHT = 0.01

V_NORM_CONVENTION = "spectral_norm(W_L) * a_L / sqrt(3)"


def log_koopman_factor(act: str, halfwidth: float, dim: int) -> float:
    """log A_l for an activation on the box [-a, a]^dim."""
    a = float(halfwidth)
    if a < 0:
        raise ValueError("box halfwidth must be non-negative")
    if act == "tanh":
        per = 2.0 * (abs(a) + math.log1p(math.exp(-2.0 * abs(a))) - math.log(2.0))
    elif act == "sigmoid":
        per = abs(a) + 2.0 * math.log1p(math.exp(-abs(a)))
    elif act == "none":
        per = 0.0
    else:
        raise ValueError(f"unsupported activation {act!r}")
    return dim * per


def koopman_factor(act: str, halfwidth: float, dim: int) -> float:
    """A_l itself; inf when the log form overflows float64."""
    log_a = log_koopman_factor(act, halfwidth, dim)
    with np.errstate(over="ignore"):
        return float(np.exp(log_a))


def a_tilde(a_factor: float) -> float:
    """1 / (1 + 1/A); tends to 1 as the box grows, 1/(1+1/A_min) at small boxes."""
    if a_factor <= 0:
        raise ValueError("Koopman factor must be positive")
    return 1.0 / (1.0 + 1.0 / a_factor)


def geo_mean_singular(w: Tensor) -> tuple[float, Tensor]:
    """(geometric mean of sigma_k + offset over positive sigma_k, all sigma_k)."""
    s = np.linalg.svd(np.asarray(w, dtype=np.float64), compute_uv=False)
    pos = s[s > RANK_TOL]
    if pos.size == 0:
        raise ValueError("zero matrix has no positive singular values")
    return float(np.exp(np.mean(np.log(pos + SING_OFFSET)))), s


@dataclass
class LayerBoundFactors:
    index: int
    activation: str
    dim: int
    spectral_norm: float
    bias_max: float
    box_halfwidth: float          # pre-activation box is [-a, a]^dim
    log_A: float
    A: float                      # exp(log_A); may be inf
    A_tilde: float
    D: float
    singular_values: list[float]


def propagate_boxes(params: MlpParams) -> list[LayerBoundFactors]:
    """Interval boxes and bound factors for every weight layer.

    The input box is the normalized [-1, 1]^{d_0}; tanh/sigmoid outputs are
    bounded by 1, an activation-free layer passes its own box through.
    """
    factors = []
    m_prev = 1.0
    for l, (w, b, act) in enumerate(zip(params.weights, params.biases,
                                        params.activations)):
        sn = spectral_norm(w)
        bias = float(np.max(np.abs(b))) if b.size else 0.0
        a = sn * m_prev + bias
        dim = w.shape[0]
        log_a_factor = log_koopman_factor(act, a, dim)
        with np.errstate(over="ignore"):
            a_factor = float(np.exp(log_a_factor))
        d_val, sing = geo_mean_singular(w)
        factors.append(LayerBoundFactors(
            index=l, activation=act, dim=dim, spectral_norm=sn, bias_max=bias,
            box_halfwidth=a, log_A=log_a_factor, A=a_factor,
            A_tilde=a_tilde(a_factor), D=d_val,
            singular_values=[float(x) for x in sing]))
        m_prev = 1.0 if act in ("tanh", "sigmoid") else a
    return factors


def koopman_factor_sum(params: MlpParams) -> float:
    """sum_l A~_l / sqrt(D_l): the quantity the scatter correlates against."""
    return sum(f.A_tilde / math.sqrt(f.D) for f in propagate_boxes(params))


def koopman_regularizer(layers: list[tuple[Var, Var, str]],
                        weight: float = REG_WEIGHT) -> Var:
    """Traced weight * sum_l A~_l / sqrt(D_l) over registered layers."""
    terms = None
    m_prev: Var | float = 1.0
    for w_var, b_var, act in layers:
        dim = w_var.value.shape[0]
        sn = spectral_norm(w_var)
        a = sn * m_prev + max_abs(b_var)
        if act == "tanh":
            log_a_factor = (2.0 * dim) * logcosh(a)
            at = activation(log_a_factor, "sigmoid", 0)
        elif act == "sigmoid":
            log_a_factor = dim * log_2p2cosh(a)
            at = activation(log_a_factor, "sigmoid", 0)
        elif act == "none":
            at = 0.5  # identity: A = 1 exactly
        else:
            raise ValueError(f"unsupported activation {act!r}")
        term = at / sqrt(svd_geomean(w_var, SING_OFFSET, RANK_TOL))
        terms = term if terms is None else terms + term
        m_prev = 1.0 if act in ("tanh", "sigmoid") else a
    return terms * weight


def regularizer_value(params: MlpParams, weight: float = REG_WEIGHT) -> float:
    """Untraced value of the regularizer (same code path, throwaway tape)."""
    tape = GradTape()
    return float(koopman_regularizer(traced_layer_params(tape, params),
                                     weight).value)


# ---------------------------------------------------------------------------
# bound assembly

THEOREM_TAGS = ("linear", "poly", "nonlinear-linear")


@dataclass
class BoundReport:
    tag: str
    r: int
    f_constant: float
    taylor_eps: float
    n_samples: int
    norm_proxy: float             # may be inf; log_norm_proxy is always finite
    log_norm_proxy: float
    assembled_bound: float
    log_assembled_bound: float
    g_norm: float = 0.0
    v_norm: float | None = None
    v_norm_convention: str = V_NORM_CONVENTION
    layers: list[LayerBoundFactors] | None = None
    regularizer_value: float | None = None

    def to_dict(self) -> dict:
        doc = asdict(self)
        return doc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def norm_proxy_from_params(params: MlpParams) -> tuple[float, float, float,
                                                       list[LayerBoundFactors]]:
    """(U, log U, ||v||, per-layer factors) for a network.

    log U = log ||v|| + 1/2 sum_{l<L} log A_l - 1/2 sum_l sum_k log(s_k + 1e-8),
    with ||v|| the spectral norm of the final layer times the volume-normalized
    half-width of its pre-activation box, a_L / sqrt(3).
    """
    factors = propagate_boxes(params)
    last = factors[-1]
    v_norm = last.spectral_norm * last.box_halfwidth / math.sqrt(3.0)
    log_u = math.log(v_norm)
    for f in factors[:-1]:
        log_u += 0.5 * f.log_A
    for f in factors:
        pos = [s for s in f.singular_values if s > RANK_TOL]
        log_u -= 0.5 * sum(math.log(s + SING_OFFSET) for s in pos)
    with np.errstate(over="ignore"):
        u = float(np.exp(log_u))
    return u, log_u, v_norm, factors


def _log_bound(tag: str, log_u: float, f_constant: float, r: int, n: int,
               g_norm: float) -> float:
    log_terms = [2.0 * i * log_u for i in range(r + 1)]
    log_terms.append(2.0 * r * log_u)
    if tag == "poly" and g_norm > 0.0:
        log_terms.append(2.0 * math.log(g_norm))
    m = max(log_terms)
    lse = m + math.log(sum(math.exp(t - m) for t in log_terms))
    return math.log(f_constant) - 0.5 * math.log(n) + 0.5 * lse


def assemble_bound(tag: str, f_constant: float, r: int, n: int,
                   params: MlpParams | None = None,
                   norm_proxy: float | None = None,
                   taylor_eps: float = 0.0, g_norm: float = 0.0) -> BoundReport:
    """Generalization bound (F/sqrt(N)) * sum-of-norm-powers for a theorem tag.

    The norm proxy U comes from the network unless given explicitly (the
    explicit form exists so the closed-form arithmetic is testable).
    linear: (F/sqrt(N)) U;  poly: (F/sqrt(N)) (sum_{i<=r} U^{2i} + U^{2r}
    + g^2)^{1/2};  nonlinear-linear drops the g term.
    """
    if tag not in THEOREM_TAGS:
        raise ValueError(f"unknown theorem tag {tag!r}")
    if f_constant <= 0 or n <= 0 or r < 1:
        raise ValueError("need F > 0, N > 0, r >= 1")
    v_norm = None
    layers = None
    reg = None
    if params is not None:
        u, log_u, v_norm, layers = norm_proxy_from_params(params)
        reg = regularizer_value(params)
    elif norm_proxy is not None:
        if norm_proxy <= 0:
            raise ValueError("norm proxy must be positive")
        u, log_u = float(norm_proxy), math.log(norm_proxy)
    else:
        raise ValueError("need params or an explicit norm proxy")

    if tag == "linear":
        log_b = math.log(f_constant) - 0.5 * math.log(n) + log_u
        bound = f_constant / math.sqrt(n) * u if math.isfinite(u) else math.inf
    else:
        log_b = _log_bound(tag, log_u, f_constant, r, n, g_norm)
        if abs(log_u) * 2 * r < 300.0:
            terms = sum(u ** (2 * i) for i in range(r + 1)) + u ** (2 * r)
            if tag == "poly":
                terms += g_norm ** 2
            bound = f_constant / math.sqrt(n) * math.sqrt(terms)
        else:
            with np.errstate(over="ignore"):
                bound = float(np.exp(log_b))
    return BoundReport(tag=tag, r=r, f_constant=float(f_constant),
                       taylor_eps=float(taylor_eps), n_samples=int(n),
                       norm_proxy=u, log_norm_proxy=log_u,
                       assembled_bound=bound, log_assembled_bound=log_b,
                       g_norm=float(g_norm), v_norm=v_norm, layers=layers,
                       regularizer_value=reg)
