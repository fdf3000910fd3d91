"""Differential operators: residual channels on jets, plus the adjoint-norm
tables that bound the test-function bundle for the generalization audits.

Residuals are written in traced ops so the trainer can backpropagate through
them; plain-array evaluation wraps the same code path with constant jets.

Adjoint-term conventions (documented here once, used by estimate_f_constant):

* steady incompressible flow (3 channels: 2 momentum + divergence):
    - the operator is an exact quadratic in the field, so the remainder is 0;
    - order-1 adjoint, by parts: (nu*lap(p) + dp/dx_k) on each momentum
      channel and (dp/dx_1 + dp/dx_2) on the divergence channel;
    - order-2 adjoint norm of the convection term over components i, j:
      sum_ij ||d_i p_j||^2 with p_j = p on every component, times (1/2!)^2.
* log-det parabolic operator (1 channel): the log is expanded about a positive
  reference z0; term i carries the i-th Taylor coefficient of log at z0 times
  the adjoint norm of the linear derivative bundle
  ||d_t p||^2 + sum_ij ||d_i d_j p||^2 (integration by parts twice).
* first-derivative-sum (linear audit operator): F is just ||d_1 p + d_2 p||.

All tables add (eps^2 + 1)*||p||^2 per channel except the linear one, whose
bound needs only the adjoint norm.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .autodiff import GradTape, Var, Tensor, as_tensor, log_clamped
from .network import InputNormalizer, MlpParams, forward
from .testfn import QuadratureGrid, TestFunction, integrate


def _wrap_jets(jets):
    """Constant Vars for plain-array jets, so one residual code path serves
    both traced training and detached evaluation."""
    tape = GradTape()
    v = tape.constant(jets.value)
    jac = tape.constant(jets.jacobian)
    hes = tape.constant(jets.hessian)
    return v, jac, hes


class NavierStokes2D:
    """Steady lid-driven incompressible flow on a box; outputs (u1, u2, p)."""

    channels = 3
    tag = "poly"
    r = 2
    taylor_eps = 0.0  # exact quadratic: zero Taylor remainder
    output_dim = 3

    def __init__(self, re: float = 100.0, lo=(0.0, 0.0), hi=(1.0, 1.0)):
        if re <= 0:
            raise ValueError("Reynolds number must be positive")
        self.re = float(re)
        self.normalizer = InputNormalizer(as_tensor(lo), as_tensor(hi))

    def residual_channels(self, v: Var, jac: Var, hes: Var, pts: Tensor,
                          include_source: bool = True):
        """Momentum pair and divergence as traced (n,) channels."""
        nu = 1.0 / self.re
        u1 = v[:, 0]
        u2 = v[:, 1]
        chans = []
        for k in (0, 1):
            conv = u1 * jac[:, k, 0] + u2 * jac[:, k, 1]
            lap = hes[:, k, 0, 0] + hes[:, k, 1, 1]
            chans.append(conv + jac[:, 2, k] - nu * lap)
        chans.append(jac[:, 0, 0] + jac[:, 1, 1])
        return chans, 0

    def source_field(self, pts: Tensor) -> Tensor:
        return np.zeros((pts.shape[0], self.channels))

    def residual_field(self, params: MlpParams, pts: Tensor,
                       include_source: bool = True) -> Tensor:
        jets = forward(params, self.normalizer, pts, order=2)
        chans, _ = self.residual_channels(*_wrap_jets(jets), pts,
                                          include_source)
        return np.stack([ch.value for ch in chans], axis=1)

    def adjoint_term_table(self, tf: TestFunction, grid: QuadratureGrid) -> dict:
        nu = 1.0 / self.re
        grad = tf.gradient(grid.nodes)
        hess = tf.hessian(grid.nodes)
        lap = hess[:, 0, 0] + hess[:, 1, 1]
        order1 = integrate((nu * lap + grad[:, 0]) ** 2
                           + (nu * lap + grad[:, 1]) ** 2
                           + (grad[:, 0] + grad[:, 1]) ** 2, grid)
        order2 = 0.25 * convection_adjoint_norm(tf, grid, n_components=2)
        p_norm2 = self.channels * integrate(tf.values(grid.nodes) ** 2, grid)
        eps = self.taylor_eps
        table = {"order0": 0.0, "order1": order1, "order2": order2,
                 "p_norm": (eps ** 2 + 1.0) * p_norm2}
        table["F"] = math.sqrt(sum(v for k, v in table.items() if k != "F"))
        return table


def pma_default_source(pts: Tensor) -> Tensor:
    """Source used by the reference parabolic experiment: 1 + log 2 + 2x."""
    return 1.0 + np.log(2.0) + 2.0 * pts[:, 0]


class ParabolicMongeAmpere:
    """-u_t + log det(spatial Hessian) = f on a space-time box; scalar output."""

    channels = 1
    tag = "nonlinear-linear"
    output_dim = 1

    def __init__(self, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0),
                 source=pma_default_source, z0: float = 1.0,
                 det_clamp: float = 1e-8, r: int = 3,
                 taylor_radius: float = 0.9):
        if z0 <= 0:
            raise ValueError("log expansion point must be positive")
        if not (0 < taylor_radius < z0):
            raise ValueError("taylor radius must sit inside (0, z0)")
        self.normalizer = InputNormalizer(as_tensor(lo), as_tensor(hi))
        if self.normalizer.dim != 3:
            raise ValueError("expected a 3-d space-time box")
        self.source = source
        self.z0 = float(z0)
        self.det_clamp = float(det_clamp)
        self.r = int(r)
        self.taylor_radius = float(taylor_radius)

    def residual_channels(self, v: Var, jac: Var, hes: Var, pts: Tensor,
                          include_source: bool = True):
        det = hes[:, 0, 0, 0] * hes[:, 0, 1, 1] - hes[:, 0, 0, 1] * hes[:, 0, 0, 1]
        clamp_events = int(np.count_nonzero(det.value <= self.det_clamp))
        res = log_clamped(det, self.det_clamp) - jac[:, 0, 2]
        if include_source:
            res = res - self.source(pts)
        return [res], clamp_events

    def source_field(self, pts: Tensor) -> Tensor:
        return self.source(pts)[:, None]

    def residual_field(self, params: MlpParams, pts: Tensor,
                       include_source: bool = True) -> Tensor:
        jets = forward(params, self.normalizer, pts, order=2)
        chans, _ = self.residual_channels(*_wrap_jets(jets), pts,
                                          include_source)
        return np.stack([ch.value for ch in chans], axis=1)

    def log_taylor_coefficients(self) -> list[float]:
        """d^i/dz^i log(z) at z0, i = 0..r."""
        coeffs = [math.log(self.z0)]
        for i in range(1, self.r + 1):
            coeffs.append((-1.0) ** (i - 1) * math.factorial(i - 1)
                          / self.z0 ** i)
        return coeffs

    @cached_property
    def taylor_eps(self) -> float:
        return estimate_taylor_remainder(
            lambda h: math.log(self.z0 + h),
            self.log_taylor_coefficients(),
            self.r, self.taylor_radius)

    def adjoint_term_table(self, tf: TestFunction, grid: QuadratureGrid) -> dict:
        grad = tf.gradient(grid.nodes)
        hess = tf.hessian(grid.nodes)
        bundle = integrate(grad[:, 2] ** 2, grid)
        for i in (0, 1):
            for j in (0, 1):
                bundle += integrate(hess[:, i, j] ** 2, grid)
        p_norm2 = integrate(tf.values(grid.nodes) ** 2, grid)
        coeffs = self.log_taylor_coefficients()
        table = {"order0": coeffs[0] ** 2 * p_norm2}
        for i in range(1, self.r + 1):
            table[f"order{i}"] = (coeffs[i] / math.factorial(i)) ** 2 * bundle
        table["p_norm"] = (self.taylor_eps ** 2 + 1.0) * p_norm2
        table["F"] = math.sqrt(sum(v for k, v in table.items() if k != "F"))
        return table


class GradientSum2D:
    """Linear audit operator D(u) = du/dx_1 + du/dx_2 on a planar box."""

    channels = 1
    tag = "linear"
    r = 1
    taylor_eps = 0.0
    output_dim = 1

    def __init__(self, lo=(0.0, 0.0), hi=(1.0, 1.0)):
        self.normalizer = InputNormalizer(as_tensor(lo), as_tensor(hi))

    def residual_channels(self, v: Var, jac: Var, hes: Var, pts: Tensor,
                          include_source: bool = True):
        return [jac[:, 0, 0] + jac[:, 0, 1]], 0

    def source_field(self, pts: Tensor) -> Tensor:
        return np.zeros((pts.shape[0], 1))

    def residual_field(self, params: MlpParams, pts: Tensor,
                       include_source: bool = True) -> Tensor:
        jets = forward(params, self.normalizer, pts, order=2)
        chans, _ = self.residual_channels(*_wrap_jets(jets), pts,
                                          include_source)
        return np.stack([ch.value for ch in chans], axis=1)

    def adjoint_term_table(self, tf: TestFunction, grid: QuadratureGrid) -> dict:
        grad = tf.gradient(grid.nodes)
        adj = integrate((grad[:, 0] + grad[:, 1]) ** 2, grid)
        return {"adjoint": adj, "F": math.sqrt(adj)}


# ---------------------------------------------------------------------------
# public wrappers and scalar estimates


def ns_residual(params: MlpParams, normalizer: InputNormalizer, x: Tensor,
                re: float = 100.0) -> tuple[Tensor, Tensor]:
    """Strong-form momentum (n, 2) and divergence (n,) at physical points."""
    op = NavierStokes2D(re, normalizer.lo, normalizer.hi)
    res = op.residual_field(params, as_tensor(np.atleast_2d(x)))
    return res[:, :2], res[:, 2]


def pma_residual(params: MlpParams, normalizer: InputNormalizer, xt: Tensor,
                 source=pma_default_source, det_clamp: float = 1e-8
                 ) -> tuple[Tensor, int]:
    """Strong-form log-det residual (n,) and the number of clamped nodes."""
    op = ParabolicMongeAmpere(normalizer.lo, normalizer.hi, source,
                              det_clamp=det_clamp)
    pts = as_tensor(np.atleast_2d(xt))
    jets = forward(params, normalizer, pts, order=2)
    chans, clamps = op.residual_channels(*_wrap_jets(jets), pts, True)
    return chans[0].value, clamps


def convection_adjoint_norm(tf: TestFunction, grid: QuadratureGrid,
                            n_components: int = 2) -> float:
    """sum_ij ||d_i p_j||^2 with every component p_j equal to the scalar bump."""
    grad = tf.gradient(grid.nodes)
    per_dim = sum(integrate(grad[:, i] ** 2, grid) for i in range(grid.dim))
    return n_components * per_dim


def estimate_taylor_remainder(g, derivs_at_center, order: int, radius: float,
                              samples: int = 10001) -> float:
    """max over |z| <= radius of |g(z) - T_order(z)| / |z|^order.

    derivs_at_center lists g and its derivatives at the expansion point,
    g^(0)..g^(order); they must be exact or the ratio blows up near zero.
    """
    if radius <= 0 or samples < 3:
        raise ValueError("need a positive radius and at least 3 samples")
    if len(derivs_at_center) < order + 1:
        raise ValueError("need derivatives up to the requested order")
    zs = np.linspace(-radius, radius, samples)
    zs = zs[zs != 0.0]
    taylor = np.zeros_like(zs)
    for i in range(order + 1):
        taylor += derivs_at_center[i] / math.factorial(i) * zs ** i
    gv = np.array([g(z) for z in zs])
    return float(np.max(np.abs(gv - taylor) / np.abs(zs) ** order))


def estimate_f_constant(op, tfs: list[TestFunction], grid: QuadratureGrid) -> float:
    """Uniform bound on the test-function bundle norm: max_n of the op's
    adjoint-term table.  Depends only on the test functions, never on weights."""
    if not tfs:
        raise ValueError("need at least one test function")
    return max(op.adjoint_term_table(tf, grid)["F"] for tf in tfs)
