"""Compactly supported bump test functions and midpoint quadrature.

The bump is q(z) = exp(-1/(1 - c^2 |z|^2)) inside |z| < 1/c and exactly zero
outside; a test function centers it at a collocation point and normalizes so
its quadrature integral over the domain is exactly one.  The center shift and
the domain-wide normalization are deliberate conventions: with a broad bump
(support larger than the domain) the normalization integral simply runs over
the whole domain and nothing is truncated.

Quadrature is the midpoint rule on a per-dimension lattice of cell centers;
all inner products in the package go through the same grid family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, as_tensor, check_finite


@dataclass(frozen=True)
class QuadratureGrid:
    """Cell-center nodes of a box partitioned into n_k cells per dimension."""

    lo: Tensor
    hi: Tensor
    nodes_per_dim: tuple[int, ...]
    nodes: Tensor = field(init=False)
    weight: float = field(init=False)

    def __init__(self, lo, hi, nodes_per_dim):
        lo, hi = as_tensor(lo), as_tensor(hi)
        if isinstance(nodes_per_dim, int):
            nodes_per_dim = (nodes_per_dim,) * lo.size
        nodes_per_dim = tuple(int(n) for n in nodes_per_dim)
        if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi <= lo):
            raise ValueError("need a non-degenerate box lo < hi")
        if len(nodes_per_dim) != lo.size or any(n < 1 for n in nodes_per_dim):
            raise ValueError("need a positive node count per dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "nodes_per_dim", nodes_per_dim)
        axes = [lo[k] + (hi[k] - lo[k]) * (np.arange(n) + 0.5) / n
                for k, n in enumerate(nodes_per_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        h = [(hi[k] - lo[k]) / n for k, n in enumerate(nodes_per_dim)]
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weight", float(np.prod(h)))
        self.nodes.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def refine(self, factor: int = 2) -> "QuadratureGrid":
        return QuadratureGrid(self.lo, self.hi,
                              tuple(n * factor for n in self.nodes_per_dim))


def integrate(values: Tensor, grid: QuadratureGrid):
    """Midpoint-rule integral of values sampled at grid.nodes.

    values may carry trailing axes (channels); the node axis is the first.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != grid.n_nodes:
        raise ValueError("values must be sampled at the grid nodes")
    check_finite(values, "integrand")
    total = values.sum(axis=0) * grid.weight
    return float(total) if total.ndim == 0 else total


def inner(a: Tensor, b: Tensor, grid: QuadratureGrid) -> float:
    """Quadrature L2 inner product of two node-sampled functions."""
    return integrate(np.asarray(a) * np.asarray(b), grid)


@dataclass(frozen=True)
class CollocationSet:
    """Uniform random points inside a box, deterministic in the seed."""

    points: Tensor
    seed: int

    @staticmethod
    def draw(lo, hi, n: int, seed: int) -> "CollocationSet":
        lo, hi = as_tensor(lo), as_tensor(hi)
        rng = np.random.default_rng(seed)
        pts = rng.uniform(lo, hi, size=(n, lo.size))
        pts.flags.writeable = False
        return CollocationSet(pts, seed)

    @property
    def n(self) -> int:
        return self.points.shape[0]


class TestFunction:
    """Normalized bump p(y) = q(y - center) / \\int_X q, derivatives to order 2."""

    def __init__(self, center, c: float, grid: QuadratureGrid):
        self.center = as_tensor(center)
        if self.center.shape != (grid.dim,):
            raise ValueError("center dimension must match the grid")
        if c <= 0:
            raise ValueError("concentration c must be positive")
        self.c = float(c)
        self.grid = grid
        raw = _bump_raw(self.center, self.c, grid.nodes, order=0)[0]
        const = float(raw.sum() * grid.weight)
        if const <= 0:
            raise ValueError("bump support does not meet the quadrature grid")
        self.norm_constant = const

    @property
    def support_radius(self) -> float:
        return 1.0 / self.c

    def support_inside(self, lo, hi, margin: float = 0.0) -> bool:
        lo, hi = as_tensor(lo), as_tensor(hi)
        r = self.support_radius + margin
        return bool(np.all(self.center - r >= lo) and np.all(self.center + r <= hi))

    def __call__(self, y: Tensor) -> Tensor:
        return self.values(y)

    def values(self, y: Tensor) -> Tensor:
        v, _, _ = _bump_raw(self.center, self.c, np.atleast_2d(as_tensor(y)), 0)
        return v / self.norm_constant

    def gradient(self, y: Tensor) -> Tensor:
        _, g, _ = _bump_raw(self.center, self.c, np.atleast_2d(as_tensor(y)), 1)
        return g / self.norm_constant

    def hessian(self, y: Tensor) -> Tensor:
        _, _, h = _bump_raw(self.center, self.c, np.atleast_2d(as_tensor(y)), 2)
        return h / self.norm_constant


def _bump_raw(center: Tensor, c: float, pts: Tensor, order: int):
    """Unnormalized bump and derivatives; exactly zero outside the open support."""
    z = pts - center
    s = (c * c) * np.sum(z * z, axis=1)
    inside = s < 1.0
    w = np.where(inside, 1.0 - s, np.nan)  # 1 - c^2|z|^2, only used inside
    q = np.zeros(pts.shape[0])
    q[inside] = np.exp(-1.0 / w[inside])
    grad = None
    hess = None
    if order >= 1:
        # dq/dz_i = q * g_i with g_i = -2 c^2 z_i / w^2
        gfac = np.zeros_like(q)
        gfac[inside] = -2.0 * c * c / (w[inside] ** 2)
        grad = (q * gfac)[:, None] * z
    if order >= 2:
        d = pts.shape[1]
        hess = np.zeros((pts.shape[0], d, d))
        idx = np.nonzero(inside)[0]
        if idx.size:
            zi = z[idx]
            wi = w[idx]
            qi = q[idx]
            gi = (-2.0 * c * c / wi ** 2)[:, None] * zi
            outer = gi[:, :, None] * gi[:, None, :]
            cross = (-8.0 * c ** 4 / wi ** 3)[:, None, None] * \
                (zi[:, :, None] * zi[:, None, :])
            diag = (-2.0 * c * c / wi ** 2)[:, None, None] * np.eye(d)
            hess[idx] = qi[:, None, None] * (outer + diag + cross)
    return q, grad, hess


def bump_eval(tf: TestFunction, y: Tensor, deriv: tuple[int, ...] = ()) -> Tensor:
    """Evaluate p or one of its partial derivatives, |deriv| <= 2.

    deriv is a tuple of coordinate indices, e.g. (0,) for d/dy_0 and
    (0, 1) for the mixed second partial.
    """
    y2 = np.atleast_2d(as_tensor(y))
    order = len(deriv)
    if order == 0:
        out = tf.values(y2)
    elif order == 1:
        out = tf.gradient(y2)[:, deriv[0]]
    elif order == 2:
        out = tf.hessian(y2)[:, deriv[0], deriv[1]]
    else:
        raise ValueError("derivatives above order 2 are not provided")
    return out if np.asarray(y).ndim > 1 else float(out[0])


def test_function_matrix(tfs: list[TestFunction], grid: QuadratureGrid) -> Tensor:
    """Rows of p_n sampled at the grid nodes: shape (n_tf, n_nodes)."""
    return np.stack([tf.values(grid.nodes) for tf in tfs], axis=0)


def weak_residual(params, op, tf: TestFunction, grid: QuadratureGrid) -> Tensor:
    """Quadrature of each residual channel against the test function.

    Returns one value per channel.  The operator's residual includes its
    source term, so a network solving the equation gives zeros here.
    """
    res = op.residual_field(params, grid.nodes, include_source=True)
    p = tf.values(grid.nodes)
    return np.array([integrate(res[:, c] * p, grid) for c in range(res.shape[1])])


def delta_limit_check(g, x, c_values, grid: QuadratureGrid) -> list[float]:
    """|quadrature(g * p_{x,c}) - g(x)| for each concentration c.

    g is a vectorized callable on (n, d) points.  At least the largest c must
    have its support inside the grid box for the limit to make sense.
    """
    x = as_tensor(x)
    cs = sorted(float(c) for c in c_values)
    largest = TestFunction(x, cs[-1], grid)
    if not largest.support_inside(grid.lo, grid.hi):
        raise ValueError("support escapes the domain even at the largest c")
    gx = float(np.asarray(g(x[None, :])).ravel()[0])
    gv = np.asarray(g(grid.nodes), dtype=np.float64).ravel()
    errs = []
    for c in cs:
        p = TestFunction(x, c, grid).values(grid.nodes)
        errs.append(abs(integrate(gv * p, grid) - gx))
    return errs
