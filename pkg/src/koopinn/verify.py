"""Monte-Carlo audits of the generalization machinery.

These checks are one-sided: a sampled family can only witness a violation,
never prove the bound.  Each audit compares an empirical Rademacher estimate
over a norm-constrained network family against the assembled bound and passes
when estimate - 3*stderr <= bound.  A deliberately corrupted bound constant
must flip the comparison, otherwise the audit itself is vacuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, as_tensor
from .bounds import (RANK_TOL, BoundReport, assemble_bound,
                     norm_proxy_from_params)
from .network import MlpParams, init_glorot
from .operators import estimate_f_constant
from .testfn import CollocationSet, QuadratureGrid, TestFunction, integrate


@dataclass
class ParamFamily:
    """Glorot draws rescaled into the determinant-constrained set.

    The constraint is per layer: prod_k sigma_k^(-1/2) <= det_cap over the
    positive singular values.  A draw violating it is scaled up (which shrinks
    the inverse determinant factor) and counted as a rescale event.
    """

    members: list[MlpParams]
    det_cap: float
    rescale_events: int

    @staticmethod
    def draw(dims, activations, size: int, det_cap: float, seed: int,
             init_scale: float = 1.0) -> "ParamFamily":
        members = []
        events = 0
        for i in range(size):
            params = init_glorot(dims, activations, seed + 7919 * i)
            ws = []
            for w in params.weights:
                w = w * init_scale
                s = np.linalg.svd(w, compute_uv=False)
                pos = s[s > RANK_TOL]
                inv_det = float(np.exp(-0.5 * np.sum(np.log(pos))))
                if inv_det > det_cap:
                    scale = 1.01 * (inv_det / det_cap) ** (2.0 / pos.size)
                    w = w * scale
                    events += 1
                ws.append(w)
            members.append(MlpParams(tuple(ws), params.biases,
                                     params.activations, params.seed))
        fam = ParamFamily(members, det_cap, events)
        for m in fam.members:
            for w in m.weights:
                s = np.linalg.svd(w, compute_uv=False)
                pos = s[s > RANK_TOL]
                if float(np.exp(-0.5 * np.sum(np.log(pos)))) > det_cap:
                    raise AssertionError("rescaling failed to meet the cap")
        return fam


def weak_value_matrix(family: ParamFamily, op, tfs: list[TestFunction],
                      grid: QuadratureGrid) -> Tensor:
    """V[m, n]: source-free weak residual of member m against test fn n,
    channels contracted (the vector test function has equal components)."""
    p_w = np.stack([tf.values(grid.nodes) for tf in tfs]) * grid.weight
    rows = []
    for m in family.members:
        res = op.residual_field(m, grid.nodes, include_source=False)
        rows.append((p_w @ res).sum(axis=1))
    return np.stack(rows, axis=0)


def empirical_rademacher_family(family: ParamFamily, op,
                                tfs: list[TestFunction],
                                grid: QuadratureGrid, draws: int, seed: int
                                ) -> tuple[float, float]:
    """Estimate the family's Rademacher complexity on the weak residuals."""
    return empirical_rademacher(weak_value_matrix(family, op, tfs, grid),
                                draws, seed)


def empirical_rademacher(values: Tensor, draws: int, seed: int
                         ) -> tuple[float, float]:
    """(estimate, stderr) of E sup_m (1/N) sum_n eps_n V[m, n]."""
    values = as_tensor(values)
    if values.ndim != 2:
        raise ValueError("values must be (members, N)")
    if draws < 2:
        raise ValueError("need at least 2 draws")
    n = values.shape[1]
    rng = np.random.default_rng(seed)
    eps = rng.integers(0, 2, size=(draws, n)) * 2.0 - 1.0
    sups = (eps @ values.T / n).max(axis=1)
    est = float(np.mean(sups))
    stderr = float(np.std(sups, ddof=1) / math.sqrt(draws))
    return est, stderr


@dataclass
class AuditResult:
    name: str
    estimate: float
    stderr: float
    bound: float
    margin: float               # bound - (estimate - 3*stderr)
    passed: bool
    seed: int
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "estimate": self.estimate,
                "stderr": self.stderr, "bound": self.bound,
                "margin": self.margin, "passed": self.passed,
                "seed": self.seed, **self.detail}


def audit_bound(name: str, estimate: float, stderr: float,
                report: BoundReport, seed: int, detail: dict | None = None
                ) -> AuditResult:
    """One-sided comparison: pass iff estimate - 3*stderr <= bound."""
    lower = estimate - 3.0 * stderr
    margin = report.assembled_bound - lower
    return AuditResult(name=name, estimate=estimate, stderr=stderr,
                       bound=report.assembled_bound, margin=margin,
                       passed=lower <= report.assembled_bound, seed=seed,
                       detail=detail or {})


def rademacher_audit(op, dims, activations, n_centers: int, bump_c: float,
                     grid: QuadratureGrid, family_size: int, draws: int,
                     det_cap: float, seed: int, f_scale: float = 1.0,
                     g_norm: float = 0.0, init_scale: float = 1.0
                     ) -> AuditResult:
    """Assemble the bound for a constrained family and audit it empirically.

    Centers are drawn away from the walls so every bump support is interior.
    f_scale deliberately corrupts the bound constant for inversion checks.
    """
    lo, hi = grid.lo, grid.hi
    pad = 1.0 / bump_c + 2.0 / min(grid.nodes_per_dim)
    if np.any(hi - lo <= 2 * pad):
        raise ValueError("bump too wide for interior supports on this box")
    centers = CollocationSet.draw(lo + pad, hi - pad, n_centers, seed)
    tfs = [TestFunction(x, bump_c, grid) for x in centers.points]
    f_const = estimate_f_constant(op, tfs, grid) * f_scale
    family = ParamFamily.draw(dims, activations, family_size, det_cap,
                              seed + 1, init_scale)
    u_max = max(norm_proxy_from_params(m)[0] for m in family.members)
    eps = getattr(op, "taylor_eps", 0.0)
    report = assemble_bound(op.tag, f_const, op.r, n_centers,
                            norm_proxy=u_max, taylor_eps=eps, g_norm=g_norm)
    values = weak_value_matrix(family, op, tfs, grid)
    est, stderr = empirical_rademacher(values, draws, seed + 2)
    return audit_bound(f"rademacher-{op.tag}", est, stderr, report, seed,
                       detail={"norm_proxy": u_max,
                               "f_constant": f_const,
                               "family_size": family_size,
                               "rescale_events": family.rescale_events,
                               "draws": draws})


# ---------------------------------------------------------------------------
# composition-operator norm audit (1-d)


def tanh_norm_audit(a: float, n_funcs: int = 200, seed: int = 0,
                    grid_n: int = 4096, max_modes: int = 8) -> dict:
    """Empirical sup ||h o tanh|| / ||h|| over random trigonometric h.

    The closed-form bound is cosh(a): the squared operator norm is bounded by
    sup 1/(1 - y^2) over y in tanh([-a, a]).  Also reports the dense-grid sup
    of that Jacobian factor for comparison with cosh(a)^2.
    """
    if a <= 0:
        raise ValueError("need a positive half-width")
    t = math.tanh(a)
    xs = -a + 2 * a * (np.arange(grid_n) + 0.5) / grid_n    # midpoints, [-a, a]
    ys = -t + 2 * t * (np.arange(grid_n) + 0.5) / grid_n    # midpoints, image
    wx = 2 * a / grid_n
    wy = 2 * t / grid_n
    rng = np.random.default_rng(seed)
    worst = 0.0
    tanh_xs = np.tanh(xs)
    for _ in range(n_funcs):
        k = np.arange(1, max_modes + 1)
        ac = rng.normal(size=max_modes)
        bc = rng.normal(size=max_modes)
        c0 = rng.normal()

        def h(y):
            phase = np.pi * np.outer(y + t, k) / (2 * t)
            return c0 + np.cos(phase) @ ac + np.sin(phase) @ bc

        num = float(np.sum(h(tanh_xs) ** 2) * wx)
        den = float(np.sum(h(ys) ** 2) * wy)
        worst = max(worst, math.sqrt(num / den))
    dense = np.linspace(-a, a, 100001)
    jac_sup = float(np.max(1.0 / (1.0 - np.tanh(dense) ** 2)))
    return {"a": a, "empirical_norm": worst, "bound": math.cosh(a),
            "jacobian_sup": jac_sup, "jacobian_closed_form": math.cosh(a) ** 2,
            "passed": worst <= math.cosh(a) + 1e-6}


# ---------------------------------------------------------------------------
# adjoint identity


def random_smooth_fields(dim: int, n_fields: int, seed: int,
                         max_freq: float = 1.5):
    """Random fields with analytic gradients: affine plus plane waves.

    Returned as (u, du) closure pairs; du(x, i) is the exact i-th partial.
    The affine part keeps the family anchored to the integration-by-parts
    example that a constant gradient must reproduce exactly in continuum.
    """
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(n_fields):
        waves = rng.uniform(-max_freq, max_freq, size=(4, dim))
        amps = rng.normal(size=4)
        phases = rng.uniform(0, 2 * np.pi, size=4)
        slope = rng.normal(size=dim)
        const = rng.normal()

        def u(x, w=waves, a=amps, ph=phases, s=slope, c=const):
            return np.sin(x @ w.T + ph) @ a + x @ s + c

        def du(x, i, w=waves, a=amps, ph=phases, s=slope):
            return np.cos(x @ w.T + ph) @ (a * w[:, i]) + s[i]

        fields.append((u, du))
    return fields


def adjoint_identity_check(tf: TestFunction, grid: QuadratureGrid,
                           n_fields: int = 20, seed: int = 0) -> float:
    """max relative discrepancy of <p, d_i u> = <-d_i p, u> over random
    smooth fields and axes, normalized by the Cauchy-Schwarz scale of the
    two sides (||p|| ||d_i u|| + ||d_i p|| ||u||).

    Valid only when the bump support is strictly interior to the box, which
    is what kills the boundary terms in the integration by parts.
    """
    if not tf.support_inside(grid.lo, grid.hi):
        raise ValueError("support touches the boundary: identity is invalid")
    if n_fields < 1:
        raise ValueError("need at least one field")
    p = tf.values(grid.nodes)
    gp = tf.gradient(grid.nodes)
    p_norm = math.sqrt(integrate(p * p, grid))
    worst = 0.0
    for u, du in random_smooth_fields(grid.dim, n_fields, seed):
        uv = u(grid.nodes)
        u_norm = math.sqrt(integrate(uv * uv, grid))
        for i in range(grid.dim):
            duv = du(grid.nodes, i)
            lhs = integrate(p * duv, grid)
            rhs = integrate(-gp[:, i] * uv, grid)
            scale = (p_norm * math.sqrt(integrate(duv * duv, grid))
                     + math.sqrt(integrate(gp[:, i] ** 2, grid)) * u_norm)
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def cauchy_schwarz_check(grid: QuadratureGrid, n_pairs: int = 50,
                         seed: int = 0) -> float:
    """max violation of |<a,b>| <= ||a|| ||b|| under the quadrature product."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n_pairs):
        a = rng.normal(size=grid.n_nodes)
        b = rng.normal(size=grid.n_nodes)
        ip = integrate(a * b, grid)
        na = math.sqrt(integrate(a * a, grid))
        nb = math.sqrt(integrate(b * b, grid))
        worst = max(worst, abs(ip) - na * nb)
    return worst


# ---------------------------------------------------------------------------
# shipped audit suite


def default_audit_suite(seed: int = 0, draws: int = 4000,
                        family_size: int = 50) -> dict:
    """Run every audit at desk scale and return a structured report.

    Covers the three bound shapes (each with a corrupted-constant inversion),
    the 1-d composition-norm check, the adjoint identity, and Cauchy-Schwarz.
    """
    from .operators import (GradientSum2D, NavierStokes2D,
                            ParabolicMongeAmpere)

    grid2 = QuadratureGrid((0.0, 0.0), (1.0, 1.0), 40)
    grid3 = QuadratureGrid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 16)
    # narrow single-hidden-layer families with moderate weight scale: keeps
    # the norm proxy O(10) so the F/1e6 corruption actually flips the audit
    cases = [
        (GradientSum2D(), (2, 3, 1), ("tanh", "none"), grid2, 1.0),
        (NavierStokes2D(re=100.0), (2, 4, 3), ("tanh", "none"), grid2, 0.6),
        (ParabolicMongeAmpere(z0=2.0, taylor_radius=1.0), (3, 2, 1),
         ("tanh", "none"), grid3, 0.7),
    ]
    audits = []
    for op, dims, acts, grid, init_scale in cases:
        kwargs = dict(op=op, dims=dims, activations=acts, n_centers=5,
                      bump_c=4.0, grid=grid, family_size=family_size,
                      draws=draws, det_cap=10.0, seed=seed,
                      init_scale=init_scale)
        honest = rademacher_audit(**kwargs)
        corrupted = rademacher_audit(f_scale=1e-6, **kwargs)
        corrupted.name += "-corrupted"
        corrupted.detail["expected"] = "fail"
        audits.append(honest)
        audits.append(corrupted)

    norm_checks = [tanh_norm_audit(a, seed=seed) for a in (0.5, 1.0, 2.0)]

    grid_fine = QuadratureGrid((0.0, 0.0), (1.0, 1.0), 50)
    tf = TestFunction(np.array([0.5, 0.5]), 4.0, grid_fine)
    adjoint_disc = adjoint_identity_check(tf, grid_fine, n_fields=20,
                                          seed=seed)
    cs_violation = cauchy_schwarz_check(grid2, seed=seed)

    ok = (all(a.passed for a in audits if "corrupted" not in a.name)
          and all(not a.passed for a in audits if "corrupted" in a.name)
          and all(c["passed"] for c in norm_checks)
          and adjoint_disc < 1e-4 and cs_violation <= 1e-12)
    return {
        "seed": seed,
        "draws": draws,
        "rademacher": [a.to_dict() for a in audits],
        "tanh_norm": norm_checks,
        "adjoint_identity_max_discrepancy": adjoint_disc,
        "cauchy_schwarz_max_violation": cs_violation,
        "passed": bool(ok),
    }
