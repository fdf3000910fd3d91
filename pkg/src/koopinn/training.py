"""Training loop for strong-form and weak-form physics losses.

Loss composition (z -> z^2 on every term):

    total = residual + lambda_bc * boundary + lambda_p * pressure_pin [+ reg]

In weak mode the residual term is (1/N) sum_n sum_c (V_nc - proj_nc)^2 where
V_nc integrates the source-free residual channel against test function n and
proj_nc integrates the source; in strong mode it is the mean over collocation
points of the summed squared source-inclusive channels.  The test loss is the
same functional on a held-out collocation set drawn with an independent seed.

Seeds: weights use cfg.seed, the training collocation stream uses
cfg.seed + 100003, the held-out set uses cfg.test_seed (shared across runs so
runs are comparable).  Every run is bit-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (GradTape, NonFiniteError, Tensor, check_finite, matmul,
                       reshape, square, vsum)
from .bounds import assemble_bound, koopman_regularizer, BoundReport
from .network import (InputNormalizer, MlpParams, init_glorot,
                      traced_jets, traced_layer_params)
from .operators import (GradientSum2D, NavierStokes2D, ParabolicMongeAmpere,
                        estimate_f_constant)
from .testfn import CollocationSet, QuadratureGrid, TestFunction

LOG_COLUMNS = ("step", "loss_total", "loss_res", "loss_bc", "loss_p",
               "loss_reg", "loss_test")

OPERATORS = ("navier-stokes", "parabolic-monge-ampere", "gradient-sum")
MODES = ("vpinn", "pinn")


@dataclass(frozen=True)
class TrainConfig:
    operator: str = "navier-stokes"
    mode: str = "vpinn"
    seed: int = 0
    steps: int = 5000
    lr: float = 1e-3
    width: int = 64
    hidden_layers: int = 3
    n_collocation: int = 100
    n_boundary: int | None = None     # operator default: 240 flow / 720 log-det
    grid_nodes: tuple[int, ...] | None = None
    bump_c: float = 0.1
    lambda_bc: float = 0.1
    lambda_p: float = 0.1
    regularize: bool = True
    reg_weight: float = 0.01
    reynolds: float = 100.0
    z0: float = 1.0
    det_clamp: float = 1e-8
    taylor_r: int = 3
    taylor_radius: float = 0.9
    boundary_value: float = 0.0
    n_test: int = 100
    test_seed: int = 999331
    log_every: int = 100

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.steps < 0 or self.n_collocation < 1 or self.lr <= 0:
            raise ValueError("bad steps / collocation / lr")

    @property
    def input_dim(self) -> int:
        return 3 if self.operator == "parabolic-monge-ampere" else 2

    @property
    def output_dim(self) -> int:
        return 3 if self.operator == "navier-stokes" else 1

    @property
    def dims(self) -> list[int]:
        return ([self.input_dim] + [self.width] * self.hidden_layers
                + [self.output_dim])

    @property
    def activations(self) -> list[str]:
        return ["tanh"] * self.hidden_layers + ["none"]

    def resolved_boundary(self) -> int:
        if self.n_boundary is not None:
            return self.n_boundary
        return 720 if self.operator == "parabolic-monge-ampere" else 240

    def resolved_grid(self) -> tuple[int, ...]:
        if self.grid_nodes is not None:
            return tuple(self.grid_nodes)
        return (25,) * self.input_dim

    def hash(self) -> str:
        items = sorted(self.__dict__.items())
        blob = ";".join(f"{k}={v!r}" for k, v in items)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_operator(cfg: TrainConfig):
    if cfg.operator == "navier-stokes":
        return NavierStokes2D(cfg.reynolds)
    if cfg.operator == "parabolic-monge-ampere":
        return ParabolicMongeAmpere(z0=cfg.z0, det_clamp=cfg.det_clamp,
                                    r=cfg.taylor_r,
                                    taylor_radius=cfg.taylor_radius)
    return GradientSum2D()


# ---------------------------------------------------------------------------
# boundary sampling


def boundary_points(cfg: TrainConfig, normalizer: InputNormalizer
                    ) -> tuple[Tensor, Tensor, slice]:
    """Deterministic boundary batch: (points, targets, output slice).

    Flow domain: equal midpoint counts per edge; the moving lid (top edge)
    gets velocity [1, 0], everything else zero.  Log-det domain: the four
    spatial edges crossed with time, Dirichlet value cfg.boundary_value.
    """
    lo, hi = normalizer.lo, normalizer.hi
    n = cfg.resolved_boundary()
    if n % 4:
        raise ValueError("boundary count must split evenly over 4 edges")
    per_edge = n // 4
    if cfg.operator == "parabolic-monge-ampere":
        n_t = 1
        for cand in range(int(math.sqrt(per_edge)), 0, -1):
            if per_edge % cand == 0:
                n_t = cand
                break
        n_s = per_edge // n_t
        s = lo[0] + (hi[0] - lo[0]) * (np.arange(n_s) + 0.5) / n_s
        t = lo[2] + (hi[2] - lo[2]) * (np.arange(n_t) + 0.5) / n_t
        ss, tt = np.meshgrid(s, t, indexing="ij")
        ss, tt = ss.ravel(), tt.ravel()
        edges = [
            np.stack([ss, np.full_like(ss, lo[1]), tt], axis=1),
            np.stack([np.full_like(ss, hi[0]), ss, tt], axis=1),
            np.stack([ss, np.full_like(ss, hi[1]), tt], axis=1),
            np.stack([np.full_like(ss, lo[0]), ss, tt], axis=1),
        ]
        pts = np.concatenate(edges, axis=0)
        targets = np.full((n, 1), cfg.boundary_value)
        return pts, targets, slice(0, 1)

    s = lo[0] + (hi[0] - lo[0]) * (np.arange(per_edge) + 0.5) / per_edge
    edges = [
        np.stack([s, np.full_like(s, lo[1])], axis=1),       # bottom
        np.stack([np.full_like(s, hi[0]), s], axis=1),       # right
        np.stack([s, np.full_like(s, hi[1])], axis=1),       # top (lid)
        np.stack([np.full_like(s, lo[0]), s], axis=1),       # left
    ]
    pts = np.concatenate(edges, axis=0)
    if cfg.operator == "gradient-sum":
        return pts, np.full((n, 1), cfg.boundary_value), slice(0, 1)
    targets = np.zeros((n, 2))
    # the lid rule is applied last, so any point on the top edge moves
    targets[pts[:, 1] == hi[1]] = (1.0, 0.0)
    return pts, targets, slice(0, 2)


# ---------------------------------------------------------------------------
# loss terms (traced)


def vpinn_loss(chans, proj_matrix: Tensor, projections: Tensor):
    """(1/N) sum_n sum_c (V_nc - proj_nc)^2.

    chans: traced source-free residual channels on the quadrature nodes.
    proj_matrix: (N, nodes) rows of p_n already scaled by the cell weight.
    projections: (N, C) quadrature of the source against each p_n.
    """
    n_tf = proj_matrix.shape[0]
    total = None
    for c, ch in enumerate(chans):
        v = matmul(proj_matrix, reshape(ch, (ch.value.size, 1)))
        gap = v - projections[:, c:c + 1]
        term = vsum(square(gap))
        total = term if total is None else total + term
    return total * (1.0 / n_tf)


def pinn_loss(chans):
    """Mean over points of the summed squared source-inclusive channels."""
    n = chans[0].value.size
    total = None
    for ch in chans:
        term = vsum(square(ch))
        total = term if total is None else total + term
    return total * (1.0 / n)


def bc_loss(values, targets: Tensor, out: slice):
    """Mean squared mismatch of the constrained output components."""
    diff = values[:, out] - targets
    return vsum(square(diff)) * (1.0 / targets.shape[0])


def pressure_pin_loss(values):
    """Squared pressure at the pinned point (single-row batch)."""
    return square(values[0, 2])


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: Tensor
    v: Tensor
    t: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n), 0)


def adam_step(theta: Tensor, grad: Tensor, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
              ) -> tuple[Tensor, AdamState]:
    if theta.shape != grad.shape:
        raise ValueError("parameter/gradient shape mismatch")
    check_finite(grad, "adam gradient")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


# ---------------------------------------------------------------------------
# experiment log


@dataclass
class ExperimentLog:
    config: TrainConfig
    rows: list[dict] = field(default_factory=list)
    status: str = "ok"
    clamp_events: int = 0
    final_params: MlpParams | None = None
    bound_report: BoundReport | None = None

    @property
    def config_hash(self) -> str:
        return self.config.hash()

    @property
    def final_test_loss(self) -> float:
        return self.rows[-1]["loss_test"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for row in self.rows:
            w.writerow([row[c] if c == "step" else repr(row[c])
                        for c in LOG_COLUMNS])

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# the loop


def train(cfg: TrainConfig) -> ExperimentLog:
    op = build_operator(cfg)
    normalizer = op.normalizer
    lo, hi = normalizer.lo, normalizer.hi
    params = init_glorot(cfg.dims, cfg.activations, cfg.seed)

    colloc = CollocationSet.draw(lo, hi, cfg.n_collocation, cfg.seed + 100003)
    test_set = CollocationSet.draw(lo, hi, cfg.n_test, cfg.test_seed)
    bc_pts, bc_targets, bc_slice = boundary_points(cfg, normalizer)
    bc_norm = normalizer.apply(bc_pts)
    use_pressure = op.output_dim == 3
    pin_norm = normalizer.apply((lo + hi)[None, :] / 2.0)

    grid = None
    proj_train = proj_test = None
    p_train_w = p_test_w = None
    if cfg.mode == "vpinn":
        grid = QuadratureGrid(lo, hi, cfg.resolved_grid())
        tf_train = [TestFunction(x, cfg.bump_c, grid) for x in colloc.points]
        tf_test = [TestFunction(x, cfg.bump_c, grid) for x in test_set.points]
        p_train_w = np.stack([tf.values(grid.nodes) for tf in tf_train]) \
            * grid.weight
        p_test_w = np.stack([tf.values(grid.nodes) for tf in tf_test]) \
            * grid.weight
        src = op.source_field(grid.nodes)
        proj_train = p_train_w @ src
        proj_test = p_test_w @ src
        eval_pts = grid.nodes
    else:
        eval_pts = colloc.points
    eval_norm = normalizer.apply(eval_pts)
    test_norm = normalizer.apply(test_set.points)

    theta = params.flatten()
    adam = AdamState.zeros(theta.size)
    log = ExperimentLog(config=cfg)
    lam_p = cfg.lambda_p if use_pressure else 0.0

    def eval_test_pinn(p: MlpParams) -> float:
        tape = GradTape()
        layers = traced_layer_params(tape, p)
        v, jac, hes = traced_jets(layers, test_norm, 2, normalizer.scale)
        chans, _ = op.residual_channels(v, jac, hes, test_set.points, True)
        return float(pinn_loss(chans).value)

    step = 0
    try:
        while True:
            params = params.with_flat(theta)
            tape = GradTape()
            layers = traced_layer_params(tape, params)
            v, jac, hes = traced_jets(layers, eval_norm, 2, normalizer.scale)
            if cfg.mode == "vpinn":
                chans, clamps = op.residual_channels(v, jac, hes, eval_pts,
                                                     include_source=False)
                loss_res = vpinn_loss(chans, p_train_w, proj_train)
            else:
                chans, clamps = op.residual_channels(v, jac, hes, eval_pts,
                                                     include_source=True)
                loss_res = pinn_loss(chans)
            log.clamp_events += clamps

            v_bc, _, _ = traced_jets(layers, bc_norm, 0)
            loss_bc = bc_loss(v_bc, bc_targets, bc_slice)
            total = loss_res + cfg.lambda_bc * loss_bc
            if use_pressure:
                v_pin, _, _ = traced_jets(layers, pin_norm, 0)
                loss_p = pressure_pin_loss(v_pin)
                total = total + lam_p * loss_p
            else:
                loss_p = None
            if cfg.regularize:
                loss_reg = koopman_regularizer(layers, cfg.reg_weight)
                total = total + loss_reg
            else:
                loss_reg = None

            logged = step % cfg.log_every == 0 or step == cfg.steps
            if logged:
                if cfg.mode == "vpinn":
                    res_field = np.stack([c.value for c in chans], axis=1)
                    gaps = p_test_w @ res_field - proj_test
                    loss_test = float(np.sum(gaps * gaps) / gaps.shape[0])
                else:
                    loss_test = eval_test_pinn(params)
                log.rows.append({
                    "step": step,
                    "loss_total": float(total.value),
                    "loss_res": float(loss_res.value),
                    "loss_bc": float(loss_bc.value),
                    "loss_p": 0.0 if loss_p is None else float(loss_p.value),
                    "loss_reg": 0.0 if loss_reg is None else float(loss_reg.value),
                    "loss_test": loss_test,
                })
            if step == cfg.steps:
                break
            grads = tape.gradients(total)
            flat = np.concatenate([g.ravel() for g in grads])
            check_finite(flat, "training gradient")
            theta, adam = adam_step(theta, flat, adam, cfg.lr)
            check_finite(theta, "parameters")
            step += 1
    except NonFiniteError:
        log.status = "aborted"

    log.final_params = params
    log.bound_report = final_bound_report(cfg, op, params)
    return log


def final_bound_report(cfg: TrainConfig, op, params: MlpParams) -> BoundReport:
    """Assemble the bound for the trained network against its test functions."""
    grid = QuadratureGrid(op.normalizer.lo, op.normalizer.hi,
                          cfg.resolved_grid())
    centers = CollocationSet.draw(op.normalizer.lo, op.normalizer.hi,
                                  cfg.n_collocation, cfg.seed + 100003)
    tfs = [TestFunction(x, cfg.bump_c, grid) for x in centers.points]
    f_const = estimate_f_constant(op, tfs, grid)
    eps = getattr(op, "taylor_eps", 0.0)
    r = op.r
    return assemble_bound(op.tag, f_const, r, cfg.n_collocation,
                          params=params, taylor_eps=eps)
