"""Physics-informed network training with auditable operator-norm
generalization bounds: weak/strong residual losses, a differentiable
conditioning regularizer, bound assembly for three operator shapes, and
Monte-Carlo audits of the assembled inequalities."""

__version__ = "0.1.0"

from .autodiff import (DegenerateLayerError, GradTape, NonFiniteError, Var,
                       fd_check, spectral_norm, svd_geomean)
from .bounds import (BoundReport, LayerBoundFactors, assemble_bound,
                     a_tilde, koopman_factor, koopman_factor_sum,
                     koopman_regularizer, log_koopman_factor,
                     norm_proxy_from_params, propagate_boxes,
                     regularizer_value)
from .network import (InputNormalizer, JetBatch, MlpParams, forward,
                      init_glorot, load_snapshot, propagate_jets,
                      save_snapshot)
from .operators import (GradientSum2D, NavierStokes2D, ParabolicMongeAmpere,
                        estimate_f_constant, estimate_taylor_remainder,
                        ns_residual, pma_default_source, pma_residual)
from .testfn import (CollocationSet, QuadratureGrid, TestFunction, bump_eval,
                     delta_limit_check, integrate, test_function_matrix,
                     weak_residual)
from .training import (AdamState, ExperimentLog, TrainConfig, adam_step,
                       boundary_points, build_operator, train)
from .verify import (AuditResult, ParamFamily, adjoint_identity_check,
                     audit_bound, cauchy_schwarz_check, default_audit_suite,
                     empirical_rademacher, rademacher_audit, tanh_norm_audit,
                     weak_value_matrix)
from .config import load_config, parse_config, save_config, config_to_ini
from .cli import pearson

__all__ = [
    "AdamState", "AuditResult", "BoundReport", "CollocationSet",
    "DegenerateLayerError", "ExperimentLog", "GradTape", "GradientSum2D",
    "InputNormalizer", "JetBatch", "LayerBoundFactors", "MlpParams",
    "NavierStokes2D", "NonFiniteError", "ParabolicMongeAmpere", "ParamFamily",
    "QuadratureGrid", "TestFunction", "TrainConfig", "Var",
    "a_tilde", "adam_step", "adjoint_identity_check", "assemble_bound",
    "audit_bound", "boundary_points", "build_operator", "bump_eval",
    "cauchy_schwarz_check", "config_to_ini", "default_audit_suite",
    "delta_limit_check", "empirical_rademacher", "estimate_f_constant",
    "estimate_taylor_remainder", "fd_check", "forward", "init_glorot",
    "integrate", "koopman_factor", "koopman_factor_sum",
    "koopman_regularizer", "load_config", "load_snapshot",
    "log_koopman_factor", "norm_proxy_from_params", "ns_residual",
    "parse_config", "pearson", "pma_default_source", "pma_residual",
    "propagate_boxes", "propagate_jets", "rademacher_audit",
    "regularizer_value", "save_config", "save_snapshot", "spectral_norm",
    "svd_geomean", "tanh_norm_audit", "test_function_matrix", "train",
    "weak_residual", "weak_value_matrix",
]
