import math

import numpy as np
import pytest

from koopinn.bounds import assemble_bound
from koopinn.operators import GradientSum2D
from koopinn.testfn import QuadratureGrid, TestFunction
from koopinn.verify import (ParamFamily, adjoint_identity_check, audit_bound,
                            cauchy_schwarz_check, default_audit_suite,
                            empirical_rademacher, rademacher_audit,
                            random_smooth_fields, tanh_norm_audit,
                            weak_value_matrix)


def unit_grid(n):
    return QuadratureGrid((0.0, 0.0), (1.0, 1.0), n)


def test_rademacher_zero_values():
    est, stderr = empirical_rademacher(np.zeros((3, 7)), 100, 0)
    assert est == 0.0 and stderr == 0.0


def test_rademacher_singleton_centers_on_zero():
    v = np.array([[1.0, 2.0, 3.0, 4.0, 5.0]])
    est, stderr = empirical_rademacher(v, 2000, 3)
    assert abs(est) <= 4.0 * stderr


def test_rademacher_sign_symmetric_pair_exact():
    # sup over {v, -v} is |eps . v| / N, constant when N = 1
    v = np.array([[2.5], [-2.5]])
    est, stderr = empirical_rademacher(v, 50, 0)
    assert est == 2.5 and stderr == 0.0


def test_rademacher_stderr_scales_with_draws():
    v = np.random.default_rng(7).normal(size=(20, 5))
    _, s1 = empirical_rademacher(v, 1000, 11)
    _, s4 = empirical_rademacher(v, 4000, 11)
    assert 1.7 < s1 / s4 < 2.3


def test_rademacher_validation():
    with pytest.raises(ValueError):
        empirical_rademacher(np.zeros(5), 100, 0)
    with pytest.raises(ValueError):
        empirical_rademacher(np.zeros((2, 5)), 1, 0)


def test_family_draw_deterministic():
    a = ParamFamily.draw((2, 3, 1), ("tanh", "none"), 5, 10.0, 0)
    b = ParamFamily.draw((2, 3, 1), ("tanh", "none"), 5, 10.0, 0)
    assert len(a.members) == 5
    for ma, mb in zip(a.members, b.members):
        assert all(np.array_equal(wa, wb)
                   for wa, wb in zip(ma.weights, mb.weights))


def test_family_det_cap_honored():
    from koopinn.bounds import RANK_TOL
    fam = ParamFamily.draw((2, 4, 2), ("tanh", "none"), 6, 10.0, 1,
                           init_scale=1e-3)
    assert fam.rescale_events > 0      # tiny scale forces rescaling
    for m in fam.members:
        for w in m.weights:
            s = np.linalg.svd(w, compute_uv=False)
            pos = s[s > RANK_TOL]
            assert float(np.exp(-0.5 * np.sum(np.log(pos)))) <= 10.0


def test_weak_value_matrix_shape():
    op = GradientSum2D()
    grid = unit_grid(20)
    fam = ParamFamily.draw((2, 3, 1), ("tanh", "none"), 4, 10.0, 0)
    tfs = [TestFunction(np.array(c), 4.0, grid)
           for c in ((0.4, 0.4), (0.6, 0.5), (0.5, 0.6))]
    v = weak_value_matrix(fam, op, tfs, grid)
    assert v.shape == (4, 3)
    assert np.all(np.isfinite(v))


def test_audit_bound_one_sided():
    report = assemble_bound("linear", f_constant=2.0, r=1, n=4,
                            norm_proxy=1.0)
    assert report.assembled_bound == 1.0
    ok = audit_bound("x", 0.9, 0.0, report, 0)
    assert ok.passed and ok.margin == pytest.approx(0.1)
    bad = audit_bound("x", 2.0, 0.1, report, 0)
    assert not bad.passed and bad.margin < 0
    # stderr slack: a noisy estimate just above the bound still passes
    noisy = audit_bound("x", 1.05, 0.1, report, 0)
    assert noisy.passed


def test_audit_result_dict_fields():
    report = assemble_bound("linear", f_constant=2.0, r=1, n=4,
                            norm_proxy=1.0)
    d = audit_bound("x", 0.5, 0.01, report, 7, detail={"draws": 9}).to_dict()
    assert d["name"] == "x" and d["seed"] == 7 and d["draws"] == 9
    assert set(d) >= {"estimate", "stderr", "bound", "margin", "passed"}


def test_rademacher_audit_honest_and_corrupted():
    op = GradientSum2D()
    grid = unit_grid(30)
    kwargs = dict(op=op, dims=(2, 3, 1), activations=("tanh", "none"),
                  n_centers=3, bump_c=4.0, grid=grid, family_size=8,
                  draws=500, det_cap=10.0, seed=0)
    honest = rademacher_audit(**kwargs)
    assert honest.passed and honest.margin > 0
    assert honest.detail["family_size"] == 8
    corrupted = rademacher_audit(f_scale=1e-6, **kwargs)
    assert not corrupted.passed
    assert corrupted.estimate == honest.estimate   # same family, same draws


def test_rademacher_audit_rejects_wall_hugging_bumps():
    op = GradientSum2D()
    with pytest.raises(ValueError):
        rademacher_audit(op, (2, 3, 1), ("tanh", "none"), 3, 0.5,
                         unit_grid(30), 4, 100, 10.0, 0)


def test_tanh_norm_audit_closed_form():
    out = tanh_norm_audit(0.5, n_funcs=50, seed=0)
    assert out["bound"] == math.cosh(0.5)
    assert out["jacobian_closed_form"] == math.cosh(0.5) ** 2
    assert abs(out["jacobian_sup"] - math.cosh(0.5) ** 2) < 1e-6
    assert out["empirical_norm"] <= out["bound"] + 1e-6
    assert out["passed"]


def test_tanh_norm_audit_validation():
    with pytest.raises(ValueError):
        tanh_norm_audit(0.0)


def test_random_smooth_fields_gradients_exact():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.1, 0.9, size=(6, 2))
    h = 1e-6
    for u, du in random_smooth_fields(2, 3, seed=2):
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (u(pts + e) - u(pts - e)) / (2 * h)
            assert np.allclose(du(pts, i), fd, rtol=1e-6, atol=1e-6)


def test_adjoint_identity_small_and_refining():
    g30 = unit_grid(30)
    d30 = adjoint_identity_check(TestFunction(np.array([0.5, 0.5]), 4.0, g30),
                                 g30, n_fields=6, seed=0)
    assert d30 < 1e-3
    g60 = unit_grid(60)
    d60 = adjoint_identity_check(TestFunction(np.array([0.5, 0.5]), 4.0, g60),
                                 g60, n_fields=6, seed=0)
    assert d30 / d60 > 2.0             # second-order quadrature error


def test_adjoint_identity_requires_interior_support():
    g = unit_grid(30)
    tf = TestFunction(np.array([0.5, 0.5]), 4.0, g)
    with pytest.raises(ValueError):
        adjoint_identity_check(TestFunction(np.array([0.05, 0.5]), 4.0, g), g)
    with pytest.raises(ValueError):
        adjoint_identity_check(tf, g, n_fields=0)


def test_cauchy_schwarz_never_violated():
    assert cauchy_schwarz_check(unit_grid(25), seed=0) <= 1e-12


def test_default_suite_reduced_scale():
    suite = default_audit_suite(seed=0, draws=300, family_size=10)
    assert suite["passed"] is True
    assert len(suite["rademacher"]) == 6
    names = [a["name"] for a in suite["rademacher"]]
    assert sum("corrupted" in n for n in names) == 3
    for a in suite["rademacher"]:
        assert a["passed"] == ("corrupted" not in a["name"])
    assert len(suite["tanh_norm"]) == 3
    assert suite["adjoint_identity_max_discrepancy"] < 1e-4
    assert suite["cauchy_schwarz_max_violation"] <= 1e-12
