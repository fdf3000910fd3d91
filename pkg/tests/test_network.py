import numpy as np
import pytest

from koopinn.autodiff import GradTape, fd_check, loss_param_grad, vsum, square
from koopinn.network import (InputNormalizer, MlpParams, forward, init_glorot,
                             load_snapshot, propagate_jets, save_snapshot,
                             traced_jets, traced_layer_params)


def small_net(seed=0):
    return init_glorot([2, 5, 3], ["tanh", "none"], seed=seed)


def test_init_glorot_deterministic_and_bounded():
    p1 = small_net(seed=7)
    p2 = small_net(seed=7)
    for w1, w2 in zip(p1.weights, p2.weights):
        assert np.array_equal(w1, w2)
    assert p1.dims == [2, 5, 3]
    assert all(np.all(b == 0.0) for b in p1.biases)
    limit0 = np.sqrt(6.0 / (2 + 5))
    assert np.all(np.abs(p1.weights[0]) <= limit0)
    assert not np.array_equal(small_net(seed=8).weights[0], p1.weights[0])


def test_init_glorot_validation():
    with pytest.raises(ValueError):
        init_glorot([2, 3], ["tanh", "none"], seed=0)


def test_params_validation():
    w = np.ones((3, 2))
    with pytest.raises(ValueError):
        MlpParams((w,), (np.zeros(2),), ("tanh",))       # bias shape
    with pytest.raises(ValueError):
        MlpParams((w,), (np.zeros(3),), ("relu",))       # unknown activation
    with pytest.raises(ValueError):
        MlpParams((w, np.ones((2, 4))), (np.zeros(3), np.zeros(2)),
                  ("tanh", "none"))                       # dims do not chain


def test_flatten_roundtrip():
    p = small_net()
    flat = p.flatten()
    assert flat.size == p.n_params
    q = p.with_flat(flat * 2.0)
    assert np.array_equal(q.weights[0], p.weights[0] * 2.0)
    r = q.with_flat(flat)
    for w1, w2 in zip(r.weights, p.weights):
        assert np.array_equal(w1, w2)
    with pytest.raises(ValueError):
        p.with_flat(flat[:-1])


def test_jets_match_fd():
    p = small_net(seed=1)
    x = np.array([[0.3, -0.4], [0.1, 0.8]])
    jets = propagate_jets(p, x, order=2)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd_j = (propagate_jets(p, x + e, 0).value
                - propagate_jets(p, x - e, 0).value) / (2 * h)
        assert np.max(np.abs(jets.jacobian[:, :, i] - fd_j)) < 1e-6
        fd_h = (propagate_jets(p, x + e, 1).jacobian
                - propagate_jets(p, x - e, 1).jacobian) / (2 * h)
        assert np.max(np.abs(jets.hessian[:, :, :, i] - fd_h)) < 1e-5


def test_hessian_exactly_symmetric():
    p = init_glorot([3, 6, 6, 2], ["tanh", "tanh", "none"], seed=5)
    x = np.random.default_rng(0).uniform(-1, 1, size=(7, 3))
    h = propagate_jets(p, x, order=2).hessian
    assert np.array_equal(h, np.swapaxes(h, 2, 3))


def test_propagate_orders():
    p = small_net()
    x = np.zeros((1, 2))
    j0 = propagate_jets(p, x, order=0)
    assert j0.jacobian is None and j0.hessian is None
    j1 = propagate_jets(p, x, order=1)
    assert j1.jacobian is not None and j1.hessian is None
    with pytest.raises(ValueError):
        propagate_jets(p, x, order=3)
    with pytest.raises(ValueError):
        propagate_jets(p, np.zeros((1, 3)), order=0)


def test_linear_net_has_zero_hessian():
    p = MlpParams((np.array([[1.0, 2.0], [0.5, -1.0]]),), (np.zeros(2),),
                  ("none",))
    jets = propagate_jets(p, np.array([[0.2, 0.4]]), order=2)
    assert np.all(jets.hessian == 0.0)
    assert np.allclose(jets.jacobian[0], p.weights[0])


def test_normalizer_maps_box_to_unit():
    n = InputNormalizer(np.array([0.0, -2.0]), np.array([1.0, 2.0]))
    assert np.allclose(n.apply(np.array([[0.0, -2.0]])), [[-1.0, -1.0]])
    assert np.allclose(n.apply(np.array([[1.0, 2.0]])), [[1.0, 1.0]])
    assert n.contains(np.array([[0.5, 0.0]]))[0]
    assert not n.contains(np.array([[1.5, 0.0]]))[0]
    with pytest.raises(ValueError):
        InputNormalizer(np.array([1.0]), np.array([1.0]))


def test_forward_physical_chain_rule():
    p = small_net(seed=2)
    norm = InputNormalizer(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    x = np.array([[0.3, 0.7]])
    jets = forward(p, norm, x, order=2)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (forward(p, norm, x + e, 0).value
              - forward(p, norm, x - e, 0).value) / (2 * h)
        assert np.max(np.abs(jets.jacobian[:, :, i] - fd)) < 1e-6


def test_forward_rejects_points_outside_box():
    p = small_net()
    norm = InputNormalizer(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        forward(p, norm, np.array([[1.2, 0.5]]))


def test_parameter_gradients_through_jets():
    x = np.array([[0.25, -0.5], [0.7, 0.3]])

    def f(flat):
        base = small_net(seed=3)
        p = base.with_flat(flat)
        tape = GradTape()
        layers = traced_layer_params(tape, p)
        v, jac, _ = traced_jets(layers, x, 1)
        return vsum(square(v)) + vsum(square(jac))

    flat0 = small_net(seed=3).flatten()
    assert fd_check(f, flat0, 1e-6) < 1e-5


def test_snapshot_roundtrip_bit_exact(tmp_path):
    p = small_net(seed=9)
    path = tmp_path / "net.json"
    save_snapshot(path, p, domain_lo=(0.0, 0.0), domain_hi=(1.0, 1.0))
    q, norm = load_snapshot(path)
    for w1, w2 in zip(p.weights, q.weights):
        assert np.array_equal(w1, w2)
    for b1, b2 in zip(p.biases, q.biases):
        assert np.array_equal(b1, b2)
    assert q.activations == p.activations
    assert q.seed == 9
    assert norm is not None and norm.dim == 2


def test_snapshot_version_check(tmp_path):
    p = small_net()
    path = tmp_path / "net.json"
    save_snapshot(path, p)
    import json
    doc = json.loads(path.read_text())
    doc["format_version"] = 999
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_snapshot(path)
