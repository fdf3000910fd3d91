import pytest

from koopinn.config import (config_to_ini, load_config, parse_config,
                            save_config)
from koopinn.training import TrainConfig


def test_default_roundtrip():
    cfg = TrainConfig()
    again = parse_config(config_to_ini(cfg))
    assert again == cfg
    assert again.n_boundary is None and again.grid_nodes is None


def test_nondefault_roundtrip():
    cfg = TrainConfig(operator="parabolic-monge-ampere", mode="pinn", seed=3,
                      steps=17, lr=5e-4, width=12, hidden_layers=2,
                      n_collocation=9, n_boundary=16, grid_nodes=(8, 10, 6),
                      bump_c=2.5, regularize=False, z0=2.0, taylor_r=4,
                      boundary_value=0.25)
    again = parse_config(config_to_ini(cfg))
    assert again == cfg
    assert again.grid_nodes == (8, 10, 6)
    assert isinstance(again.n_boundary, int)


def test_float_fields_roundtrip_exactly():
    cfg = TrainConfig(lr=1e-3, bump_c=0.1, det_clamp=1e-8)
    again = parse_config(config_to_ini(cfg))
    assert again.lr == cfg.lr
    assert again.bump_c == cfg.bump_c
    assert again.det_clamp == cfg.det_clamp


def test_missing_keys_use_defaults():
    cfg = parse_config("[train]\nsteps = 7\n")
    assert cfg.steps == 7
    assert cfg.operator == "navier-stokes"
    assert cfg.lr == 1e-3


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config("[train]\nstepz = 7\n")


def test_missing_section_rejected():
    with pytest.raises(ValueError, match="section"):
        parse_config("[run]\nsteps = 7\n")


def test_bool_parsing():
    assert parse_config("[train]\nregularize = yes\n").regularize is True
    assert parse_config("[train]\nregularize = off\n").regularize is False
    with pytest.raises(ValueError, match="boolean"):
        parse_config("[train]\nregularize = maybe\n")


def test_none_and_tuple_parsing():
    cfg = parse_config("[train]\nn_boundary = none\ngrid_nodes = 5, 6\n")
    assert cfg.n_boundary is None
    assert cfg.grid_nodes == (5, 6)
    assert parse_config("[train]\nn_boundary = 8\n").n_boundary == 8


def test_grid_nodes_accepts_tuple_repr():
    # hand-written configs tend to paste the Python tuple straight in
    assert parse_config("[train]\ngrid_nodes = (8, 8)\n").grid_nodes == (8, 8)
    assert parse_config("[train]\ngrid_nodes = (9,)\n").grid_nodes == (9,)
    with pytest.raises(ValueError, match="grid nodes"):
        parse_config("[train]\ngrid_nodes = ()\n")


def test_invalid_values_surface_as_config_errors():
    with pytest.raises(ValueError):
        parse_config("[train]\noperator = heat\n")
    with pytest.raises(ValueError):
        parse_config("[train]\nlr = 0.0\n")


def test_file_roundtrip(tmp_path):
    cfg = TrainConfig(seed=5, steps=11, grid_nodes=(4, 4))
    path = tmp_path / "cfg.ini"
    save_config(cfg, path)
    assert load_config(path) == cfg
