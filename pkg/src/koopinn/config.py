"""INI round-trip for experiment configs.

A config file is a single [train] section whose keys mirror TrainConfig
fields.  Missing keys fall back to the dataclass defaults, unknown keys are
an error (silent typos in experiment configs are worse than a crash).
"""

from __future__ import annotations

import configparser
import dataclasses
from io import StringIO

from .training import TrainConfig

SECTION = "train"

_INT_FIELDS = {"seed", "steps", "width", "hidden_layers", "n_collocation",
               "n_test", "test_seed", "log_every", "taylor_r"}
_FLOAT_FIELDS = {"lr", "bump_c", "lambda_bc", "lambda_p", "reg_weight",
                 "reynolds", "z0", "det_clamp", "taylor_radius",
                 "boundary_value"}
_BOOL_FIELDS = {"regularize"}
_STR_FIELDS = {"operator", "mode"}
_OPTIONAL_FIELDS = {"n_boundary", "grid_nodes"}

_ALL_FIELDS = (_INT_FIELDS | _FLOAT_FIELDS | _BOOL_FIELDS | _STR_FIELDS
               | _OPTIONAL_FIELDS)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _OPTIONAL_FIELDS and raw.lower() in ("", "none"):
        return None
    if key == "n_boundary":
        return int(raw)
    if key == "grid_nodes":
        # accepts "25 25", "25,25" and the tuple repr "(25, 25)"
        toks = raw.strip("()").replace(",", " ").split()
        if not toks:
            raise ValueError(f"cannot read {raw!r} as grid nodes")
        return tuple(int(tok) for tok in toks)
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _BOOL_FIELDS:
        lowered = raw.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"cannot read {raw!r} as a boolean for {key}")
    return raw


def parse_config(text: str) -> TrainConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    if not parser.has_section(SECTION):
        raise ValueError(f"config needs a [{SECTION}] section")
    kwargs = {}
    for key, raw in parser.items(SECTION):
        if key not in _ALL_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = _parse_value(key, raw)
    return TrainConfig(**kwargs)


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def config_to_ini(cfg: TrainConfig) -> str:
    parser = configparser.ConfigParser()
    parser.add_section(SECTION)
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            rendered = "none"
        elif isinstance(value, tuple):
            rendered = " ".join(str(v) for v in value)
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        parser.set(SECTION, f.name, rendered)
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(config_to_ini(cfg))
