"""HELEN hyperspectral unmixing with endmember variability."""

import json

from . import _core
from ._core import ConfigError, Error, FormatError, InvalidArgument, NumericalError

__all__ = ["synth", "unmix", "evaluate", "read_cube", "write_cube", "default_config",
           "ConfigError", "Error", "FormatError", "InvalidArgument", "NumericalError"]


def _text(config):
    if config is None:
        return "{}"
    return config if isinstance(config, str) else json.dumps(config)


def _section(config, name):
    # a bare section dict is accepted in place of a full run config
    if isinstance(config, dict) and "synth" not in config and "engine" not in config:
        config = {name: config}
    return _text(config)


def default_config():
    """Full run configuration with every default filled in."""
    return json.loads(_core.normalize_config("{}"))


def synth(config=None):
    """Returns (cube, truth) where cube is (rows, cols, bands) and truth the parsed truth JSON."""
    cube, truth = _core.synth(_section(config, "synth"))
    return cube, json.loads(truth)


def unmix(cube, config=None, progress=None):
    """Unmix a (rows, cols, bands) cube. config is the "engine" section, or a full run config."""
    return _core.unmix(cube, _section(config, "engine"), progress)


def evaluate(result, truth, threshold=0.5):
    res = result["json"] if isinstance(result, dict) and "json" in result else _text(result)
    return json.loads(_core.evaluate(res, _text(truth), threshold))


def write_cube(path, cube):
    with open(path, "wb") as f:
        f.write(_core.encode_cube(cube))


def read_cube(path):
    with open(path, "rb") as f:
        return _core.decode_cube(f.read())
