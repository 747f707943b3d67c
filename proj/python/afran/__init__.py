"""Python bindings for the afran SAR aircraft detector."""

import json

from . import _afran
from ._afran import CheckpointError, ConfigError, generate_scene, iou, tile

__all__ = [
    "CheckpointError",
    "ConfigError",
    "complexity",
    "default_config",
    "detect",
    "evaluate",
    "generate_scene",
    "iou",
    "synthesize",
    "tile",
    "train",
]


def _dump(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return json.dumps(config)


def default_config():
    return json.loads(_afran.default_config())


def synthesize(root, config=None):
    _afran.synthesize(str(root), _dump(config))


def train(dataset, out_dir, config=None, threads=1):
    return _afran.train(str(dataset), str(out_dir), _dump(config), threads)


def evaluate(checkpoint, dataset, split="test"):
    return json.loads(_afran.evaluate(str(checkpoint), str(dataset), split))


def detect(checkpoint, image, tile=0, overlap=0):
    return _afran.detect(str(checkpoint), image, tile, overlap)


def complexity(config=None):
    return json.loads(_afran.complexity(_dump(config)))
