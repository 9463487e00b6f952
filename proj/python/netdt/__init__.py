"""Network delay prediction: topology generation, packet simulation and a
message-passing model. Samples are plain dicts in the JSON sample format."""

import json

from . import _core
from ._core import ConfigError, Error, NumericError, ValidationError

__all__ = [
    "ConfigError",
    "Error",
    "Model",
    "NumericError",
    "ValidationError",
    "generate_topology",
    "route_all_pairs",
    "sample_traffic",
    "simulate",
    "validate",
]


def _text(sample):
    return sample if isinstance(sample, str) else json.dumps(sample)


def generate_topology(nodes, seed=1):
    """Strongly connected topology skeleton without flows."""
    return json.loads(_core.generate_topology(nodes, seed))


def route_all_pairs(sample):
    """Adds one shortest-path flow per ordered node pair."""
    return json.loads(_core.route_all_pairs(_text(sample)))


def sample_traffic(sample, intensity, seed=1):
    """Draws traffic for a routed sample and calibrates it to `intensity`."""
    return json.loads(_core.sample_traffic(_text(sample), intensity, seed))


def validate(sample):
    """List of broken invariants; empty when the sample is well-formed."""
    return _core.validate(_text(sample))


def simulate(sample, warmup=10.0, measure=100.0, seed=1):
    """Returns the sample with simulated labels."""
    return json.loads(_core.simulate(_text(sample), warmup, measure, seed))


class Model:
    """Trained or freshly initialized delay model."""

    def __init__(self, hidden=32, iterations=8, seed=1, _core_model=None):
        self._m = _core_model or _core.Model(hidden, iterations, seed)

    @classmethod
    def load(cls, path):
        return cls(_core_model=_core.Model.load(str(path)))

    def save(self, path):
        self._m.save(str(path))

    @property
    def hidden(self):
        return self._m.hidden

    @property
    def iterations(self):
        return self._m.iterations

    def predict(self, sample):
        """Dict with per-flow `delay` (seconds) and per-queue `occupancy`."""
        return self._m.predict(_text(sample))
