"""Configurations (mixture, model scale, training step) and their kernel coordinates."""

import copy
from dataclasses import dataclass, field

import numpy as np

from mfmsbo.errors import InvalidArgumentError
from mfmsbo.simplex import as_mixture

DEFAULT_SCALES = (20_000_000, 60_000_000, 150_000_000, 300_000_000, 500_000_000, 700_000_000, 1_000_000_000)
DEFAULT_STEPS = (6000, 12000, 19700)
TARGET_SCALE = 1_000_000_000
TARGET_STEP = 19700


@dataclass(frozen=True, eq=False)
class Configuration:
    mixture: np.ndarray
    model_scale: int
    train_step: int

    def __post_init__(self):
        object.__setattr__(self, "mixture", as_mixture(self.mixture))
        if int(self.model_scale) != self.model_scale or self.model_scale < 1:
            raise InvalidArgumentError(f"model_scale must be a positive integer, got {self.model_scale}")
        if int(self.train_step) != self.train_step or self.train_step < 1:
            raise InvalidArgumentError(f"train_step must be a positive integer, got {self.train_step}")
        object.__setattr__(self, "model_scale", int(self.model_scale))
        object.__setattr__(self, "train_step", int(self.train_step))
        self.mixture.setflags(write=False)

    @property
    def n(self):
        return self.mixture.size

    def with_step(self, step):
        # reuse the validated mixture: renormalizing again can move the last bit
        out = copy.copy(self)
        if int(step) != step or step < 1:
            raise InvalidArgumentError(f"train_step must be a positive integer, got {step}")
        object.__setattr__(out, "train_step", int(step))
        return out

    def key(self):
        return (tuple(self.mixture.tolist()), self.model_scale, self.train_step)

    def __eq__(self, other):
        return isinstance(other, Configuration) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        w = ", ".join(f"{x:.4f}" for x in self.mixture)
        return f"Configuration(w=[{w}], m={self.model_scale}, z={self.train_step})"


@dataclass(frozen=True)
class CoordinateTransform:
    """Maps scale and step to ``log(m / m_ref)`` and ``log(z / z_ref)``."""

    scale_ref: float = TARGET_SCALE
    step_ref: float = TARGET_STEP

    def scale(self, m):
        return np.log(np.asarray(m, dtype=float) / self.scale_ref)

    def step(self, z):
        return np.log(np.asarray(z, dtype=float) / self.step_ref)


@dataclass
class SearchSpace:
    n: int = 5
    scales: tuple = DEFAULT_SCALES
    steps: tuple = DEFAULT_STEPS
    target_scale: int = TARGET_SCALE
    target_step: int = TARGET_STEP
    transform: CoordinateTransform = field(default=None)

    def __post_init__(self):
        self.scales = tuple(sorted(int(m) for m in self.scales))
        self.steps = tuple(sorted(int(z) for z in self.steps))
        if self.n < 2 or not self.scales or not self.steps:
            raise InvalidArgumentError("search space needs n >= 2 and non-empty scale and step sets")
        if self.target_scale not in self.scales:
            raise InvalidArgumentError(f"target scale {self.target_scale} not in scale set")
        if self.target_step != max(self.steps):
            raise InvalidArgumentError("target step must be the largest step in the grid")
        if self.transform is None:
            self.transform = CoordinateTransform(self.target_scale, self.target_step)

    def contains(self, config):
        return (
            config.n == self.n and config.model_scale in self.scales and config.train_step in self.steps
        )


def stack_configs(configs):
    """Return ``(W, m, z)`` arrays for a sequence of configurations."""
    configs = list(configs)
    W = np.array([c.mixture for c in configs], dtype=float).reshape(len(configs), -1)
    m = np.array([c.model_scale for c in configs], dtype=float)
    z = np.array([c.train_step for c in configs], dtype=float)
    return W, m, z
