"""Weight initializers: three random baselines and lightning paths.

A *lightning* is one input-to-output path that picks a single neuron per layer.
The lightning initializer gives every edge on at least one sampled path the
magnitude ``strength`` with a random sign and leaves every other edge at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError
from .network import Activation, DenseLayer, DenseNetwork


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_shape(shape):
    fan_in, fan_out = (int(s) for s in shape)
    if fan_in < 1 or fan_out < 1:
        raise ConfigurationError(f"shape must be positive, got {shape}")
    return fan_in, fan_out


def init_glorot_uniform(shape, rng=None) -> np.ndarray:
    fan_in, fan_out = _check_shape(shape)
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return _rng(rng).uniform(-limit, limit, size=(fan_in, fan_out))


def init_he_normal(shape, rng=None) -> np.ndarray:
    fan_in, fan_out = _check_shape(shape)
    return _rng(rng).normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


def init_truncated_normal(shape, std: float, rng=None) -> np.ndarray:
    """Normal(0, std) draws; anything beyond 2*std is redrawn until it fits."""
    if not std > 0:
        raise ConfigurationError("std must be > 0")
    fan_in, fan_out = _check_shape(shape)
    rng = _rng(rng)
    out = rng.normal(0.0, std, size=(fan_in, fan_out))
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


@dataclass(frozen=True)
class LightningConfig:
    n_lightnings: int = 1000
    strength: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.n_lightnings) < 0:
            raise ConfigurationError("n_lightnings must be >= 0")
        if not self.strength > 0:
            raise ConfigurationError("strength must be > 0")


def sample_lightning_paths(layer_sizes: Sequence[int], n_lightnings: int, rng) -> np.ndarray:
    """``(n_lightnings, len(layer_sizes))`` array: one neuron index per layer per path."""
    rng = _rng(rng)
    cols = [rng.integers(0, size, size=n_lightnings) for size in layer_sizes]
    return np.stack(cols, axis=1) if cols else np.zeros((n_lightnings, 0), dtype=np.int64)


def init_lightning(layer_sizes: Sequence[int], config: LightningConfig) -> list[np.ndarray]:
    """Per-layer weight matrices holding ``config.n_lightnings`` random complete paths.

    Shared edges keep magnitude ``strength`` (no summation). Each touched edge
    takes the sign of a fair coin attached to the first path that touches it.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ConfigurationError("need at least an input and an output layer")
    if min(sizes) < 1:
        raise ConfigurationError("layer sizes must be positive")
    rng = np.random.default_rng(config.rng_seed)
    n = int(config.n_lightnings)
    paths = sample_lightning_paths(sizes, n, rng)
    coins = rng.integers(0, 2, size=(n, len(sizes) - 1))
    weights = []
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = np.zeros(fan_in * fan_out)
        if n:
            flat = paths[:, layer] * fan_out + paths[:, layer + 1]
            edges, first = np.unique(flat, return_index=True)
            signs = np.where(coins[first, layer] == 1, 1.0, -1.0)
            w[edges] = signs * config.strength
        weights.append(w.reshape(fan_in, fan_out))
    return weights


class InitKind(str, Enum):
    GLOROT_UNIFORM = "glorot_uniform"
    HE_NORMAL = "he_normal"
    TRUNCATED_NORMAL = "truncated_normal"
    LIGHTNING = "lightning"


@dataclass(frozen=True)
class InitializerSpec:
    """Which initializer to use plus its parameters.

    ``rng_seed`` governs every draw; for lightning it replaces the seed stored
    in ``lightning``.
    """

    kind: InitKind = InitKind.GLOROT_UNIFORM
    rng_seed: int = 0
    std: float | None = None
    lightning: LightningConfig = field(default_factory=LightningConfig)

    def __post_init__(self):
        object.__setattr__(self, "kind", InitKind(self.kind))
        if self.kind is InitKind.TRUNCATED_NORMAL:
            if self.std is None or not self.std > 0:
                raise ConfigurationError("truncated_normal requires std > 0")

    def with_seed(self, seed: int) -> "InitializerSpec":
        return replace(self, rng_seed=int(seed))

    @property
    def label(self) -> str:
        if self.kind is InitKind.TRUNCATED_NORMAL:
            return f"truncated_normal(std={self.std:g})"
        if self.kind is InitKind.LIGHTNING:
            return f"lightning(n={self.lightning.n_lightnings},s={self.lightning.strength:g})"
        return self.kind.value

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "rng_seed": self.rng_seed}
        if self.std is not None:
            out["std"] = self.std
        if self.kind is InitKind.LIGHTNING:
            out["n_lightnings"] = self.lightning.n_lightnings
            out["strength"] = self.lightning.strength
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "InitializerSpec":
        data = dict(data)
        kind = InitKind(data.pop("kind", "glorot_uniform"))
        seed = int(data.pop("rng_seed", 0))
        std = data.pop("std", None)
        lightning = LightningConfig(
            int(data.pop("n_lightnings", 1000)), float(data.pop("strength", 0.5)), seed
        )
        if data:
            raise ConfigurationError(f"unknown initializer fields: {sorted(data)}")
        return cls(kind, seed, None if std is None else float(std), lightning)


def initialize(layer_sizes: Sequence[int], spec: InitializerSpec) -> list[np.ndarray]:
    """Fresh weight matrices for consecutive ``layer_sizes``."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ConfigurationError("need at least an input and an output layer")
    if spec.kind is InitKind.LIGHTNING:
        return init_lightning(sizes, replace(spec.lightning, rng_seed=spec.rng_seed))
    rng = np.random.default_rng(spec.rng_seed)
    shapes = list(zip(sizes[:-1], sizes[1:]))
    if spec.kind is InitKind.GLOROT_UNIFORM:
        return [init_glorot_uniform(s, rng) for s in shapes]
    if spec.kind is InitKind.HE_NORMAL:
        return [init_he_normal(s, rng) for s in shapes]
    return [init_truncated_normal(s, spec.std, rng) for s in shapes]


def build_network(
    layer_sizes: Sequence[int],
    spec: InitializerSpec,
    activations: Sequence[Activation | str] | None = None,
) -> DenseNetwork:
    """Network with initialized weights, zero biases and an all-ones mask."""
    weights = initialize(layer_sizes, spec)
    if activations is None:
        activations = [Activation.RELU] * (len(weights) - 1) + [Activation.SOFTMAX]
    if len(activations) != len(weights):
        raise ConfigurationError("one activation per layer required")
    return DenseNetwork([DenseLayer(w, None, a) for w, a in zip(weights, activations)])
