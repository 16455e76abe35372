"""Experiment configuration files (YAML) and named presets."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .exceptions import ConfigurationError
from .initializers import InitializerSpec
from .network import Activation, TrainConfig

KINDS = ("train", "prune-reinit", "path-curve", "param-study", "cdf")

LENET_300_100 = [784, 300, 100, 10]


@dataclass
class DataConfig:
    cache_dir: str | None = None
    offline: bool = False
    train_limit: int | None = None
    test_limit: int | None = None


@dataclass
class PruneReinitConfig:
    active_fractions: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])
    magnitude: float = 0.1
    child_epochs: int | None = None


@dataclass
class PathCurveConfig:
    grid: list[int] = field(default_factory=list)
    trials: int = 250


@dataclass
class ParamStudyConfig:
    n_lightnings: list[int] = field(default_factory=lambda: [100, 1000, 10000])
    strengths: list[float] = field(default_factory=lambda: [0.05, 0.5, 5.0])
    wrong_answer_cap: float = 0.10


@dataclass
class CdfConfig:
    weights: str | None = None
    max_points_per_layer: int | None = None


@dataclass
class ExperimentConfig:
    kind: str = "train"
    seed: int = 0
    repeats: int = 1
    threads: int = 1
    layer_sizes: list[int] = field(default_factory=lambda: list(LENET_300_100))
    activations: list[str] | None = None
    initializers: list[InitializerSpec] = field(default_factory=lambda: [InitializerSpec()])
    training: TrainConfig = field(default_factory=TrainConfig)
    path_k: list[int] = field(default_factory=list)
    out: str = "runs/latest"
    data: DataConfig = field(default_factory=DataConfig)
    prune_reinit: PruneReinitConfig = field(default_factory=PruneReinitConfig)
    path_curve: PathCurveConfig = field(default_factory=PathCurveConfig)
    param_study: ParamStudyConfig = field(default_factory=ParamStudyConfig)
    cdf: CdfConfig = field(default_factory=CdfConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.repeats) < 1:
            raise ConfigurationError("repeats must be >= 1")
        if int(self.threads) < 1:
            raise ConfigurationError("threads must be >= 1")
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ConfigurationError("layer_sizes needs >= 2 positive entries")
        if self.activations is not None:
            if len(self.activations) != len(self.layer_sizes) - 1:
                raise ConfigurationError("one activation per dense layer required")
            for a in self.activations[:-1]:
                if Activation(a) is Activation.SOFTMAX:
                    raise ConfigurationError("softmax is only allowed on the final layer")
        if not self.initializers:
            raise ConfigurationError("at least one initializer required")
        pr = self.prune_reinit
        if any(not 0 < f <= 1 for f in pr.active_fractions):
            raise ConfigurationError("active fractions must lie in (0, 1]")
        if not pr.magnitude > 0:
            raise ConfigurationError("prune_reinit.magnitude must be > 0")
        if self.path_curve.trials < 1:
            raise ConfigurationError("path_curve.trials must be >= 1")

    @property
    def n_edges(self) -> int:
        s = self.layer_sizes
        return sum(a * b for a, b in zip(s[:-1], s[1:]))

    def to_dict(self) -> dict[str, Any]:
        out = {
            "kind": self.kind,
            "seed": self.seed,
            "repeats": self.repeats,
            "threads": self.threads,
            "architecture": {"layer_sizes": list(self.layer_sizes)},
            "initializers": [spec.to_dict() for spec in self.initializers],
            "training": {
                "learning_rate": self.training.learning_rate,
                "batch_size": self.training.batch_size,
                "epochs": self.training.epochs,
                "shuffle_each_epoch": self.training.shuffle_each_epoch,
            },
            "hooks": {"path_k": list(self.path_k)},
            "out": self.out,
            "data": asdict(self.data),
            "prune_reinit": asdict(self.prune_reinit),
            "path_curve": asdict(self.path_curve),
            "param_study": asdict(self.param_study),
            "cdf": asdict(self.cdf),
        }
        if self.activations is not None:
            out["architecture"]["activations"] = list(self.activations)
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        raw = copy.deepcopy(raw)
        if "config" in raw and "schemas" in raw:
            # a run manifest: re-run its config snapshot
            raw = raw["config"]
        try:
            arch = raw.pop("architecture", {}) or {}
            inits = raw.pop("initializers", None)
            if inits is None:
                inits = [raw.pop("initializer", {"kind": "glorot_uniform"})]
            training = raw.pop("training", {}) or {}
            hooks = raw.pop("hooks", {}) or {}
            kwargs = dict(
                kind=raw.pop("kind", "train"),
                seed=int(raw.pop("seed", 0)),
                repeats=int(raw.pop("repeats", 1)),
                threads=int(raw.pop("threads", 1)),
                layer_sizes=[int(s) for s in arch.pop("layer_sizes", LENET_300_100)],
                activations=arch.pop("activations", None),
                initializers=[InitializerSpec.from_dict(d) for d in inits],
                training=TrainConfig(**training),
                path_k=[int(k) for k in hooks.pop("path_k", [])],
                out=str(raw.pop("out", "runs/latest")),
                data=DataConfig(**(raw.pop("data", {}) or {})),
                prune_reinit=PruneReinitConfig(**(raw.pop("prune_reinit", {}) or {})),
                path_curve=PathCurveConfig(**(raw.pop("path_curve", {}) or {})),
                param_study=ParamStudyConfig(**(raw.pop("param_study", {}) or {})),
                cdf=CdfConfig(**(raw.pop("cdf", {}) or {})),
            )
            leftovers = set(raw) | set(arch) | set(hooks)
        except (TypeError, ValueError) as err:
            raise ConfigurationError(f"invalid configuration: {err}") from err
        if leftovers:
            raise ConfigurationError(f"unknown configuration keys: {sorted(leftovers)}")
        return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} not found")
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as err:
        raise ConfigurationError(f"{path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return ExperimentConfig.from_dict(raw)


_GLOROT = {"kind": "glorot_uniform"}
_HE = {"kind": "he_normal"}
_TRUNC = {"kind": "truncated_normal", "std": 0.1}
_LIGHTNING = {"kind": "lightning", "n_lightnings": 1000, "strength": 0.5}
_MNIST_TRAINING = {"learning_rate": 0.05, "batch_size": 100, "epochs": 30}

# grid around the complete-path transition of LeNet 300-100
_PATH_GRID = (
    [1, 1000, 5000, 10000]
    + list(range(11000, 18001, 250))
    + [20000, 30000, 50000, 100000, 266200]
)

PRESETS: dict[str, dict[str, Any]] = {
    "mnist-lenet-300-100": {
        "kind": "train",
        "initializers": [_GLOROT],
        "training": _MNIST_TRAINING,
    },
    "mnist-init-comparison": {
        "kind": "train",
        "repeats": 5,
        "initializers": [_GLOROT, _HE, _TRUNC, _LIGHTNING],
        "training": _MNIST_TRAINING,
        "hooks": {"path_k": [1000, 10000]},
    },
    "mnist-init-comparison-desk": {
        "kind": "train",
        "repeats": 3,
        "initializers": [_GLOROT, _HE, _TRUNC, _LIGHTNING],
        "training": _MNIST_TRAINING,
    },
    "mnist-prune-reinit": {
        "kind": "prune-reinit",
        "initializers": [_GLOROT],
        "training": _MNIST_TRAINING,
        "prune_reinit": {"active_fractions": [0.1, 0.2, 0.3, 0.4, 0.5], "magnitude": 0.1},
    },
    "mnist-prune-reinit-desk": {
        "kind": "prune-reinit",
        "initializers": [_GLOROT],
        "training": _MNIST_TRAINING,
        "prune_reinit": {
            "active_fractions": [0.1, 0.2, 0.3, 0.4, 0.5],
            "magnitude": 0.1,
            "child_epochs": 10,
        },
    },
    "mnist-path-curve": {
        "kind": "path-curve",
        "initializers": [_GLOROT, _TRUNC],
        "path_curve": {"grid": _PATH_GRID, "trials": 250},
    },
    "mnist-path-curve-desk": {
        "kind": "path-curve",
        "initializers": [_GLOROT, _TRUNC],
        "path_curve": {"grid": _PATH_GRID, "trials": 50},
    },
    "mnist-param-study": {
        "kind": "param-study",
        "repeats": 5,
        "training": {"learning_rate": 0.05, "batch_size": 100, "epochs": 100},
        "param_study": {
            "n_lightnings": [100, 300, 1000, 3000, 10000],
            "strengths": [0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0],
        },
    },
    "mnist-param-study-desk": {
        "kind": "param-study",
        "repeats": 1,
        "training": {"learning_rate": 0.05, "batch_size": 100, "epochs": 3},
        "param_study": {"n_lightnings": [100, 1000, 10000], "strengths": [0.05, 0.5, 5.0]},
    },
    "mnist-cdf": {
        "kind": "cdf",
        "initializers": [_GLOROT, _HE, _TRUNC, _LIGHTNING],
        "training": _MNIST_TRAINING,
        "cdf": {"max_points_per_layer": 2000},
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name])
