"""Versioned CSV tables, run manifests and network weight files."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ConfigurationError, SchemaVersionError
from .network import Activation, DenseLayer, DenseNetwork

# bump a table's version whenever its fixed columns change
SCHEMAS = {
    "metrics.csv": 1,
    "timing.csv": 1,
    "prune_reinit.csv": 1,
    "path_curve.csv": 1,
    "param_study.csv": 1,
    "cdf.csv": 1,
}

MANIFEST = "manifest.json"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise ConfigurationError(f"{run_dir} is not a run directory (no {MANIFEST})")
    return json.loads(path.read_text(encoding="utf-8"))


def write_manifest(run_dir, manifest: dict) -> None:
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (Path(run_dir) / MANIFEST).write_text(text, encoding="utf-8")


def read_table(run_dir, name: str) -> list[dict[str, str]]:
    """Read one of a run's CSV tables after checking its schema version."""
    manifest = read_manifest(run_dir)
    stored = manifest.get("schemas", {}).get(name)
    if name not in SCHEMAS:
        raise ConfigurationError(f"unknown table {name}")
    if stored != SCHEMAS[name]:
        raise SchemaVersionError(
            f"{name} has schema version {stored}, this version reads {SCHEMAS[name]}"
        )
    path = Path(run_dir) / name
    if not path.is_file():
        raise ConfigurationError(f"{path} missing")
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def save_network(path, net: DenseNetwork) -> None:
    arrays = {}
    for i, layer in enumerate(net.layers):
        arrays[f"weights_{i}"] = layer.weights
        arrays[f"biases_{i}"] = layer.biases
        arrays[f"mask_{i}"] = layer.mask
    arrays["activations"] = np.array([layer.activation.value for layer in net.layers])
    arrays["layer_names"] = np.array(net.layer_names)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_network(path) -> DenseNetwork:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"weights file {path} not found")
    with np.load(path) as data:
        n = len(data["activations"])
        layers = [
            DenseLayer(
                data[f"weights_{i}"],
                data[f"biases_{i}"],
                Activation(str(data["activations"][i])),
                data[f"mask_{i}"],
            )
            for i in range(n)
        ]
        names = [str(s) for s in data["layer_names"]]
    return DenseNetwork(layers, names)
