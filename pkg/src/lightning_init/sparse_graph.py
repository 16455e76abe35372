"""Sparse graph interpretation of dense layers.

Every weight is an edge of a layered DAG. Edges whose magnitude reaches a
threshold are *active*: activating when positive, inhibiting when negative.
The rest are inactive and treated as missing. Exactly-zero weights are
always inactive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError, InputError
from .network import Activation, DenseLayer, DenseNetwork, default_layer_names


class EdgeCategory(IntEnum):
    INACTIVE = 0
    ACTIVATING = 1
    INHIBITING = 2


def _weights_of(net) -> list[np.ndarray]:
    if isinstance(net, DenseNetwork):
        return net.weights
    return [np.asarray(w, dtype=np.float64) for w in net]


def _flat_magnitudes(weights) -> np.ndarray:
    return np.concatenate([np.abs(w).ravel() for w in weights])


def _split(flat: np.ndarray, weights) -> list[np.ndarray]:
    out, offset = [], 0
    for w in weights:
        out.append(flat[offset:offset + w.size].reshape(w.shape))
        offset += w.size
    return out


def edges_for_fraction(n_edges: int, fraction: float) -> int:
    """Number of edges kept active for ``fraction`` of ``n_edges``, rounded up."""
    if not 0 < fraction <= 1:
        raise InputError(f"active fraction must lie in (0, 1], got {fraction}")
    # the epsilon stops 0.1 * 266200 = 26620.000000000004 from rounding up
    return min(n_edges, math.ceil(fraction * n_edges - 1e-9))


def top_k_masks(net, k: int) -> list[np.ndarray]:
    """Boolean masks of the ``k`` largest-magnitude edges, pooled over all layers.

    Ties go to the earlier edge in (layer, row, column) order. Zero weights
    are never selected, so fewer than ``k`` edges come back when the network
    has fewer nonzero weights.
    """
    weights = _weights_of(net)
    flat = _flat_magnitudes(weights)
    if k < 0:
        raise InputError("k must be >= 0")
    order = np.argsort(-flat, kind="stable")[:k]
    order = order[flat[order] > 0]
    active = np.zeros(flat.size, dtype=bool)
    active[order] = True
    return _split(active, weights)


def threshold_for_fraction(net, active_fraction: float) -> float:
    """Magnitude cutoff that keeps ``ceil(fraction * total)`` edges active."""
    weights = _weights_of(net)
    flat = _flat_magnitudes(weights)
    if flat.size == 0:
        raise InputError("network has no edges")
    k = edges_for_fraction(flat.size, active_fraction)
    if k == flat.size:
        return 0.0
    return float(np.sort(flat)[::-1][k - 1])


@dataclass
class SparseGraphView:
    layer_sizes: list[int]
    categories: list[np.ndarray]
    threshold: float
    source_weights: list[np.ndarray] | None = None
    layer_names: list[str] | None = None

    def __post_init__(self):
        if self.layer_names is None:
            self.layer_names = default_layer_names(len(self.categories))

    @property
    def n_edges(self) -> int:
        return sum(c.size for c in self.categories)

    def active_masks(self) -> list[np.ndarray]:
        return [c != EdgeCategory.INACTIVE for c in self.categories]

    def counts(self) -> dict[EdgeCategory, int]:
        return {cat: int(sum((c == cat).sum() for c in self.categories)) for cat in EdgeCategory}

    @property
    def n_active(self) -> int:
        return int(sum(m.sum() for m in self.active_masks()))

    @property
    def active_fraction(self) -> float:
        return self.n_active / self.n_edges

    def save(self, path) -> None:
        """Write header lines followed by one category byte per edge.

        Source weights are not stored.
        """
        header = (
            "sparse-graph-view 1\n"
            f"layer_sizes {' '.join(str(s) for s in self.layer_sizes)}\n"
            f"threshold {self.threshold!r}\n"
            "end\n"
        )
        body = np.concatenate([c.astype(np.uint8).ravel() for c in self.categories])
        Path(path).write_bytes(header.encode("ascii") + body.tobytes())

    @classmethod
    def load(cls, path) -> "SparseGraphView":
        data = Path(path).read_bytes()
        lines, offset = [], 0
        while True:
            nl = data.index(b"\n", offset)
            line = data[offset:nl].decode("ascii")
            offset = nl + 1
            if line == "end":
                break
            lines.append(line)
        if not lines or lines[0] != "sparse-graph-view 1":
            raise InputError(f"{path}: not a sparse-graph-view v1 file")
        fields = dict(line.split(" ", 1) for line in lines[1:])
        sizes = [int(s) for s in fields["layer_sizes"].split()]
        codes = np.frombuffer(data, dtype=np.uint8, offset=offset)
        shapes = list(zip(sizes[:-1], sizes[1:]))
        if codes.size != sum(a * b for a, b in shapes) or codes.max(initial=0) > 2:
            raise InputError(f"{path}: body does not match layer sizes")
        categories, pos = [], 0
        for a, b in shapes:
            categories.append(codes[pos:pos + a * b].reshape(a, b).astype(np.int8))
            pos += a * b
        return cls(sizes, categories, float(fields["threshold"]))


def _categorize_masks(weights, active_masks, threshold, layer_names=None) -> SparseGraphView:
    categories = []
    for w, active in zip(weights, active_masks):
        c = np.zeros(w.shape, dtype=np.int8)
        c[active & (w > 0)] = EdgeCategory.ACTIVATING
        c[active & (w < 0)] = EdgeCategory.INHIBITING
        categories.append(c)
    sizes = [weights[0].shape[0]] + [w.shape[1] for w in weights]
    return SparseGraphView(
        sizes, categories, float(threshold), [w.copy() for w in weights], layer_names
    )


def _names(net):
    return list(net.layer_names) if isinstance(net, DenseNetwork) else None


def categorize(net, threshold: float) -> SparseGraphView:
    """Categorize every edge by sign, keeping those with ``|w| >= threshold``."""
    if threshold < 0:
        raise InputError("threshold must be >= 0")
    weights = _weights_of(net)
    masks = [(np.abs(w) >= threshold) & (w != 0) for w in weights]
    return _categorize_masks(weights, masks, threshold, _names(net))


def categorize_top_k(net, k: int) -> SparseGraphView:
    """View whose active set is exactly the :func:`top_k_masks` selection."""
    weights = _weights_of(net)
    masks = top_k_masks(weights, k)
    kept = [np.abs(w[m]) for w, m in zip(weights, masks) if m.any()]
    threshold = float(np.concatenate(kept).min()) if kept else math.inf
    return _categorize_masks(weights, masks, threshold, _names(net))


def categorize_fraction(net, active_fraction: float) -> SparseGraphView:
    weights = _weights_of(net)
    k = edges_for_fraction(sum(w.size for w in weights), active_fraction)
    view = categorize_top_k(net, k)
    view.threshold = threshold_for_fraction(weights, active_fraction)
    return view


@dataclass
class PathReport:
    on_complete_path: list[np.ndarray]
    reachable_from_input: list[np.ndarray]
    reaches_output: list[np.ndarray]
    n_active: int
    n_on_path: int
    dead_neuron_count: int

    @property
    def fraction_on_complete_paths(self) -> float:
        return self.n_on_path / self.n_active if self.n_active else 0.0


def path_report_from_masks(active_masks: Sequence[np.ndarray]) -> PathReport:
    """Layered forward/backward reachability over boolean adjacency matrices."""
    masks = [np.asarray(m, dtype=bool) for m in active_masks]
    forward = [np.ones(masks[0].shape[0], dtype=bool)]
    for m in masks:
        forward.append(forward[-1].astype(np.float64) @ m > 0)
    backward = [np.ones(masks[-1].shape[1], dtype=bool)]
    for m in reversed(masks):
        backward.append(m.astype(np.float64) @ backward[-1] > 0)
    backward.reverse()
    on_path = [m & forward[i][:, None] & backward[i + 1][None, :] for i, m in enumerate(masks)]
    dead = sum(int((~(f & b)).sum()) for f, b in zip(forward[1:-1], backward[1:-1]))
    return PathReport(
        on_complete_path=on_path,
        reachable_from_input=forward,
        reaches_output=backward,
        n_active=int(sum(m.sum() for m in masks)),
        n_on_path=int(sum(p.sum() for p in on_path)),
        dead_neuron_count=dead,
    )


def path_report(view: SparseGraphView) -> PathReport:
    """Which active edges lie on a complete input-to-output path."""
    return path_report_from_masks(view.active_masks())


def reinit_from_view(
    view: SparseGraphView,
    magnitude: float,
    activations: Sequence[Activation | str] | None = None,
) -> DenseNetwork:
    """Child network: +/-magnitude on active edges, inactive edges pruned.

    Biases start at zero; pruned entries get mask 0 and stay zero in training.
    """
    if not magnitude > 0:
        raise ConfigurationError("magnitude must be > 0")
    n = len(view.categories)
    if activations is None:
        activations = [Activation.RELU] * (n - 1) + [Activation.SOFTMAX]
    layers = []
    for c, act in zip(view.categories, activations):
        w = np.zeros(c.shape)
        w[c == EdgeCategory.ACTIVATING] = magnitude
        w[c == EdgeCategory.INHIBITING] = -magnitude
        mask = (c != EdgeCategory.INACTIVE).astype(np.float64)
        layers.append(DenseLayer(w, None, act, mask))
    return DenseNetwork(layers, list(view.layer_names))
