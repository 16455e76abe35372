"""Experiment statistics on top of the sparse graph view."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import InputError
from .initializers import InitializerSpec, initialize
from .network import DenseNetwork, ExperimentRecord
from .sparse_graph import (
    EdgeCategory,
    SparseGraphView,
    path_report_from_masks,
    top_k_masks,
)


@dataclass
class ChangeRateReport:
    layer_names: list[str]
    change_rates: list[float]
    overall_change_rate: float
    pearson: list[float | None] = field(default_factory=list)
    overall_pearson: float | None = None
    child_accuracy: float | None = None


def _check_child(parent_view: SparseGraphView, child_net: DenseNetwork):
    child = child_net.weights
    if [c.shape for c in parent_view.categories] != [w.shape for w in child]:
        raise InputError("parent view and child network have different shapes")
    return child


def _flipped(categories: np.ndarray, child: np.ndarray) -> np.ndarray:
    """Parent-active edges whose child weight no longer has the parent sign."""
    pos = categories == EdgeCategory.ACTIVATING
    neg = categories == EdgeCategory.INHIBITING
    return (pos & ~(child > 0)) | (neg & ~(child < 0))


def change_rate(parent_view: SparseGraphView, child_net: DenseNetwork) -> ChangeRateReport:
    """Share of parent-active edges whose sign changed in the child.

    A child weight of exactly zero counts as changed.
    """
    child = _check_child(parent_view, child_net)
    rates, changed_total, active_total = [], 0, 0
    for cats, w in zip(parent_view.categories, child):
        active = int((cats != EdgeCategory.INACTIVE).sum())
        changed = int(_flipped(cats, w).sum())
        rates.append(changed / active if active else 0.0)
        changed_total += changed
        active_total += active
    overall = changed_total / active_total if active_total else 0.0
    return ChangeRateReport(list(parent_view.layer_names), rates, overall)


def pearson(x, y) -> float | None:
    """Sample Pearson correlation; ``None`` when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise InputError("pearson inputs differ in length")
    if x.size < 2:
        raise InputError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def compare_parent_child(
    parent_view: SparseGraphView,
    child_net: DenseNetwork,
    child_accuracy: float | None = None,
) -> ChangeRateReport:
    """Change rates plus Pearson correlation of parent vs child weights on active edges."""
    if parent_view.source_weights is None:
        raise InputError("parent view carries no source weights")
    report = change_rate(parent_view, child_net)
    child = child_net.weights
    xs, ys = [], []
    for cats, pw, cw in zip(parent_view.categories, parent_view.source_weights, child):
        active = cats != EdgeCategory.INACTIVE
        xs.append(pw[active])
        ys.append(cw[active])
        report.pearson.append(pearson(xs[-1], ys[-1]) if active.sum() >= 2 else None)
    x_all, y_all = np.concatenate(xs), np.concatenate(ys)
    report.overall_pearson = pearson(x_all, y_all) if x_all.size >= 2 else None
    report.child_accuracy = child_accuracy
    return report


@dataclass
class CdfSeries:
    layer_name: str
    values: np.ndarray
    fractions: np.ndarray


def cdf_by_layer(net: DenseNetwork) -> list[CdfSeries]:
    """Empirical CDF of ``|w|`` for each layer."""
    out = []
    for name, w in zip(net.layer_names, net.weights):
        values = np.sort(np.abs(w).ravel())
        fractions = np.arange(1, values.size + 1) / values.size
        out.append(CdfSeries(name, values, fractions))
    return out


def cdf_gap(
    values,
    min_side_mass: float = 0.30,
    max_gap_mass: float = 0.01,
    min_relative_width: float = 0.10,
) -> tuple[float, float] | None:
    """Find a plateau in the empirical CDF of ``values``.

    Returns the widest interval ``(lo, hi)`` that holds less than
    ``max_gap_mass`` of the samples while at least ``min_side_mass`` lies on
    each side, provided it is wider than ``min_relative_width * max(values)``.
    Otherwise ``None``.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = v.size
    if n < 2 or v[-1] <= 0:
        return None
    inside = max(math.ceil(max_gap_mass * n) - 1, 0)
    lo_min = max(math.ceil(min_side_mass * n) - 1, 0)
    hi_max = n - max(math.ceil(min_side_mass * n), 1)
    i = np.arange(lo_min, n)
    j = i + inside + 1
    ok = j <= hi_max
    if not ok.any():
        return None
    i, j = i[ok], j[ok]
    widths = v[j] - v[i]
    best = int(np.argmax(widths))
    if widths[best] < min_relative_width * v[-1]:
        return None
    return float(v[i[best]]), float(v[j[best]])


def top_k_path_fraction(net, k: int) -> float:
    """Share of the ``k`` strongest edges that lie on complete paths."""
    return path_report_from_masks(top_k_masks(net, k)).fraction_on_complete_paths


@dataclass
class PathCurve:
    grid: list[int]
    mean_fraction: list[float]
    std_fraction: list[float]
    fractions: np.ndarray
    trials: int
    n_edges: int

    @property
    def edge_fraction(self) -> list[float]:
        return [k / self.n_edges for k in self.grid]


def _trial_fractions(layer_sizes, spec: InitializerSpec, grid) -> np.ndarray:
    weights = initialize(layer_sizes, spec)
    flat = np.concatenate([np.abs(w).ravel() for w in weights])
    order = np.argsort(-flat, kind="stable")
    order = order[flat[order] > 0]
    out = np.empty(len(grid))
    for g, k in enumerate(grid):
        active = np.zeros(flat.size, dtype=bool)
        active[order[:k]] = True
        masks, offset = [], 0
        for w in weights:
            masks.append(active[offset:offset + w.size].reshape(w.shape))
            offset += w.size
        out[g] = path_report_from_masks(masks).fraction_on_complete_paths
    return out


def path_curve(
    layer_sizes: Sequence[int],
    initializer: InitializerSpec,
    grid: Sequence[int],
    trials: int,
    n_jobs: int = 1,
) -> PathCurve:
    """Monte Carlo estimate of the complete-path fraction of the top-k edges.

    Trial ``t`` draws fresh weights with seed ``initializer.rng_seed + t``.
    """
    sizes = [int(s) for s in layer_sizes]
    n_edges = sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))
    grid = [int(k) for k in grid]
    if trials < 1:
        raise InputError("trials must be >= 1")
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise InputError("grid must be strictly increasing")
    if grid and (grid[0] < 1 or grid[-1] > n_edges):
        raise InputError(f"grid values must lie in [1, {n_edges}]")
    specs = [initializer.with_seed(initializer.rng_seed + t) for t in range(trials)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_trial_fractions, [sizes] * trials, specs, [grid] * trials))
    else:
        rows = [_trial_fractions(sizes, s, grid) for s in specs]
    fractions = np.vstack(rows) if rows else np.zeros((0, len(grid)))
    return PathCurve(
        grid=grid,
        mean_fraction=fractions.mean(axis=0).tolist(),
        std_fraction=fractions.std(axis=0).tolist(),
        fractions=fractions,
        trials=trials,
        n_edges=n_edges,
    )


def transition_width(curve: PathCurve, low: float = 0.05, high: float = 0.95) -> int | None:
    """Edges between the last grid point below ``low`` and the first above ``high``.

    An upper bound at the grid's resolution; ``None`` if the curve never
    crosses both levels.
    """
    mean = np.asarray(curve.mean_fraction)
    above = np.flatnonzero(mean > high)
    if above.size == 0:
        return None
    first_high = above[0]
    below = np.flatnonzero(mean[:first_high] < low)
    if below.size == 0:
        return None
    return curve.grid[first_high] - curve.grid[below[-1]]


def paths_vs_accuracy_hook(k_values: Sequence[int]):
    """Training hook storing the complete-path fraction of the top-k edges per epoch."""
    k_values = [int(k) for k in k_values]

    def hook(net: DenseNetwork, record: ExperimentRecord) -> None:
        for k in k_values:
            record.path_fractions[k] = top_k_path_fraction(net, k)

    return hook
