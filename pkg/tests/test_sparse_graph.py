import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightning_init.exceptions import InputError
from lightning_init.initializers import InitializerSpec, LightningConfig, build_network
from lightning_init.network import DenseNetwork
from lightning_init.sparse_graph import (
    EdgeCategory,
    SparseGraphView,
    categorize,
    categorize_fraction,
    categorize_top_k,
    path_report,
    reinit_from_view,
    threshold_for_fraction,
    top_k_masks,
)

from oracles import edges_on_complete_paths_dfs

A, I, H = EdgeCategory.ACTIVATING, EdgeCategory.INHIBITING, EdgeCategory.INACTIVE


@pytest.fixture
def figure_one():
    """1-3-1 net: A feeds B, C, D; they feed E. A->B is the weakest edge."""
    return DenseNetwork.from_weights(
        [np.array([[0.1, 0.8, -0.6]]), np.array([[-0.7], [0.9], [0.5]])]
    )


def random_weights(rng, sizes, zero_prob=0.0):
    out = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(size=(a, b))
        w[rng.random((a, b)) < zero_prob] = 0.0
        out.append(w)
    return out


def on_path_set(report):
    return {(l, int(i), int(j)) for l, m in enumerate(report.on_complete_path)
            for i, j in zip(*np.nonzero(m))}


class TestThreshold:
    def test_full_fraction(self, figure_one):
        assert threshold_for_fraction(figure_one, 1.0) == 0.0

    def test_half_of_four(self):
        weights = [np.array([[0.5, -0.3], [0.1, 0.05]])]
        t = threshold_for_fraction(weights, 0.5)
        assert t == 0.3
        view = categorize(weights, t)
        np.testing.assert_array_equal(view.categories[0], [[A, I], [H, H]])

    def test_sort_oracle(self):
        rng = np.random.default_rng(0)
        weights = random_weights(rng, [7, 5, 3])
        mags = sorted(np.abs(np.concatenate([w.ravel() for w in weights])), reverse=True)
        for fraction in (0.1, 0.25, 0.5, 0.9):
            k = math.ceil(fraction * len(mags))
            assert threshold_for_fraction(weights, fraction) == mags[k - 1]

    def test_lenet_ten_percent(self):
        net = build_network([784, 300, 100, 10], InitializerSpec("glorot_uniform", 0))
        assert net.n_edges == 266200
        t = threshold_for_fraction(net, 0.1)
        assert sum(int((np.abs(w) >= t).sum()) for w in net.weights) == 26620
        assert categorize_fraction(net, 0.1).n_active == 26620

    @pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
    def test_invalid_fraction(self, figure_one, fraction):
        with pytest.raises(InputError):
            threshold_for_fraction(figure_one, fraction)

    def test_ties_keep_earlier_edges(self):
        weights = [np.array([[0.1, 0.1], [0.1, 0.1]]), np.array([[0.1], [0.1]])]
        masks = top_k_masks(weights, 3)
        np.testing.assert_array_equal(masks[0], [[True, True], [True, False]])
        assert not masks[1].any()
        assert categorize_fraction(weights, 0.5).n_active == 3


class TestCategorize:
    def test_all_zero(self):
        view = categorize([np.zeros((3, 2))], 0.1)
        assert (view.categories[0] == H).all()

    def test_figure_one(self, figure_one):
        view = categorize_top_k(figure_one, 5)
        np.testing.assert_array_equal(view.categories[0], [[H, A, I]])
        np.testing.assert_array_equal(view.categories[1], [[I], [A], [A]])
        assert view.threshold == 0.5

    def test_zero_threshold_is_sign_partition(self):
        w = np.array([[0.2, -0.1, 0.0]])
        view = categorize([w], 0.0)
        np.testing.assert_array_equal(view.categories[0], [[A, I, H]])

    def test_snapshot_is_a_copy(self, figure_one):
        view = categorize(figure_one, 0.5)
        figure_one.layers[0].weights[:] = 0
        assert view.source_weights[0][0, 1] == 0.8

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, 2), st.floats(0, 2))
    def test_partition_and_monotonicity(self, seed, t1, t2):
        weights = random_weights(np.random.default_rng(seed), [4, 5, 3], zero_prob=0.2)
        lo, hi = sorted((t1, t2))
        v_lo, v_hi = categorize(weights, lo), categorize(weights, hi)
        assert sum(v_lo.counts().values()) == v_lo.n_edges
        for a, b in zip(v_lo.active_masks(), v_hi.active_masks()):
            assert not (b & ~a).any()


class TestPathReport:
    def test_dense_view(self):
        weights = random_weights(np.random.default_rng(1), [4, 3, 2])
        report = path_report(categorize(weights, 0.0))
        assert report.fraction_on_complete_paths == 1.0
        assert report.dead_neuron_count == 0

    def test_figure_one_dead_path(self, figure_one):
        report = path_report(categorize_top_k(figure_one, 5))
        assert not report.on_complete_path[1][0, 0]  # B -o E
        assert report.fraction_on_complete_paths == pytest.approx(4 / 5)
        assert report.dead_neuron_count == 1

    def test_no_active_edges(self):
        report = path_report(categorize([np.zeros((2, 2)), np.zeros((2, 2))], 0.1))
        assert report.fraction_on_complete_paths == 0.0

    def test_lightning_net_is_fully_connected(self):
        spec = InitializerSpec("lightning", 4, lightning=LightningConfig(300, 0.5))
        net = build_network([784, 300, 100, 10], spec)
        assert path_report(categorize(net, 0.25)).fraction_on_complete_paths == 1.0

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            depth = rng.integers(2, 5)
            sizes = list(rng.integers(1, 6, size=depth + 1))
            weights = random_weights(rng, sizes, zero_prob=rng.uniform(0.2, 0.8))
            view = categorize(weights, 0.0)
            assert on_path_set(path_report(view)) == edges_on_complete_paths_dfs(
                view.active_masks()
            )

    def test_dead_path_propagation(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            weights = random_weights(rng, [4, 4, 4, 2], zero_prob=0.6)
            report = path_report(categorize(weights, 0.0))
            for layer in range(1, 3):
                no_input = ~(weights[layer - 1] != 0).any(axis=0)
                assert not report.on_complete_path[layer][no_input].any()


class TestReinit:
    def test_all_inactive(self):
        child = reinit_from_view(categorize([np.zeros((3, 2))], 1.0), 0.1)
        assert not child.layers[0].weights.any() and not child.layers[0].mask.any()

    def test_figure_one(self, figure_one):
        child = reinit_from_view(categorize_top_k(figure_one, 5), 0.1)
        w = np.concatenate([x.ravel() for x in child.weights])
        assert (w == 0.1).sum() == 3 and (w == -0.1).sum() == 2
        assert sum(int((l.mask == 0).sum()) for l in child.layers) == 1
        assert child.layer_names == figure_one.layer_names

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 3.0), st.floats(0.0, 1.5))
    def test_roundtrip(self, seed, magnitude, threshold):
        weights = random_weights(np.random.default_rng(seed), [5, 4, 3], zero_prob=0.1)
        view = categorize(weights, threshold)
        again = categorize(reinit_from_view(view, magnitude), magnitude / 2)
        for a, b in zip(view.categories, again.categories):
            np.testing.assert_array_equal(a, b)


class TestViewFile:
    def test_save_load(self, tmp_path, figure_one):
        view = categorize_top_k(figure_one, 5)
        view.save(tmp_path / "v.sgv")
        loaded = SparseGraphView.load(tmp_path / "v.sgv")
        assert loaded.layer_sizes == [1, 3, 1]
        assert loaded.threshold == view.threshold
        for a, b in zip(view.categories, loaded.categories):
            np.testing.assert_array_equal(a, b)

    def test_body_layout(self, tmp_path, figure_one):
        categorize_top_k(figure_one, 5).save(tmp_path / "v.sgv")
        data = (tmp_path / "v.sgv").read_bytes()
        assert data.startswith(b"sparse-graph-view 1\nlayer_sizes 1 3 1\n")
        assert data.endswith(bytes([0, 1, 2, 2, 1, 1]))

    def test_rejects_garbage(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"hello\nend\n")
        with pytest.raises(InputError):
            SparseGraphView.load(tmp_path / "bad")
