import numpy as np
import pytest

from graphforget import (
    delete_nodes,
    forward,
    generate_sbm,
    sample_forget_edges,
    score_edges,
    split_edges,
)
from graphforget.graphs import edge_key_set, make_graph
from graphforget.metrics import retain_propagation, retain_view_features
from graphforget.training import TrainConfig, init_params, train
from graphforget.unlearning import (
    DESTROYER_NEGATIVE,
    DESTROYER_RANDOM,
    UnlearnConfig,
    distill_unlearn,
    grad_ascent_unlearn,
    make_destroyer,
)


@pytest.fixture(scope="module")
def trained_setup():
    g = generate_sbm(4, 15, 0.4, 0.0, 16, seed=2)
    split = split_edges(g, 0.05, 0.05, seed=3)
    cfg = TrainConfig(epochs=150, patience=40, seed=4)
    source, _ = train(g, split.train, split.val, split.val_neg, cfg, arch="gcn", hidden=(16, 8))
    forget = sample_forget_edges(g, split, 0.05, "in", seed=5)
    return g, split, source, forget


def mean_forget_prob(params, graph, forget):
    adj = retain_propagation(params.arch, graph, forget)
    feats = retain_view_features(graph, forget)
    embeds = forward(params, adj, feats)
    _, probs = score_edges(embeds.last, forget.forget, 1.0)
    return probs.mean()


class TestMakeDestroyer:
    def test_random_init_deterministic(self, trained_setup):
        g, split, source, forget = trained_setup
        a = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=7)
        b = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=7)
        for x, y in zip(a.params.flat(), b.params.flat()):
            assert np.array_equal(x, y)
        assert a.params.dims == source.dims

    def test_negative_pairs_only_non_neighbor(self, triangle_plus_isolated):
        g = triangle_plus_isolated
        split = split_edges(g, 0.0, 0.0, seed=0)
        forget = sample_forget_edges(g, split, 0.34, "in", seed=1)
        source = init_params("gcn", (g.feature_dim, 4), seed=0)
        spec = make_destroyer(DESTROYER_NEGATIVE, source, forget, g, seed=2)
        # Node 3 is the only non-neighbor of every triangle node.
        assert all(v == 3 for v in spec.pair_map.values())

    def test_negative_pairs_membership_scan(self):
        g = generate_sbm(4, 20, 0.3, 0.02, 8, seed=9)
        split = split_edges(g, 0.0, 0.0, seed=0)
        forget = sample_forget_edges(g, split, 0.3, "in", seed=1)
        source = init_params("gcn", (8, 8, 4), seed=0)
        edges = edge_key_set(g.edges)
        for trial in range(10):
            spec = make_destroyer(DESTROYER_NEGATIVE, source, forget, g, seed=trial)
            for k, v in spec.pair_map.items():
                assert k != v
                assert (min(k, v), max(k, v)) not in edges

    def test_complete_graph_rejected(self):
        g = make_graph(3, [(0, 1), (0, 2), (1, 2)], feature_dim=2)
        split = split_edges(g, 0.0, 0.0, seed=0)
        forget = sample_forget_edges(g, split, 0.34, "in", seed=0)
        source = init_params("gcn", (2, 2), seed=0)
        with pytest.raises(ValueError, match="no non-neighbor"):
            make_destroyer(DESTROYER_NEGATIVE, source, forget, g, seed=0)


class TestDistillUnlearn:
    @pytest.mark.parametrize("strategy,kind", [
        (1, DESTROYER_RANDOM), (2, DESTROYER_RANDOM), (3, DESTROYER_NEGATIVE),
    ])
    def test_alpha_one_is_bitwise_noop(self, trained_setup, strategy, kind):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(kind, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=strategy, alpha=1.0, epochs=4, seed=2)
        unlearned, _ = distill_unlearn(source, g, split, forget, destroyer, cfg)
        for a, b in zip(unlearned.flat(), source.flat()):
            assert np.array_equal(a, b)

    def test_zero_epochs_identity_empty_trace(self, trained_setup):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=1, epochs=0, seed=2)
        unlearned, trace = distill_unlearn(source, g, split, forget, destroyer, cfg)
        assert len(trace) == 0
        for a, b in zip(unlearned.flat(), source.flat()):
            assert np.array_equal(a, b)

    @pytest.mark.parametrize("strategy,kind", [
        (1, DESTROYER_RANDOM), (2, DESTROYER_RANDOM), (3, DESTROYER_NEGATIVE),
    ])
    def test_forget_probability_reduced(self, trained_setup, strategy, kind):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(kind, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=strategy, alpha=0.5, epochs=100, seed=2)
        unlearned, _ = distill_unlearn(source, g, split, forget, destroyer, cfg)
        assert mean_forget_prob(unlearned, g, forget) < mean_forget_prob(source, g, forget)

    def test_info_bound_decreases(self, trained_setup):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=1, alpha=0.5, epochs=100, seed=2)
        _, trace = distill_unlearn(source, g, split, forget, destroyer, cfg)
        assert trace.kl_info_bound[-1] <= trace.kl_info_bound[0]

    def test_trace_lengths_match_epochs(self, trained_setup):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=1, epochs=17, seed=2)
        _, trace = distill_unlearn(source, g, split, forget, destroyer, cfg)
        assert len(trace) == 17
        assert len(trace.loss_r) == len(trace.loss_f) == len(trace.seconds) == 17

    def test_strategy_destroyer_mismatch(self, trained_setup):
        g, split, source, forget = trained_setup
        negative = make_destroyer(DESTROYER_NEGATIVE, source, forget, g, seed=1)
        with pytest.raises(ValueError, match="requires"):
            distill_unlearn(source, g, split, forget, negative,
                            UnlearnConfig(strategy=1, epochs=1))
        random = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        with pytest.raises(ValueError, match="requires"):
            distill_unlearn(source, g, split, forget, random,
                            UnlearnConfig(strategy=3, epochs=1))

    def test_deterministic(self, trained_setup):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=1, epochs=30, seed=11)
        a, _ = distill_unlearn(source, g, split, forget, destroyer, cfg)
        b, _ = distill_unlearn(source, g, split, forget, destroyer, cfg)
        for x, y in zip(a.flat(), b.flat()):
            assert np.array_equal(x, y)

    def test_propagation_hygiene(self, trained_setup):
        g, split, source, forget = trained_setup
        adj = retain_propagation("gcn", g, forget)
        for u, v in forget.forget:
            assert adj.matrix[int(u), int(v)] == 0.0
            assert adj.matrix[int(v), int(u)] == 0.0

    def test_retain_batch_all_and_fixed(self, trained_setup):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        for batch in ("all", 5):
            cfg = UnlearnConfig(strategy=1, epochs=3, retain_batch=batch, seed=2)
            unlearned, trace = distill_unlearn(source, g, split, forget, destroyer, cfg)
            assert len(trace) == 3

    def test_resample_pairs_flag(self, trained_setup):
        g, split, source, forget = trained_setup
        destroyer = make_destroyer(DESTROYER_NEGATIVE, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=3, epochs=10, resample_pairs=True, seed=2)
        unlearned, trace = distill_unlearn(source, g, split, forget, destroyer, cfg)
        assert len(trace) == 10

    def test_node_locality_zeroes_features(self, trained_setup):
        g, split, source, _ = trained_setup
        forget = delete_nodes(g, [0, 1], split)
        feats = retain_view_features(g, forget)
        assert np.all(feats[[0, 1]] == 0.0)
        assert np.any(feats[2:] != 0.0)
        destroyer = make_destroyer(DESTROYER_RANDOM, source, forget, g, seed=1)
        cfg = UnlearnConfig(strategy=1, epochs=10, seed=2)
        unlearned, trace = distill_unlearn(source, g, split, forget, destroyer, cfg)
        assert len(trace) == 10


class TestGradAscent:
    def test_zero_epochs_identity(self, trained_setup):
        g, split, source, forget = trained_setup
        out = grad_ascent_unlearn(source, g, split, forget, epochs=0, lr=0.01, seed=0)
        for a, b in zip(out.flat(), source.flat()):
            assert np.array_equal(a, b)

    def test_zero_lr_identity(self, trained_setup):
        g, split, source, forget = trained_setup
        out = grad_ascent_unlearn(source, g, split, forget, epochs=5, lr=0.0, seed=0)
        for a, b in zip(out.flat(), source.flat()):
            assert np.array_equal(a, b)

    def test_forget_probability_strictly_decreases(self, trained_setup):
        g, split, source, forget = trained_setup
        out = grad_ascent_unlearn(source, g, split, forget, epochs=40, lr=0.001, seed=0)
        assert mean_forget_prob(out, g, forget) < mean_forget_prob(source, g, forget)


class TestUnlearnConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            UnlearnConfig(strategy=4)
        with pytest.raises(ValueError):
            UnlearnConfig(alpha=1.5)
        with pytest.raises(ValueError):
            UnlearnConfig(epochs=-1)
        with pytest.raises(ValueError):
            UnlearnConfig(retain_batch="bogus")
