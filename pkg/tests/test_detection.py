import numpy as np
import pytest

from oracles import pair_counting_ari
from modrl.detection import (
    ari,
    detect_modules,
    finetune_partition,
    isolation,
    load_partition,
    relabel_contiguous,
    save_partition,
)
from modrl.network import ActivationTrace, init_network


def net_with_weights(shape, weights, seed=0):
    net = init_network(list(shape), seed)
    for w, val in zip(net.weights, weights):
        w[...] = val
    return net


def two_chain_net():
    """Two fully disconnected input->hidden->output chains."""
    return net_with_weights([2, 2, 2], [np.eye(2) * 1.0, np.eye(2) * 0.8])


def two_chain_trace(t=60, seed=0):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=t), rng.normal(size=t)
    # column order (0,0) (0,1) (1,0) (1,1) (2,0) (2,1): chains alternate
    data = np.c_[a, b, 2 * a, -b, 0.5 * a, b + 0.0]
    return ActivationTrace(data=data, layer_sizes=[2, 2, 2])


class TestIsolation:
    def test_single_community_scores_zero(self):
        net = two_chain_net()
        part = {n: 0 for n in
                [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]}
        value, per = isolation(net, part)
        assert value == 0.0
        assert per[0] == 1.0  # everything internal, but |P| = 1 forces 0

    def test_disconnected_modules_fully_isolated(self):
        net = two_chain_net()
        part = {(0, 0): 0, (1, 0): 0, (2, 0): 0,
                (0, 1): 1, (1, 1): 1, (2, 1): 1}
        value, per = isolation(net, part)
        assert value == 1.0
        assert per == {0: 1.0, 1: 1.0}

    def test_three_to_one_ratio(self):
        net = net_with_weights([2, 2], [np.array([[3.0, 1.0], [0.0, 0.0]])])
        part = {(0, 0): 0, (1, 0): 0, (1, 1): 1}
        value, per = isolation(net, part)
        assert per[0] == pytest.approx(0.75)   # W_int 3 vs W_ext 1
        assert per[1] == 0.0
        assert value == pytest.approx(0.375)

    def test_weights_to_unassigned_count_as_external(self):
        net = net_with_weights([2, 2], [np.array([[3.0, 1.0], [0.0, 0.0]])])
        part = {(0, 0): 0, (1, 0): 0, (1, 1): 1, (0, 1): 1}
        with_unassigned = isolation(net, {(0, 0): 0, (1, 0): 0, (1, 1): 1})
        assert with_unassigned[1][0] == pytest.approx(0.75)


class TestARI:
    def test_identical_partitions(self):
        p = {(0, i): i % 3 for i in range(9)}
        assert ari(p, dict(p)) == 1.0

    def test_spec_example_one_sixth(self):
        p1 = {(0, 0): 0, (0, 1): 0, (0, 2): 0, (0, 3): 1, (0, 4): 1}
        p2 = {(0, 0): 0, (0, 1): 0, (0, 2): 1, (0, 3): 1, (0, 4): 1}
        assert ari(p1, p2) == pytest.approx(1.0 / 6.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(4, 12))
            p1 = {(0, i): int(rng.integers(3)) for i in range(n)}
            p2 = {(0, i): int(rng.integers(3)) for i in range(n)}
            assert ari(p1, p2) == pytest.approx(ari(p2, p1), abs=1e-14)

    def test_label_permutation_invariant(self):
        p = {(0, i): i % 4 for i in range(12)}
        remap = {0: 3, 1: 2, 2: 0, 3: 1}
        q = {n: remap[c] for n, c in p.items()}
        assert ari(p, q) == 1.0

    def test_node_set_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ari({(0, 0): 0}, {(0, 1): 0})

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(3, 13))
            la = rng.integers(0, int(rng.integers(1, 5)), size=n)
            lb = rng.integers(0, int(rng.integers(1, 5)), size=n)
            p1 = {(0, i): int(la[i]) for i in range(n)}
            p2 = {(0, i): int(lb[i]) for i in range(n)}
            assert ari(p1, p2) == pytest.approx(pair_counting_ari(la, lb),
                                                abs=1e-12)


class TestFinetune:
    def test_optimal_partition_unchanged(self):
        net = two_chain_net()
        p = {(0, 0): 0, (1, 0): 0, (2, 0): 0, (0, 1): 1, (1, 1): 1, (2, 1): 1}
        final, report = finetune_partition(net, p, p)
        assert final == relabel_contiguous(p)
        assert report.m_score == pytest.approx(2.0)

    def test_split_module_is_merged(self):
        net = two_chain_net()
        p_f = {(0, 0): 0, (1, 0): 0, (2, 0): 0,
               (0, 1): 1, (1, 1): 1, (2, 1): 1}
        p_s = dict(p_f)
        p_s[(2, 0)] = 2  # artificially split chain A across layers
        final, report = finetune_partition(net, p_s, p_f)
        assert final[(2, 0)] == final[(0, 0)] == final[(1, 0)]
        assert report.isolation == 1.0
        assert report.ari == 1.0

    def test_m_never_decreases(self):
        rng = np.random.default_rng(1)
        net = init_network([3, 5, 2], 2)
        for w in net.weights:
            w[...] = rng.normal(size=w.shape)
        nodes = net.neuron_ids()
        p_s = {n: int(rng.integers(4)) for n in nodes}
        p_f = {n: int(rng.integers(3)) for n in nodes}
        start = isolation(net, p_s)[0] + ari(
            {n: p_s[n] for n in nodes}, {n: p_f[n] for n in nodes})
        _, report = finetune_partition(net, p_s, p_f)
        assert report.m_score >= start - 1e-12


class TestDetectModules:
    @pytest.mark.parametrize("method", ["louvain", "internal", "ft",
                                        "ft_internal"])
    def test_disconnected_subnetworks_found_by_every_method(self, method):
        net = two_chain_net()
        part, report = detect_modules(net, two_chain_trace(), method, seed=0)
        assert report.n_communities == 2
        assert report.isolation == 1.0
        chain_a = {part[(0, 0)], part[(1, 0)], part[(2, 0)]}
        chain_b = {part[(0, 1)], part[(1, 1)], part[(2, 1)]}
        assert len(chain_a) == 1 and len(chain_b) == 1
        assert chain_a != chain_b

    def test_report_score_is_sum_to_machine_precision(self):
        net = two_chain_net()
        _, report = detect_modules(net, two_chain_trace(), "ft_internal", 1)
        assert report.m_score == report.isolation + report.ari

    def test_same_seed_same_partition(self):
        net = two_chain_net()
        a, _ = detect_modules(net, two_chain_trace(), "ft_internal", seed=9)
        b, _ = detect_modules(net, two_chain_trace(), "ft_internal", seed=9)
        assert a == b

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            detect_modules(two_chain_net(), two_chain_trace(), "spectral", 0)

    def test_labels_contiguous_from_zero(self):
        part, _ = detect_modules(two_chain_net(), two_chain_trace(),
                                 "ft_internal", seed=3)
        labels = sorted(set(part.values()))
        assert labels == list(range(len(labels)))


class TestPartitionIO:
    def test_round_trip(self, tmp_path):
        net = two_chain_net()
        part, report = detect_modules(net, two_chain_trace(), "ft_internal", 0)
        path = tmp_path / "partition.json"
        save_partition(part, report, str(path), checkpoint_hash="abc123",
                       trace_meta={"env": "do"}, seed=0)
        loaded, doc = load_partition(str(path))
        assert loaded == part
        assert doc["checkpoint_hash"] == "abc123"
        assert doc["report"]["isolation"] == report.isolation

    def test_stable_file_ordering(self, tmp_path):
        net = two_chain_net()
        part, report = detect_modules(net, two_chain_trace(), "ft_internal", 0)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_partition(part, report, str(p1), checkpoint_hash="h", seed=0)
        save_partition(part, report, str(p2), checkpoint_hash="h", seed=0)
        assert p1.read_bytes() == p2.read_bytes()
