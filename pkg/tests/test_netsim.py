"""Simulator checks: topology generation, adjacency, the shadowed
channel (with a Monte-Carlo statistics oracle), feature acquisition, and
the forwarding-cost counters (with enumerated tree oracles)."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsnloc import netsim
from wsnloc.config import SimConfig
from wsnloc.netsim import NetworkTopology


def make_cfg(**kw):
    base = dict(node_count=20, field_side=100.0, radio_range=20.0, window=4, seed=7)
    base.update(kw)
    return SimConfig(**base)


def manual_topology(positions, anchor_flags=None, center=(50.0, 50.0)):
    positions = np.asarray(positions, dtype=float)
    if anchor_flags is None:
        anchor_flags = np.zeros(len(positions), dtype=bool)
    return NetworkTopology(positions=positions,
                           anchor_flags=np.asarray(anchor_flags, dtype=bool),
                           central_unit=center)


class TestGenerateTopology:
    def test_counts_and_bounds(self):
        cfg = make_cfg(node_count=100, anchor_fraction=0.2, seed=7)
        topo = netsim.generate_topology(cfg)
        assert topo.n_nodes == 100
        assert topo.n_anchors == 20
        assert topo.n_regular == 80
        assert (topo.positions >= 0).all() and (topo.positions <= 100).all()
        assert topo.central_unit == (50.0, 50.0)

    def test_anchor_free(self):
        topo = netsim.generate_topology(make_cfg(anchor_fraction=0.0))
        assert not topo.anchor_flags.any()
        assert topo.n_regular == topo.n_nodes

    def test_deterministic(self):
        cfg = make_cfg(seed=99)
        a = netsim.generate_topology(cfg)
        b = netsim.generate_topology(cfg)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.anchor_flags, b.anchor_flags)

    def test_rejects_all_anchor(self):
        with pytest.raises(ValueError):
            netsim.generate_topology(make_cfg(anchor_fraction=1.0))

    def test_rejects_tiny_network(self):
        with pytest.raises(ValueError):
            netsim.generate_topology(make_cfg(node_count=1))


class TestAdjacency:
    def test_boundary_included(self):
        topo = manual_topology([[0.0, 0.0], [20.0, 0.0]])
        adj = netsim.compute_adjacency(topo, 20.0)
        assert adj[0, 1] == 1 and adj[1, 0] == 1

    def test_beyond_threshold_excluded(self):
        topo = manual_topology([[0.0, 0.0], [20.01, 0.0]])
        adj = netsim.compute_adjacency(topo, 20.0)
        assert adj[0, 1] == 0

    def test_symmetric_zero_diagonal(self):
        topo = netsim.generate_topology(make_cfg(node_count=40))
        adj = netsim.compute_adjacency(topo, 20.0)
        np.testing.assert_array_equal(adj, adj.T)
        assert np.diag(adj).sum() == 0


class TestInterferenceSigma:
    @pytest.mark.parametrize("scale,n,expected", [
        (0.0, 500, 0.0),
        (1.0, 100, 10.0),
        (0.5, 400, 10.0),
    ])
    def test_values(self, scale, n, expected):
        assert netsim.interference_sigma(scale, n) == pytest.approx(expected)

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            netsim.interference_sigma(1.5, 10)


class TestChannel:
    def test_reference_distance_exact(self):
        cfg = make_cfg(noise_variance=0.0, interference_scale=0.0)
        rng = np.random.default_rng(0)
        assert netsim.sample_rssi(cfg, cfg.ref_distance, rng) == pytest.approx(cfg.ref_rssi)

    def test_decade_decay(self):
        cfg = make_cfg(noise_variance=0.0, interference_scale=0.0, path_loss_exponent=2.0)
        rng = np.random.default_rng(0)
        got = netsim.sample_rssi(cfg, 10.0 * cfg.ref_distance, rng)
        assert got == pytest.approx(cfg.ref_rssi - 20.0)

    def test_monotone_decay(self):
        cfg = make_cfg(noise_variance=0.0, interference_scale=0.0)
        rng = np.random.default_rng(0)
        values = [netsim.sample_rssi(cfg, d, rng) for d in (1.0, 2.0, 5.0, 17.0, 60.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            netsim.sample_rssi(make_cfg(), 0.0, np.random.default_rng(0))

    def test_monte_carlo_statistics(self):
        # sample mean within 3 standard errors of the deterministic part;
        # sample variance within 5% of shadowing var + interference var
        cfg = make_cfg(noise_variance=0.25, interference_scale=0.3, node_count=100)
        d = 7.0
        n_draws = 100_000
        rng = np.random.default_rng(42)
        draws = np.array([netsim.sample_rssi(cfg, d, rng) for _ in range(n_draws)])
        expected_var = cfg.noise_variance + cfg.interference_scale ** 2 * cfg.node_count
        se = math.sqrt(expected_var / n_draws)
        assert abs(draws.mean() - netsim.expected_rssi(cfg, d)) < 3 * se
        assert abs(draws.var() - expected_var) / expected_var < 0.05


class TestAcquireFeatures:
    def setup_method(self):
        self.cfg = make_cfg(node_count=15, anchor_fraction=0.2, window=4,
                            miss_probability=0.1, seed=11)
        self.topo = netsim.generate_topology(self.cfg)
        self.adj = netsim.compute_adjacency(self.topo, self.cfg.radio_range)

    def acquire(self, seed=0):
        return netsim.acquire_features(self.topo, self.adj, self.cfg,
                                       np.random.default_rng(seed))

    def test_output_shape(self):
        n = self.cfg.node_count
        feats = self.acquire()
        assert feats.values.shape == (n, n + 2, self.cfg.window)
        assert feats.missing_mask.shape == feats.values.shape

    def test_anchor_rows(self):
        feats = self.acquire()
        n = self.cfg.node_count
        for i in np.flatnonzero(self.topo.anchor_flags):
            assert (feats.values[i, :n, :] == 0).all()
            assert not feats.missing_mask[i].any()
            np.testing.assert_array_equal(
                feats.values[i, n, :], np.full(self.cfg.window, self.topo.positions[i, 0]))
            np.testing.assert_array_equal(
                feats.values[i, n + 1, :], np.full(self.cfg.window, self.topo.positions[i, 1]))

    def test_regular_rows_have_zero_coordinates(self):
        feats = self.acquire()
        n = self.cfg.node_count
        regular = ~self.topo.anchor_flags
        assert (feats.values[regular][:, n:, :] == 0).all()

    def test_out_of_range_pairs_zero(self):
        feats = self.acquire()
        n = self.cfg.node_count
        for i in range(n):
            for j in range(n):
                if not self.adj[i, j]:
                    assert (feats.values[i, j, :] == 0).all()

    def test_missing_only_on_measured_entries(self):
        feats = self.acquire()
        n = self.cfg.node_count
        measured = self.adj.astype(bool) & ~self.topo.anchor_flags[:, None]
        outside = ~measured[:, :, None] & feats.missing_mask[:, :n, :]
        assert not outside.any()
        assert feats.missing_mask.sum() > 0  # p_miss = 0.1 on this graph

    def test_bit_identical_across_runs(self):
        a = self.acquire(seed=5)
        b = self.acquire(seed=5)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.missing_mask, b.missing_mask)

    def test_anchor_free_measures_everywhere(self):
        cfg = make_cfg(node_count=10, anchor_fraction=0.0, miss_probability=0.0)
        topo = netsim.generate_topology(cfg)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        feats = netsim.acquire_features(topo, adj, cfg, np.random.default_rng(0))
        for i, j in zip(*np.nonzero(adj)):
            assert (feats.values[i, j, :] != 0).all()


class TestRouteAndCount:
    def test_star_all_direct(self):
        # every node inside the collector's range relays only its own packet
        positions = [[50, 55], [50, 45], [45, 50], [56, 50]]
        topo = manual_topology(positions)
        cfg = make_cfg(node_count=4, radio_range=20.0)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        assert rep.forward_counts == [1, 1, 1, 1]
        assert rep.unreachable == []

    def test_chain_hand_enumerated(self):
        # A -- B -- CU with only B in collector range and A only reaching B:
        # B relays its own packet plus A's
        positions = [[14.0, 50.0], [32.0, 50.0], [70.0, 50.0]]
        topo = manual_topology(positions)
        cfg = make_cfg(node_count=3, radio_range=20.0)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        assert rep.forward_counts[1] == 2   # relay
        assert rep.forward_counts[0] == 1   # leaf
        assert rep.forward_counts[2] == 1   # direct
        assert rep.unreachable == []

    def test_anchor_free_total_matches_closed_form(self):
        cfg = make_cfg(node_count=25, anchor_fraction=0.0, window=6, seed=3)
        topo = netsim.generate_topology(cfg)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        expected = sum(
            cfg.window * rep.neighbor_counts[i] + rep.forward_counts[i]
            for i in range(25) if rep.forward_counts[i] is not None)
        assert rep.total_cost == expected
        assert not rep.anchor_based

    def test_anchor_based_costs(self):
        cfg = make_cfg(node_count=20, anchor_fraction=0.25, window=5, seed=13)
        topo = netsim.generate_topology(cfg)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        assert rep.anchor_based
        for i in range(20):
            if rep.forward_counts[i] is None:
                assert rep.per_node_cost[i] is None
            elif topo.anchor_flags[i]:
                assert rep.per_node_cost[i] == cfg.window + rep.forward_counts[i]
            else:
                assert rep.per_node_cost[i] == (
                    cfg.window * rep.neighbor_counts[i] + rep.forward_counts[i])

    def test_unreachable_reported_and_excluded(self):
        # an isolated far-corner node cannot reach the collector
        positions = [[50, 52], [1.0, 1.0]]
        topo = manual_topology(positions)
        cfg = make_cfg(node_count=2, radio_range=10.0)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        assert rep.unreachable == [1]
        assert rep.forward_counts[1] is None
        assert rep.total_cost == rep.per_node_cost[0]

    def test_tie_breaks_to_lower_index(self):
        # both 0 and 1 are direct; node 2 reaches both, so its parent is 0
        positions = [[50.0, 59.0], [50.0, 58.0], [50.0, 68.0]]
        topo = manual_topology(positions)
        cfg = make_cfg(node_count=3, radio_range=10.0)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        assert rep.forward_counts == [2, 1, 1]

    def test_packets_over_tree_edges_equal_forward_sum(self):
        cfg = make_cfg(node_count=30, seed=21, radio_range=30.0)
        topo = netsim.generate_topology(cfg)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        rep = netsim.route_and_count(topo, adj, cfg)
        if not rep.unreachable:  # connected: every node transmits once per subtree node
            assert sum(rep.forward_counts) >= topo.n_nodes


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=30), st.integers(min_value=0, max_value=10_000))
def test_adjacency_always_symmetric(n, seed):
    cfg = SimConfig(node_count=n, seed=seed)
    topo = netsim.generate_topology(cfg)
    adj = netsim.compute_adjacency(topo, cfg.radio_range)
    np.testing.assert_array_equal(adj, adj.T)
    assert np.diag(adj).sum() == 0
