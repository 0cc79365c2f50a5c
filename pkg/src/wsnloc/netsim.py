"""Sensor-field simulation: topologies, the shadowed RSSI channel with
density-dependent interference, windowed feature acquisition, and the
multi-hop forwarding-cost counters.

All operations are pure functions of (config, rng); RNG state is passed
explicitly so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig


@dataclass
class NetworkTopology:
    positions: np.ndarray      # (N, 2), meters
    anchor_flags: np.ndarray   # (N,) bool
    central_unit: tuple        # (x, y), meters

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_anchors(self) -> int:
        return int(self.anchor_flags.sum())

    @property
    def n_regular(self) -> int:
        return self.n_nodes - self.n_anchors


@dataclass
class FeatureTensor:
    """Raw windowed features: RSSI columns 0..N-1, coordinates in the last two.

    Anchor rows carry only their (x, y); regular rows carry only RSSI
    readings for in-range neighbors. `missing_mask` marks dropped
    measurements awaiting imputation.
    """

    values: np.ndarray         # (N, N+2, T)
    missing_mask: np.ndarray   # same shape, bool


@dataclass
class ComplexityReport:
    neighbor_counts: list      # N_n per node
    forward_counts: list       # packets relayed per node; None if unreachable
    per_node_cost: list        # unit operations; None if unreachable
    total_cost: int
    anchor_based: bool
    unreachable: list          # node indices that cannot reach the collector


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def generate_topology(cfg: SimConfig, rng: np.random.Generator | None = None) -> NetworkTopology:
    """Drop N nodes uniformly on the square field and pick the anchor subset.

    Deterministic for a given cfg.seed when no rng is supplied.
    """
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n = cfg.node_count
    n_anchors = round_half_up(cfg.anchor_fraction * n)
    if n_anchors >= n:
        raise ValueError(
            f"anchor_fraction {cfg.anchor_fraction} leaves no regular nodes (N={n})")
    positions = rng.uniform(0.0, cfg.field_side, size=(n, 2))
    flags = np.zeros(n, dtype=bool)
    if n_anchors > 0:
        flags[rng.choice(n, size=n_anchors, replace=False)] = True
    center = (cfg.field_side / 2.0, cfg.field_side / 2.0)
    return NetworkTopology(positions=positions, anchor_flags=flags, central_unit=center)


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def compute_adjacency(topo: NetworkTopology, radio_range: float) -> np.ndarray:
    """Binary connectivity: linked iff Euclidean distance <= radio_range, no self-links."""
    d = pairwise_distances(topo.positions)
    adj = (d <= radio_range)
    np.fill_diagonal(adj, False)
    return adj.astype(np.int8)


def interference_sigma(scale: float, n_nodes: int) -> float:
    """Std of the density-dependent disturbance: scale * sqrt(N)."""
    if not 0.0 <= scale <= 1.0:
        raise ValueError("interference scale must lie in [0, 1]")
    if n_nodes < 0:
        raise ValueError("node count must be non-negative")
    return scale * math.sqrt(n_nodes)


def expected_rssi(cfg: SimConfig, distance: float) -> float:
    """Deterministic part of the channel: reference power minus log-distance decay."""
    d = max(distance, cfg.min_distance)
    return cfg.ref_rssi - 10.0 * cfg.path_loss_exponent * math.log10(d / cfg.ref_distance)


def sample_rssi(cfg: SimConfig, distance: float, rng: np.random.Generator) -> float:
    """One shadowed reading at the given distance, in dBm.

    Subtracts a zero-mean Gaussian shadowing term (std = sqrt of the
    configured variance) and an interference term whose std grows with
    network density. Consumes exactly two normal draws.
    """
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance}")
    shadowing = rng.normal(0.0, math.sqrt(cfg.noise_variance))
    disturbance = rng.normal(0.0, interference_sigma(cfg.interference_scale, cfg.node_count))
    return expected_rssi(cfg, distance) - shadowing - disturbance


def acquire_features(topo: NetworkTopology, adjacency: np.ndarray, cfg: SimConfig,
                     rng: np.random.Generator) -> FeatureTensor:
    """Collect the windowed feature tensor for every node.

    Per timestamp, each regular node reads RSSI from every in-range
    neighbor (fresh, independent draws per direction); each reading is
    independently lost with cfg.miss_probability. Anchor rows skip the
    radio entirely and publish their coordinates in the last two slots.
    With anchor_fraction = 0 every node is regular.
    """
    n = topo.n_nodes
    t_steps = cfg.window
    values = np.zeros((n, n + 2, t_steps))
    missing = np.zeros((n, n + 2, t_steps), dtype=bool)

    det = np.zeros((n, n))
    dist = pairwise_distances(topo.positions)
    clamped = np.maximum(dist, cfg.min_distance)
    with np.errstate(divide="ignore"):
        det = cfg.ref_rssi - 10.0 * cfg.path_loss_exponent * np.log10(
            clamped / cfg.ref_distance)

    regular = ~topo.anchor_flags
    measured = (adjacency.astype(bool)) & regular[:, None]   # row i measures col j

    sigma_sh = math.sqrt(cfg.noise_variance)
    sigma_int = interference_sigma(cfg.interference_scale, cfg.node_count)
    for t in range(t_steps):
        shadowing = rng.normal(0.0, 1.0, size=(n, n)) * sigma_sh
        disturbance = rng.normal(0.0, 1.0, size=(n, n)) * sigma_int
        reading = det - shadowing - disturbance
        values[:, :n, t] = np.where(measured, reading, 0.0)
        lost = (rng.random((n, n)) < cfg.miss_probability) & measured
        missing[:, :n, t] = lost
        values[:, :n, t][lost] = 0.0

    anchors = np.flatnonzero(topo.anchor_flags)
    values[anchors, n, :] = topo.positions[anchors, 0][:, None]
    values[anchors, n + 1, :] = topo.positions[anchors, 1][:, None]
    return FeatureTensor(values=values, missing_mask=missing)


def route_and_count(topo: NetworkTopology, adjacency: np.ndarray, cfg: SimConfig) -> ComplexityReport:
    """Build the minimum-hop forwarding tree toward the central unit and
    tally per-node measurement + relay costs.

    Nodes within radio range of the central unit transmit directly;
    everyone else relays through the lowest-index neighbor one hop
    closer. A node forwards one packet per node in its subtree
    (including its own). Unreachable nodes are reported, not dropped
    silently, and excluded from the totals.
    """
    n = topo.n_nodes
    cu = np.asarray(topo.central_unit)
    direct = np.sqrt(((topo.positions - cu) ** 2).sum(axis=1)) <= cfg.radio_range

    # BFS levels out from the collector; parent = lowest-index candidate
    level = np.full(n, -1, dtype=int)
    parent = np.full(n, -1, dtype=int)  # -1 means the central unit
    frontier = sorted(np.flatnonzero(direct))
    for i in frontier:
        level[i] = 1
    adj_bool = adjacency.astype(bool)
    current = frontier
    while current:
        nxt = []
        for j in range(n):
            if level[j] != -1:
                continue
            candidates = [i for i in current if adj_bool[i, j]]
            if candidates:
                parent[j] = min(candidates)
                level[j] = level[parent[j]] + 1
                nxt.append(j)
        current = nxt

    reachable = level != -1
    unreachable = [int(i) for i in np.flatnonzero(~reachable)]

    # packets forwarded = own packet + everything from the subtree below
    forwards = [1 if reachable[i] else None for i in range(n)]
    for j in sorted(range(n), key=lambda k: -level[k]):
        if reachable[j] and parent[j] >= 0:
            forwards[parent[j]] += forwards[j]

    neighbor_counts = [int(adj_bool[i].sum()) for i in range(n)]
    anchor_based = topo.n_anchors > 0
    t_steps = cfg.window
    costs = []
    for i in range(n):
        if not reachable[i]:
            costs.append(None)
        elif anchor_based and topo.anchor_flags[i]:
            costs.append(t_steps + forwards[i])
        else:
            costs.append(t_steps * neighbor_counts[i] + forwards[i])
    total = sum(c for c in costs if c is not None)
    return ComplexityReport(
        neighbor_counts=neighbor_counts,
        forward_counts=forwards,
        per_node_cost=costs,
        total_cost=total,
        anchor_based=anchor_based,
        unreachable=unreachable,
    )
