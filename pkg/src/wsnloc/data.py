"""Dataset construction and handling: graph sample records, NDJSON IO,
train-time augmentation, and the train/test and cross-validation splits.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import netsim, preprocess
from .config import SimConfig, sim_config_to_dict
from .model import PreparedSample
from .netsim import FeatureTensor


@dataclass
class GraphSample:
    """One training example: a fixed topology with one noise realization."""

    topology_id: int
    noise_draw_id: int
    positions: np.ndarray      # (N, 2)
    anchor_flags: np.ndarray   # (N,) bool
    edges: np.ndarray          # (M, 2) int with i < j
    features: np.ndarray       # (N, N+2, T) raw values
    missing: np.ndarray        # same shape, bool
    config: SimConfig
    unreachable: list

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    def adjacency(self) -> np.ndarray:
        n = self.n_nodes
        adj = np.zeros((n, n), dtype=np.int8)
        if len(self.edges):
            adj[self.edges[:, 0], self.edges[:, 1]] = 1
            adj[self.edges[:, 1], self.edges[:, 0]] = 1
        return adj


def edges_from_adjacency(adj: np.ndarray) -> np.ndarray:
    i, j = np.nonzero(np.triu(adj, k=1))
    return np.column_stack([i, j]).astype(int)


def build_dataset(cfg: SimConfig, n_topologies: int, draws_per_topology: int,
                  seed: int) -> list[GraphSample]:
    """Fixed positions/anchors/adjacency per topology; fresh channel noise
    per draw. Deterministic for a given seed."""
    if n_topologies < 1 or draws_per_topology < 1:
        raise ValueError("need at least one topology and one draw")
    samples = []
    for topo_id in range(n_topologies):
        topo_rng = np.random.default_rng([seed, topo_id])
        topo = netsim.generate_topology(cfg, topo_rng)
        adj = netsim.compute_adjacency(topo, cfg.radio_range)
        report = netsim.route_and_count(topo, adj, cfg)
        edges = edges_from_adjacency(adj)
        for draw_id in range(draws_per_topology):
            draw_rng = np.random.default_rng([seed, topo_id, draw_id])
            feats = netsim.acquire_features(topo, adj, cfg, draw_rng)
            samples.append(GraphSample(
                topology_id=topo_id,
                noise_draw_id=draw_id,
                positions=topo.positions.copy(),
                anchor_flags=topo.anchor_flags.copy(),
                edges=edges.copy(),
                features=feats.values,
                missing=feats.missing_mask,
                config=cfg,
                unreachable=list(report.unreachable),
            ))
    return samples


# ---------------------------------------------------------------------------
# NDJSON
# ---------------------------------------------------------------------------

def sample_to_record(s: GraphSample) -> dict:
    return {
        "topology_id": s.topology_id,
        "noise_draw_id": s.noise_draw_id,
        "positions": [[float(x), float(y)] for x, y in s.positions],
        "anchor_flags": [bool(v) for v in s.anchor_flags],
        "edges": [[int(i), int(j)] for i, j in s.edges],
        "features": s.features.ravel(order="C").tolist(),
        "missing": [bool(v) for v in s.missing.ravel(order="C")],
        "config": sim_config_to_dict(s.config),
        "unreachable": list(s.unreachable),
    }


def record_to_sample(rec: dict) -> GraphSample:
    cfg = SimConfig(**rec["config"])
    n = len(rec["positions"])
    shape = (n, n + 2, cfg.window)
    return GraphSample(
        topology_id=int(rec["topology_id"]),
        noise_draw_id=int(rec["noise_draw_id"]),
        positions=np.asarray(rec["positions"], dtype=float),
        anchor_flags=np.asarray(rec["anchor_flags"], dtype=bool),
        edges=np.asarray(rec["edges"], dtype=int).reshape(-1, 2),
        features=np.asarray(rec["features"], dtype=float).reshape(shape),
        missing=np.asarray(rec["missing"], dtype=bool).reshape(shape),
        config=cfg,
        unreachable=list(rec.get("unreachable", [])),
    )


def write_ndjson(path: str, samples: list[GraphSample]) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_record(s)) + "\n")


def read_ndjson(path: str) -> list[GraphSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(record_to_sample(json.loads(line)))
    return samples


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

def augment(sample: GraphSample, rng: np.random.Generator,
            augment_probability: float = 0.5,
            edge_removal_fraction: float = 0.10,
            feature_noise_std: float = 0.1) -> GraphSample:
    """Structure- and feature-oriented augmentation, each applied with an
    independent coin flip.

    Edge removal drops a fixed fraction of links and zeroes their RSSI
    readings in both directions. Feature noise perturbs measured RSSI
    entries only; coordinate columns and ground truth are never touched.
    """
    remove_edges = rng.random() < augment_probability
    add_noise = rng.random() < augment_probability
    if not remove_edges and not add_noise:
        return sample

    n = sample.n_nodes
    edges = sample.edges
    features = sample.features.copy()
    missing = sample.missing.copy()

    if remove_edges and len(edges):
        k = netsim.round_half_up(edge_removal_fraction * len(edges))
        if k > 0:
            drop = rng.choice(len(edges), size=k, replace=False)
            for i, j in edges[drop]:
                features[i, j, :] = 0.0
                features[j, i, :] = 0.0
                missing[i, j, :] = False
                missing[j, i, :] = False
            keep = np.ones(len(edges), dtype=bool)
            keep[drop] = False
            edges = edges[keep]

    if add_noise:
        adj = np.zeros((n, n), dtype=bool)
        if len(edges):
            adj[edges[:, 0], edges[:, 1]] = True
            adj[edges[:, 1], edges[:, 0]] = True
        measured = adj & ~sample.anchor_flags[:, None]
        noise = rng.normal(0.0, feature_noise_std, size=features[:, :n, :].shape)
        noise = np.where(measured[:, :, None] & ~missing[:, :n, :], noise, 0.0)
        features[:, :n, :] += noise

    return dataclasses.replace(sample, edges=edges, features=features, missing=missing)


# ---------------------------------------------------------------------------
# preprocessing bridge
# ---------------------------------------------------------------------------

def prepare_sample(sample: GraphSample) -> PreparedSample:
    """Impute + standardize + slice one sample for the model."""
    slices, _ = preprocess.preprocess(
        FeatureTensor(values=sample.features, missing_mask=sample.missing))
    return PreparedSample(
        slices=slices,
        adjacency=sample.adjacency(),
        positions=sample.positions,
        regular_mask=~sample.anchor_flags,
    )


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def train_test_split(samples: list[GraphSample], test_fraction: float, seed: int,
                     by_topology: bool = True) -> tuple[list[GraphSample], list[GraphSample]]:
    """80/20-style split.

    With by_topology, whole topologies (all their noise draws) land on
    one side, so no layout seen in training appears at test time.
    Otherwise the split is stratified per topology over noise draws.
    """
    rng = np.random.default_rng([seed, 71])
    if by_topology:
        topo_ids = sorted({s.topology_id for s in samples})
        shuffled = list(rng.permutation(topo_ids))
        n_test = max(1, netsim.round_half_up(test_fraction * len(topo_ids)))
        test_topos = set(shuffled[:n_test])
        train = [s for s in samples if s.topology_id not in test_topos]
        test = [s for s in samples if s.topology_id in test_topos]
        return train, test

    by_id: dict[int, list[GraphSample]] = {}
    for s in samples:
        by_id.setdefault(s.topology_id, []).append(s)
    train, test = [], []
    for topo_id in sorted(by_id):
        group = sorted(by_id[topo_id], key=lambda s: s.noise_draw_id)
        order = rng.permutation(len(group))
        n_test = max(1, netsim.round_half_up(test_fraction * len(group)))
        picked = set(order[:n_test].tolist())
        for idx, s in enumerate(group):
            (test if idx in picked else train).append(s)
    return train, test


def kfold_split(train_set: list[GraphSample], k: int, seed: int
                ) -> list[tuple[list[GraphSample], list[GraphSample]]]:
    """k disjoint (train, validation) pairs at topology granularity; any
    remainder topologies are spread one per fold."""
    topo_ids = sorted({s.topology_id for s in train_set})
    if k > len(topo_ids):
        raise ValueError(f"cannot make {k} folds from {len(topo_ids)} topologies")
    rng = np.random.default_rng([seed, 72])
    shuffled = list(rng.permutation(topo_ids))
    base = len(shuffled) // k
    remainder = len(shuffled) % k
    folds, start = [], 0
    for f in range(k):
        size = base + (1 if f < remainder else 0)
        folds.append(set(shuffled[start:start + size]))
        start += size
    pairs = []
    for f in range(k):
        val = [s for s in train_set if s.topology_id in folds[f]]
        train = [s for s in train_set if s.topology_id not in folds[f]]
        pairs.append((train, val))
    return pairs
