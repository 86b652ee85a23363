"""Directed SINR graph construction and its min/max undirected couplings."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .model import AttenuationModel, ModelError, SinrParams
from .sampling import Configuration

MIN_RULE = "min_rule"
MAX_RULE = "max_rule"

_CHUNK = 1 << 22  # pair evaluations per block in the O(n^2) shot-noise pass


def pair_distances(config: Configuration, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Distances between node arrays i and j (minimum image on a torus)."""
    diff = np.abs(config.positions[i] - config.positions[j])
    if config.region.torus:
        box = np.array([config.region.width, config.region.height])
        diff = np.minimum(diff, box - diff)
    return np.hypot(diff[..., 0], diff[..., 1])


def shot_noise_totals(config: Configuration, model: AttenuationModel,
                      params: SinrParams | None = None) -> np.ndarray:
    """S_j = sum over k != j of P_k L(d_kj), computed exactly over the region."""
    n = config.n
    totals = np.zeros(n)
    if n < 2:
        return totals
    powers = config.node_powers(params, model)
    x, y = config.positions[:, 0], config.positions[:, 1]
    w, h = config.region.width, config.region.height
    block = max(1, _CHUNK // n)
    for start in range(0, n, block):
        stop = min(n, start + block)
        if config.region.torus:
            dx = np.abs(x[start:stop, None] - x[None, :])
            dy = np.abs(y[start:stop, None] - y[None, :])
            np.minimum(dx, w - dx, out=dx)
            np.minimum(dy, h - dy, out=dy)
            dist = np.sqrt(dx * dx + dy * dy)
        else:
            dist = cdist(config.positions[start:stop], config.positions)
        gain = model(dist) * powers[None, :]
        rows = np.arange(stop - start)
        gain[rows, start + rows] = 0.0
        totals[start:stop] = gain.sum(axis=1)
    return totals


@dataclass(frozen=True, eq=False)
class SinrGraph:
    """Directed graph with edge (i, j) iff beta_ij >= beta.

    `adjacency` is a boolean CSR matrix with sorted column indices;
    row i lists the out-neighbours of node i.
    """

    adjacency: sparse.csr_matrix
    params: SinrParams | None = None
    config_digest: str = ""
    receiver_totals: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        a = sparse.csr_matrix(self.adjacency, dtype=bool)
        a.setdiag(False)
        a.eliminate_zeros()
        a.sort_indices()
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, n: int, edges, **kw) -> "SinrGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        data = np.ones(len(edges), dtype=bool)
        a = sparse.csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n, n), dtype=bool)
        return cls(a, **kw)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.nnz)

    @cached_property
    def reverse(self) -> sparse.csr_matrix:
        r = self.adjacency.T.tocsr()
        r.sort_indices()
        return r

    def out_neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack((coo.row[order], coo.col[order])).astype(np.int64)

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges()}

    def to_csv(self, path: str | Path) -> None:
        meta = {"n": self.n, "config": self.config_digest}
        if self.params is not None:
            meta.update(beta=self.params.beta, n0=self.params.n0, gamma=self.params.gamma)
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(["i", "j"])
            w.writerows(self.edges().tolist())


def _candidate_pairs(config: Configuration, r_max: float) -> np.ndarray:
    """All unordered pairs within r_max, as an (m, 2) array with i < j."""
    if config.n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if not np.isfinite(r_max):
        i, j = np.triu_indices(config.n, k=1)
        return np.column_stack((i, j)).astype(np.int64)
    if config.region.torus:
        # cKDTree needs points in [0, box); positions on the far edge wrap to 0
        box = np.array([config.region.width, config.region.height])
        pts = np.mod(config.positions, box)
        tree = cKDTree(pts, boxsize=box)
    else:
        tree = cKDTree(config.positions)
    pairs = tree.query_pairs(r_max, output_type="ndarray")
    return pairs.astype(np.int64).reshape(-1, 2)


def build_directed(config: Configuration, params: SinrParams, model: AttenuationModel | None = None) -> SinrGraph:
    """Directed SINR graph over `config`.

    gamma = 0 uses the radius rule d_ij <= R_i on fixed-radius neighbour
    candidates. gamma > 0 keeps the same candidates (interference only removes
    links) and filters them with the exact SINR, with interference at j equal
    to S_j - P_i L(d_ij).
    """
    n = config.n
    radii = config.node_radii(params, model) if params.n0 > 0 or config.radii is not None else np.full(n, np.inf)
    r_max = float(np.max(radii)) if n else 0.0
    pairs = _candidate_pairs(config, r_max)
    # both orientations of every candidate pair
    src = np.concatenate((pairs[:, 0], pairs[:, 1]))
    dst = np.concatenate((pairs[:, 1], pairs[:, 0]))
    dist = pair_distances(config, src, dst)

    totals = None
    if params.gamma == 0:
        keep = dist <= radii[src]
    else:
        if model is None:
            raise ModelError("gamma > 0 needs an attenuation model")
        powers = config.node_powers(params, model)
        totals = shot_noise_totals(config, model, params)
        keep = dist <= radii[src]
        s, d, dd = src[keep], dst[keep], dist[keep]
        signal = powers[s] * model(dd)
        interference = np.maximum(totals[d] - signal, 0.0)
        ok = signal >= params.beta * (params.n0 + params.gamma * interference)
        idx = np.flatnonzero(keep)
        keep = np.zeros_like(keep)
        keep[idx[ok]] = True
    edges = np.column_stack((src[keep], dst[keep]))
    g = SinrGraph.from_edges(n, edges, params=params, config_digest=config.digest())
    if totals is not None:
        object.__setattr__(g, "receiver_totals", totals)
    return g


def sinr_matrix(config: Configuration, params: SinrParams, model: AttenuationModel) -> np.ndarray:
    """Dense beta_ij for all ordered pairs (reference path, O(n^2) memory)."""
    n = config.n
    powers = config.node_powers(params, model)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    gain = powers[i] * model(pair_distances(config, i, j))
    np.fill_diagonal(gain, 0.0)
    totals = gain.sum(axis=0)  # received at column j
    interference = totals[None, :] - gain
    with np.errstate(divide="ignore", invalid="ignore"):
        out = gain / (params.n0 + params.gamma * interference)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class UndirectedView:
    mode: str
    adjacency: sparse.csr_matrix

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> np.ndarray:
        """Undirected edges as (i, j) rows with i < j, sorted."""
        coo = sparse.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack((coo.row[order], coo.col[order])).astype(np.int64)

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges()}

    def connected_components(self):
        """Ordinary undirected connectivity (diagnostic only)."""
        return connected_components(self.adjacency, directed=False)


def derive_undirected(g: SinrGraph, mode: str) -> UndirectedView:
    a = g.adjacency
    at = g.reverse
    if mode == MIN_RULE:
        u = a.multiply(at)
    elif mode == MAX_RULE:
        u = a + at
    else:
        raise ModelError(f"unknown undirected mode {mode!r}")
    u = sparse.csr_matrix(u, dtype=bool)
    u.eliminate_zeros()
    u.sort_indices()
    return UndirectedView(mode, u)
