"""In/out/weak/strong components of a directed graph and their largest sizes.

A node always belongs to its own components, so every size is >= 1 and the
strong component of u is exactly the SCC containing u. "Weak" here is the
union of the in- and out-component, not undirected connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass
from graphlib import TopologicalSorter

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .graph import SinrGraph
from .model import ModelError

TYPES = ("in", "out", "weak", "strong")

# node labels for snapshot export
UNRELATED, STRONG, IN_ONLY, OUT_ONLY = 0, 1, 2, 3

EXACT_LIMIT = 1 << 16


def _check_root(g: SinrGraph, u) -> int:
    if not (isinstance(u, (int, np.integer)) and 0 <= u < g.n):
        raise ModelError(f"node id {u!r} outside [0, {g.n})")
    return int(u)


def out_component(g: SinrGraph, u: int) -> np.ndarray:
    """Sorted ids of all nodes reachable from u (u included)."""
    u = _check_root(g, u)
    order = breadth_first_order(g.adjacency, u, directed=True, return_predecessors=False)
    return np.sort(order)


def in_component(g: SinrGraph, u: int) -> np.ndarray:
    """Sorted ids of all nodes that can reach u (u included)."""
    u = _check_root(g, u)
    order = breadth_first_order(g.reverse, u, directed=True, return_predecessors=False)
    return np.sort(order)


@dataclass(frozen=True)
class ComponentReport:
    root: int
    n: int
    in_set: np.ndarray
    out_set: np.ndarray
    weak_set: np.ndarray
    strong_set: np.ndarray

    def sizes(self) -> dict:
        return {t: len(getattr(self, f"{t}_set")) for t in TYPES}

    def fractions(self) -> dict:
        return {t: s / self.n for t, s in self.sizes().items()}


def component_report(g: SinrGraph, u: int) -> ComponentReport:
    ins = in_component(g, u)
    outs = out_component(g, u)
    return ComponentReport(
        root=int(u),
        n=g.n,
        in_set=ins,
        out_set=outs,
        weak_set=np.union1d(ins, outs),
        strong_set=np.intersect1d(ins, outs, assume_unique=True),
    )


def component_labels(g: SinrGraph, u: int) -> np.ndarray:
    """Per-node label: 1 strong, 2 in-only, 3 out-only, 0 unrelated."""
    rep = component_report(g, u)
    labels = np.full(g.n, UNRELATED, dtype=np.int8)
    labels[rep.in_set] = IN_ONLY
    labels[rep.out_set] = OUT_ONLY
    labels[rep.strong_set] = STRONG
    return labels


@dataclass(frozen=True)
class GiantStats:
    n: int
    largest: dict  # type -> size
    root: dict  # type -> a node achieving it
    exact: bool = True

    def fraction(self, kind: str) -> float:
        return self.largest[kind] / self.n if self.n else 0.0

    def fractions(self) -> dict:
        return {t: self.fraction(t) for t in TYPES}


def strong_components(g: SinrGraph):
    return connected_components(g.adjacency, directed=True, connection="strong")


def _condensation(g: SinrGraph, labels: np.ndarray, k: int) -> dict:
    coo = g.adjacency.tocoo()
    a, b = labels[coo.row], labels[coo.col]
    cross = a != b
    pairs = np.unique(np.column_stack((a[cross], b[cross])), axis=0) if cross.any() else np.zeros((0, 2), int)
    children = {c: [] for c in range(k)}
    for s, t in pairs.tolist():
        children[s].append(t)
    return children


def _closure_sizes(children: dict, masks: list) -> list:
    """|nodes reachable from each super-node|, via bitset union in topological order."""
    reach = [0] * len(masks)
    # TopologicalSorter wants predecessors: make each node depend on its children
    for c in TopologicalSorter(children).static_order():
        m = masks[c]
        for ch in children[c]:
            m |= reach[ch]
        reach[c] = m
    return [r.bit_count() for r in reach]


def giant_stats(g: SinrGraph, *, exact_limit: int = EXACT_LIMIT, sample_roots: int = 256, seed: int = 0) -> GiantStats:
    n = g.n
    if n == 0:
        return GiantStats(0, {t: 0 for t in TYPES}, {t: -1 for t in TYPES})
    k, labels = strong_components(g)
    scc_size = np.bincount(labels, minlength=k)
    rep_node = np.zeros(k, dtype=np.int64)
    rep_node[labels[::-1]] = np.arange(n)[::-1]  # lowest id in each SCC

    if k > exact_limit:
        return _sampled_stats(g, labels, scc_size, sample_roots, seed)

    masks = [0] * k
    for node, c in enumerate(labels.tolist()):
        masks[c] |= 1 << node
    down = _condensation(g, labels, k)
    up = {c: [] for c in range(k)}
    for s, ts in down.items():
        for t in ts:
            up[t].append(s)
    out_sizes = np.array(_closure_sizes(down, masks))
    in_sizes = np.array(_closure_sizes(up, masks))
    weak_sizes = in_sizes + out_sizes - scc_size

    largest, root = {}, {}
    for kind, arr in (("in", in_sizes), ("out", out_sizes), ("weak", weak_sizes), ("strong", scc_size)):
        c = int(np.argmax(arr))
        largest[kind] = int(arr[c])
        root[kind] = int(rep_node[c])
    return GiantStats(n, largest, root, exact=True)


def _sampled_stats(g, labels, scc_size, sample_roots, seed) -> GiantStats:
    rng = np.random.default_rng(seed)
    roots = rng.choice(g.n, size=min(sample_roots, g.n), replace=False)
    largest = {t: 0 for t in TYPES}
    root = {t: -1 for t in TYPES}
    c = int(np.argmax(scc_size))
    largest["strong"], root["strong"] = int(scc_size[c]), int(np.flatnonzero(labels == c)[0])
    for u in roots.tolist():
        sizes = component_report(g, u).sizes()
        for t in ("in", "out", "weak"):
            if sizes[t] > largest[t]:
                largest[t], root[t] = sizes[t], u
    return GiantStats(g.n, largest, root, exact=False)

