"""Louvain clustering, cluster polarization, AMI and cluster intersections.

Directed graphs are symmetrized (``w'_uv = w_uv + w_vu``) before any
modularity computation; resolution is fixed at 1.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .graphs import NO, YES

log = logging.getLogger(__name__)


class ModularityUndefined(ValueError):
    """The graph has zero total edge weight."""


@dataclass(frozen=True)
class Partition:
    """Node -> community id, ids dense from 0 and ordered by decreasing size
    (ties by smallest member id)."""

    assignment: Mapping[str, int]
    modularity: float = float("nan")
    levels: tuple[float, ...] = ()

    @property
    def sizes(self) -> tuple[int, ...]:
        counts = Counter(self.assignment.values())
        return tuple(counts[c] for c in range(len(counts)))

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def members(self, c: int) -> list[str]:
        return sorted(u for u, x in self.assignment.items() if x == c)

    def clusters(self) -> list[list[str]]:
        out = [[] for _ in range(self.n_communities)]
        for u in sorted(self.assignment):
            out[self.assignment[u]].append(u)
        return out


def canonical_partition(labels: Mapping[str, object], modularity=float("nan"), levels=()) -> Partition:
    """Relabel communities densely by (-size, smallest member)."""
    groups = defaultdict(list)
    for u, c in labels.items():
        groups[c].append(u)
    ordered = sorted(groups.values(), key=lambda ms: (-len(ms), min(ms)))
    assignment = {u: i for i, ms in enumerate(ordered) for u in ms}
    return Partition(dict(sorted(assignment.items())), modularity, tuple(levels))


def _as_labels(p) -> Mapping[str, object]:
    return p.assignment if isinstance(p, Partition) else p


def modularity(g, partition) -> float:
    """Weighted Newman-Girvan modularity of *partition* on the undirected view of *g*."""
    labels = _as_labels(partition)
    missing = [u for u in g.nodes if u not in labels]
    if missing:
        raise ValueError(f"partition does not assign {len(missing)} nodes, e.g. {missing[0]!r}")
    weights = g.undirected_weights()
    m = float(sum(weights.values()))
    if m <= 0:
        raise ModularityUndefined("graph has zero total weight")
    tot: dict = defaultdict(float)
    inside: dict = defaultdict(float)
    for (u, v), w in weights.items():
        tot[labels[u]] += w
        tot[labels[v]] += w
        if labels[u] == labels[v]:
            inside[labels[u]] += 2 * w
    return sum(inside[c] / (2 * m) - (tot[c] / (2 * m)) ** 2 for c in tot)


# -- Louvain -------------------------------------------------------------------

class _Level:
    """Integer-indexed symmetric graph; ``loops[i]`` is the diagonal entry A_ii."""

    def __init__(self, n, adj, loops):
        self.n = n
        self.adj = adj  # list of dict j -> A_ij, j != i
        self.loops = loops
        self.k = [loops[i] + sum(adj[i].values()) for i in range(n)]
        self.m2 = sum(self.k)

    def quality(self, comm) -> float:
        tot = defaultdict(float)
        inside = defaultdict(float)
        for i in range(self.n):
            tot[comm[i]] += self.k[i]
            inside[comm[i]] += self.loops[i]
            for j, w in self.adj[i].items():
                if comm[j] == comm[i]:
                    inside[comm[i]] += w
        return sum(inside[c] / self.m2 - (tot[c] / self.m2) ** 2 for c in tot)

    def aggregate(self, comm):
        labels = sorted(set(comm))
        remap = {c: i for i, c in enumerate(labels)}
        n = len(labels)
        adj = [defaultdict(float) for _ in range(n)]
        loops = [0.0] * n
        for i in range(self.n):
            ci = remap[comm[i]]
            loops[ci] += self.loops[i]
            for j, w in self.adj[i].items():
                cj = remap[comm[j]]
                if ci == cj:
                    loops[ci] += w
                else:
                    adj[ci][cj] += w
        return _Level(n, [dict(sorted(a.items())) for a in adj], loops), [remap[c] for c in comm]


def _move_nodes(level: _Level, rng: random.Random, start=None) -> tuple[list[int], bool]:
    n, k, m2 = level.n, level.k, level.m2
    comm = list(range(n)) if start is None else list(start)
    tot = [0.0] * n
    for i in range(n):
        tot[comm[i]] += k[i]
    improved = False
    eps = 1e-12 * max(m2, 1.0)
    while True:
        order = list(range(n))
        rng.shuffle(order)
        moves = 0
        for i in order:
            ci = comm[i]
            links = defaultdict(float)
            for j, w in level.adj[i].items():
                links[comm[j]] += w
            tot[ci] -= k[i]
            best, best_gain = ci, links.get(ci, 0.0) - tot[ci] * k[i] / m2
            for c in sorted(links):
                gain = links[c] - tot[c] * k[i] / m2
                if gain > best_gain + eps:
                    best, best_gain = c, gain
            tot[best] += k[i]
            comm[i] = best
            if best != ci:
                moves += 1
        if not moves:
            break
        improved = True
    return comm, improved


def louvain(g, seed: int = 42) -> Partition:
    """Two-phase Louvain on the undirected view of *g*.

    Local moving and aggregation alternate until no node moves. The
    hierarchy is then unfolded level by level, re-running local moving on
    each finer level from the projected partition (multilevel refinement).
    Node visiting order is shuffled with ``random.Random(seed)``.

    The returned ``modularity`` is ``modularity(g, assignment)``; ``levels``
    holds the modularity after each aggregation phase and, last, after
    refinement. It is non-decreasing.
    """
    nodes = list(g.nodes)
    if not nodes:
        raise ValueError("cannot cluster an empty graph")
    idx = {u: i for i, u in enumerate(nodes)}
    adj = [dict() for _ in nodes]
    loops = [0.0] * len(nodes)
    for (u, v), w in g.undirected_weights().items():
        if u == v:
            loops[idx[u]] += 2 * w
        else:
            adj[idx[u]][idx[v]] = adj[idx[u]].get(idx[v], 0.0) + w
            adj[idx[v]][idx[u]] = adj[idx[v]].get(idx[u], 0.0) + w
    base = _Level(len(nodes), [dict(sorted(a.items())) for a in adj], loops)
    if base.m2 == 0:
        return canonical_partition({u: u for u in nodes})

    rng = random.Random(seed)
    levels, maps = [base], []
    history = [base.quality(list(range(base.n)))]
    level = base
    while True:
        comm, improved = _move_nodes(level, rng)
        if not improved:
            break
        history.append(level.quality(comm))
        _check_monotone(history)
        level, remap = level.aggregate(comm)
        levels.append(level)
        maps.append(remap)
        if level.n == 1:
            break

    comm = list(range(levels[-1].n))
    for li in reversed(range(len(maps))):
        comm = [comm[c] for c in maps[li]]
        comm, _ = _move_nodes(levels[li], rng, comm)
    history.append(base.quality(comm))
    _check_monotone(history)

    part = canonical_partition({u: comm[i] for i, u in enumerate(nodes)})
    return Partition(part.assignment, modularity(g, part), tuple(history[1:]))


def _check_monotone(history):
    if history[-1] < history[-2] - 1e-12:
        raise AssertionError(f"modularity decreased across phases: {history[-2]} -> {history[-1]}")


# -- cluster polarization ----------------------------------------------------

@dataclass(frozen=True)
class ClusterScore:
    community: int
    size: int
    yes: int
    no: int
    p_c: float | None

    def as_dict(self):
        return {"community": self.community, "size": self.size, "yes": self.yes, "no": self.no, "p_c": self.p_c}


def cluster_polarization(p: Partition, user_class: Mapping[str, str]) -> list[ClusterScore]:
    """Per-community YES/NO counts and ``p_c = (Y - N) / (Y + N)``; UNK users are ignored."""
    yes = Counter()
    no = Counter()
    for u, c in p.assignment.items():
        cls = user_class.get(u)
        if cls == YES:
            yes[c] += 1
        elif cls == NO:
            no[c] += 1
    out = []
    for c, size in enumerate(p.sizes):
        y, n = yes[c], no[c]
        out.append(ClusterScore(c, size, y, n, (y - n) / (y + n) if y + n else None))
    return out


# -- adjusted mutual information ---------------------------------------------

def contingency(a: Mapping, b: Mapping, common: Iterable) -> np.ndarray:
    rows = {c: i for i, c in enumerate(sorted({a[u] for u in common}, key=str))}
    cols = {c: i for i, c in enumerate(sorted({b[u] for u in common}, key=str))}
    table = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for u in common:
        table[rows[a[u]], cols[b[u]]] += 1
    return table


# Sums below use math.fsum: it is correctly rounded, so the result does not
# depend on the order of rows and columns, i.e. on how clusters are labelled.

def _entropy(counts, n) -> float:
    return -math.fsum(int(c) / n * math.log(int(c) / n) for c in counts if c)


def mutual_information(table: np.ndarray) -> float:
    n = int(table.sum())
    a = [int(x) for x in table.sum(axis=1)]
    b = [int(x) for x in table.sum(axis=0)]
    return math.fsum(
        int(table[i, j]) / n * math.log(n * int(table[i, j]) / (a[i] * b[j])) for i, j in zip(*np.nonzero(table))
    )


def expected_mutual_information(a: Iterable[int], b: Iterable[int]) -> float:
    """E[MI] over random relabellings with fixed marginals (hypergeometric model)."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    n = sum(a)
    lg = math.lgamma
    terms = []
    for ai in a:
        for bj in b:
            const = lg(ai + 1) + lg(bj + 1) + lg(n - ai + 1) + lg(n - bj + 1) - lg(n + 1)
            for nij in range(max(1, ai + bj - n), min(ai, bj) + 1):
                logp = const - lg(nij + 1) - lg(ai - nij + 1) - lg(bj - nij + 1) - lg(n - ai - bj + nij + 1)
                terms.append(nij / n * math.log(n * nij / (ai * bj)) * math.exp(logp))
    return math.fsum(terms)


def ami_from_table(table: np.ndarray) -> float:
    n = int(table.sum())
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    r, c = len(a), len(b)
    # trivially identical: one block each, or all singletons on both sides
    if (r == c == 1) or (r == c == n):
        return 1.0
    mi = mutual_information(table)
    emi = expected_mutual_information(a, b)
    h = 0.5 * (_entropy(a, n) + _entropy(b, n))
    denom = h - emi
    if abs(denom) < 1e-15:
        return 1.0 if _identical(table) else 0.0
    return float((mi - emi) / denom)


def _identical(table: np.ndarray) -> bool:
    nz = table > 0
    return bool((nz.sum(axis=0) == 1).all() and (nz.sum(axis=1) == 1).all())


def ami(p1, p2, common: Iterable | None = None) -> float:
    """Adjusted mutual information (arithmetic-mean normalization) of two
    clusterings restricted to *common* (default: nodes present in both)."""
    a, b = _as_labels(p1), _as_labels(p2)
    if common is None:
        common = set(a) & set(b)
    common = sorted(common)
    if len(common) < 2:
        raise ValueError("AMI needs at least two common nodes")
    return ami_from_table(contingency(a, b, common))


# -- cluster-to-cluster comparison -------------------------------------------

def top_clusters(p: Partition, k: int) -> list[set]:
    return [set(ms) for ms in p.clusters()[:k]]


def intersection_matrix(rows: list[set], cols: list[set]) -> np.ndarray:
    """``cell[i, j] = |rows[i] & cols[j]| / |rows[i]|``."""
    out = np.zeros((len(rows), len(cols)))
    for i, r in enumerate(rows):
        if not r:
            log.warning("empty cluster in row %d; leaving zeros", i)
            continue
        for j, c in enumerate(cols):
            out[i, j] = len(r & c) / len(r)
    return out


def size_distribution(p: Partition) -> list[int]:
    return sorted(p.sizes, reverse=True)


def write_partition_csv(p: Partition, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "community"])
        for u, c in sorted(p.assignment.items()):
            w.writerow([u, c])


def read_partition_csv(path) -> Partition:
    with open(path, newline="", encoding="utf-8") as fh:
        labels = {row["node"]: int(row["community"]) for row in csv.DictReader(fh)}
    return canonical_partition(labels)
