"""Hashtag co-occurrence graphs and directed weighted retweet graphs.

Both graph types keep their nodes sorted and expose edges in sorted order so
every downstream computation iterates deterministically.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from . import DataError
from .ingest import TweetRecord


@dataclass(frozen=True)
class HashtagGraph:
    """Undirected co-occurrence graph; ``weights`` is keyed by ``(a, b)`` with ``a < b``."""

    nodes: tuple[str, ...]
    weights: Mapping[tuple[str, str], int]

    @property
    def edges(self):
        return sorted(self.weights.items())

    def weighted_degree(self) -> dict[str, int]:
        deg = dict.fromkeys(self.nodes, 0)
        for (a, b), w in self.weights.items():
            deg[a] += w
            deg[b] += w
        return deg

    def undirected_weights(self) -> dict[tuple[str, str], float]:
        return dict(self.weights)

    def induced(self, keep: Iterable[str]) -> HashtagGraph:
        keep = set(keep) & set(self.nodes)
        w = {e: x for e, x in self.weights.items() if e[0] in keep and e[1] in keep}
        return HashtagGraph(tuple(sorted(keep)), w)


def build_hashtag_graph(records: Iterable[TweetRecord]) -> HashtagGraph:
    nodes: set[str] = set()
    weights: dict[tuple[str, str], int] = defaultdict(int)
    for rec in records:
        tags = sorted(set(rec.hashtags))
        nodes.update(tags)
        for i, a in enumerate(tags):
            for b in tags[i + 1 :]:
                weights[a, b] += 1
    return HashtagGraph(tuple(sorted(nodes)), dict(sorted(weights.items())))


def top_by_weighted_degree(g: HashtagGraph, n: int) -> list[str]:
    """The *n* tags with the largest weighted degree, ties lexicographic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    deg = g.weighted_degree()
    return sorted(deg, key=lambda t: (-deg[t], t))[:n]


def prune_nodes(g, stoplist: Iterable[str]):
    stop = set(stoplist)
    return g.induced(t for t in g.nodes if t not in stop)


@dataclass(frozen=True)
class RetweetGraph:
    """Directed graph: edge ``(u, v)`` weighs how many times *u* retweeted *v*.

    ``polarization`` maps users to p_u in [-1, 1]; users without scored
    tweets are absent from it.
    """

    nodes: tuple[str, ...]
    weights: Mapping[tuple[str, str], int]
    polarization: Mapping[str, float] = field(default_factory=dict)

    @property
    def edges(self):
        return sorted(self.weights.items())

    @property
    def total_weight(self) -> int:
        return sum(self.weights.values())

    def __len__(self):
        return len(self.nodes)

    def index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.nodes)}

    def with_polarization(self, p: Mapping[str, float]) -> RetweetGraph:
        for u, x in p.items():
            if not -1.0 <= x <= 1.0 or math.isnan(x):
                raise ValueError(f"polarization of {u} out of range: {x}")
        return RetweetGraph(self.nodes, self.weights, {u: p[u] for u in self.nodes if u in p})

    def induced(self, keep: Iterable[str]) -> RetweetGraph:
        keep = set(keep) & set(self.nodes)
        w = {e: x for e, x in self.weights.items() if e[0] in keep and e[1] in keep}
        pol = {u: x for u, x in self.polarization.items() if u in keep}
        return RetweetGraph(tuple(sorted(keep)), w, pol)

    def undirected_weights(self) -> dict[tuple[str, str], float]:
        """Symmetrized weights ``w_uv + w_vu`` keyed by ``(min, max)``."""
        out: dict[tuple[str, str], float] = defaultdict(float)
        for (u, v), w in self.weights.items():
            out[min(u, v), max(u, v)] += w
        return dict(sorted(out.items()))


def build_retweet_graph(records: Iterable[TweetRecord]) -> RetweetGraph:
    nodes: set[str] = set()
    weights: dict[tuple[str, str], int] = defaultdict(int)
    for rec in records:
        if rec.retweeted_author_id is None:
            continue
        u, v = rec.author_id, rec.retweeted_author_id
        nodes.add(u)
        nodes.add(v)
        if u != v:
            weights[u, v] += 1
    return RetweetGraph(tuple(sorted(nodes)), dict(sorted(weights.items())))


def weakly_connected_components(g) -> list[list[str]]:
    """Components ignoring direction, each sorted, ordered by (-size, min id)."""
    parent = {u: u for u in g.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in g.weights:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups: dict[str, list[str]] = defaultdict(list)
    for u in g.nodes:
        groups[find(u)].append(u)
    comps = [sorted(c) for c in groups.values()]
    return sorted(comps, key=lambda c: (-len(c), c[0]))


def giant_wcc(g):
    comps = weakly_connected_components(g)
    return g.induced(comps[0] if comps else [])


# -- CSV interchange -----------------------------------------------------------

def write_edge_csv(g, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for (u, v), x in g.edges:
            w.writerow([u, v, x])


def write_node_csv(g: RetweetGraph, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "p_u"])
        for u in g.nodes:
            p = g.polarization.get(u)
            w.writerow([u, "" if p is None else repr(float(p))])


def read_retweet_graph(edge_path, node_path=None) -> RetweetGraph:
    nodes: set[str] = set()
    weights: dict[tuple[str, str], int] = {}
    with open(edge_path, newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.DictReader(fh), start=2):
            try:
                u, v, w = row["src"], row["dst"], int(row["weight"])
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{edge_path} line {line}: bad edge row ({exc})") from None
            nodes.update((u, v))
            weights[u, v] = w
    pol = {}
    if node_path is not None:
        with open(node_path, newline="", encoding="utf-8") as fh:
            for line, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    nodes.add(row["id"])
                    if row["p_u"] != "":
                        pol[row["id"]] = float(row["p_u"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise DataError(f"{node_path} line {line}: bad node row ({exc})") from None
    return RetweetGraph(tuple(sorted(nodes)), dict(sorted(weights.items())), pol)


YES, NO, UNK = "YES", "NO", "UNK"


def stance(p: float | None) -> str:
    """YES / NO / UNK from the sign of a polarization value."""
    if p is None or p == 0 or math.isnan(p):
        return UNK
    return YES if p > 0 else NO


def user_classes(g: RetweetGraph) -> dict[str, str]:
    return {u: stance(g.polarization.get(u)) for u in g.nodes}
