"""Degree, PageRank and HITS scores on retweet graphs, top-k tables and
Spearman correlation of rankings across graphs."""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.stats import rankdata

from . import ConvergenceError
from .graphs import RetweetGraph, stance

METRICS = ("in_degree", "out_degree", "pagerank", "authority", "hub")
SIDES = ("ALL", "YES", "NO")


@dataclass(frozen=True)
class ScoreVector:
    metric: str
    scores: Mapping[str, float]

    def __getitem__(self, node):
        return self.scores[node]


def _adjacency(g: RetweetGraph, weighted: bool = True) -> sparse.csr_matrix:
    idx = g.index()
    n = len(g.nodes)
    if not g.weights:
        return sparse.csr_matrix((n, n))
    rows, cols, vals = zip(*((idx[u], idx[v], float(w) if weighted else 1.0) for (u, v), w in g.edges))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def degree_scores(g: RetweetGraph, direction: str = "in", weighted: bool = True) -> ScoreVector:
    if direction not in ("in", "out"):
        raise ValueError("direction must be 'in' or 'out'")
    deg = dict.fromkeys(g.nodes, 0)
    for (u, v), w in g.weights.items():
        deg[v if direction == "in" else u] += w if weighted else 1
    return ScoreVector(f"{direction}_degree", deg)


def pagerank(
    g: RetweetGraph,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iter: int = 200,
    weighted: bool = True,
) -> ScoreVector:
    """Power iteration on the out-weight-normalized transition matrix.

    Dangling nodes spread their mass uniformly; iteration stops when the L1
    change drops below *tol*.
    """
    n = len(g.nodes)
    if n == 0:
        raise ValueError("pagerank of an empty graph")
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    A = _adjacency(g, weighted)
    out = np.asarray(A.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out))
    PT = (sparse.diags(inv) @ A).T.tocsr()
    x = np.full(n, 1.0 / n)
    err = math.inf
    for _ in range(max_iter):
        new = damping * (PT @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        err = np.abs(new - x).sum()
        x = new
        if err < tol:
            return ScoreVector("pagerank", dict(zip(g.nodes, x.tolist())))
    raise ConvergenceError(f"pagerank did not converge in {max_iter} iterations (residual {err:.3g})", x, err)


def hits(
    g: RetweetGraph, tol: float = 1e-10, max_iter: int = 200, weighted: bool = True
) -> tuple[ScoreVector, ScoreVector]:
    """Kleinberg hub and authority scores, each with unit L2 norm.

    Starts from uniform hubs and alternates ``a = A^T h``, ``h = A a``.
    Returns ``(hub, authority)``.
    """
    if not g.weights:
        raise ValueError("HITS needs at least one edge")
    A = _adjacency(g, weighted)
    AT = A.T.tocsr()
    n = len(g.nodes)
    h = np.full(n, 1.0 / math.sqrt(n))
    a = np.zeros(n)
    err = math.inf
    for _ in range(max_iter):
        a_new = AT @ h
        a_new /= np.linalg.norm(a_new)
        h_new = A @ a_new
        h_new /= np.linalg.norm(h_new)
        err = max(np.abs(a_new - a).sum(), np.abs(h_new - h).sum())
        a, h = a_new, h_new
        if err < tol:
            return (
                ScoreVector("hub", dict(zip(g.nodes, h.tolist()))),
                ScoreVector("authority", dict(zip(g.nodes, a.tolist()))),
            )
    raise ConvergenceError(f"HITS did not converge in {max_iter} iterations (residual {err:.3g})", (h, a), err)


def compute_metric(g: RetweetGraph, metric: str, weighted: bool = True, **kw) -> ScoreVector:
    if metric == "in_degree":
        return degree_scores(g, "in", weighted)
    if metric == "out_degree":
        return degree_scores(g, "out", weighted)
    if metric == "pagerank":
        return pagerank(g, weighted=weighted, **kw)
    if metric in ("hub", "authority"):
        hub, auth = hits(g, weighted=weighted, **kw)
        return hub if metric == "hub" else auth
    raise ValueError(f"unknown metric {metric!r}")


def all_metrics(g: RetweetGraph, weighted: bool = True, **kw) -> dict[str, ScoreVector]:
    out = {
        "in_degree": degree_scores(g, "in", weighted),
        "out_degree": degree_scores(g, "out", weighted),
        "pagerank": pagerank(g, weighted=weighted, **kw),
    }
    out["hub"], out["authority"] = hits(g, weighted=weighted, **kw)
    return {m: out[m] for m in METRICS}


@dataclass(frozen=True)
class RankedUser:
    rank: int
    node: str
    score: float
    user_class: str
    p_u: float | None


def ranking(scores: ScoreVector | Mapping[str, float]) -> list[str]:
    s = scores.scores if isinstance(scores, ScoreVector) else scores
    return sorted(s, key=lambda u: (-s[u], u))


def top_k(scores: ScoreVector, k: int, polarization: Mapping[str, float] | None = None) -> list[RankedUser]:
    """Highest scores first, ties by node id; rows carry YES/NO/UNK and p_u."""
    if k < 1:
        raise ValueError("k must be >= 1")
    polarization = polarization or {}
    return [
        RankedUser(i + 1, u, scores[u], stance(polarization.get(u)), polarization.get(u))
        for i, u in enumerate(ranking(scores)[:k])
    ]


# -- rank correlation ----------------------------------------------------------

class UndefinedCorrelation(ValueError):
    pass


def spearman(x: Mapping[str, float], y: Mapping[str, float], common=None) -> float:
    """Spearman's rho on *common* nodes (default: keys of both), ties averaged."""
    if common is None:
        common = set(x) & set(y)
    common = sorted(common)
    if len(common) < 3:
        raise UndefinedCorrelation(f"need at least 3 common nodes, got {len(common)}")
    rx = rankdata([x[u] for u in common])
    ry = rankdata([y[u] for u in common])
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("constant ranking")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@dataclass(frozen=True)
class CorrelationMatrix:
    metric: str
    side: str
    graphs: tuple[str, ...]
    rho: Mapping[tuple[str, str], float | None]
    counts: Mapping[tuple[str, str], int]

    def as_array(self) -> np.ndarray:
        k = len(self.graphs)
        out = np.full((k, k), np.nan)
        for i, a in enumerate(self.graphs):
            for j, b in enumerate(self.graphs):
                r = self.rho[a, b]
                if r is not None:
                    out[i, j] = r
        return out


def _side_nodes(g: RetweetGraph, side: str) -> set[str]:
    if side == "ALL":
        return set(g.nodes)
    return {u for u in g.nodes if stance(g.polarization.get(u)) == side}


def correlation_matrices(
    graphs: Mapping[str, RetweetGraph],
    metric: str,
    side: str = "ALL",
    weighted: bool = True,
    scores: Mapping[str, ScoreVector] | None = None,
) -> CorrelationMatrix:
    """Pairwise Spearman correlation of one metric across graphs.

    Each cell uses the nodes common to both graphs, filtered to the requested
    side; cells with fewer than three nodes or a constant ranking are ``None``.
    Precomputed per-graph *scores* may be passed to avoid recomputation.
    """
    if len(graphs) < 2:
        raise ValueError("need at least two graphs")
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    ids = tuple(graphs)
    if scores is None:
        scores = {gid: compute_metric(g, metric, weighted) for gid, g in graphs.items()}
    rho, counts = {}, {}
    for a in ids:
        for b in ids:
            common = _side_nodes(graphs[a], side) & _side_nodes(graphs[b], side)
            counts[a, b] = len(common)
            try:
                rho[a, b] = spearman(scores[a].scores, scores[b].scores, common)
            except UndefinedCorrelation:
                rho[a, b] = None
    return CorrelationMatrix(metric, side, ids, rho, counts)


def write_scores_csv(g: RetweetGraph, metrics: Mapping[str, ScoreVector], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "metric", "score", "rank", "p_u", "class"])
        for name, sv in metrics.items():
            for rank, u in enumerate(ranking(sv), start=1):
                p = g.polarization.get(u)
                w.writerow([u, name, repr(float(sv[u])), rank, "" if p is None else repr(p), stance(p)])


def write_correlation_csv(cm: CorrelationMatrix, path, counts_path=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph", *cm.graphs])
        for a in cm.graphs:
            w.writerow([a, *("" if cm.rho[a, b] is None else repr(cm.rho[a, b]) for b in cm.graphs)])
    if counts_path is not None:
        with open(counts_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["graph", *cm.graphs])
            for a in cm.graphs:
                w.writerow([a, *(cm.counts[a, b] for b in cm.graphs)])
