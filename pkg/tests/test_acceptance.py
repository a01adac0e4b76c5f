"""Acceptance criteria 1-12, one or more tests each.

Every test carries a ``criterion`` mark; the terminal summary prints one
PASS/FAIL line per criterion. Run alone with ``pytest tests/test_acceptance.py``.
"""

import json
import math
import random
import subprocess
import sys
import time
from collections import Counter

import numpy as np
import pytest

from propnet.centrality import hits, pagerank, spearman
from propnet.community import (
    ami,
    ami_from_table,
    canonical_partition,
    cluster_polarization,
    louvain,
    modularity,
)
from propnet.graphs import HashtagGraph, RetweetGraph, build_hashtag_graph, prune_nodes
from propnet.ingest import Corpus, load_corpus
from propnet.polarity import (
    derive_seed_clusters,
    logistic_grad,
    logistic_loss,
    score_tweets,
    seed_label,
    train_text_model,
)
from propnet.query import (
    And,
    Or,
    Term,
    filter_corpus,
    format_query,
    load_items,
    parse_query,
)
from propnet.synth import (
    HASHTAG_BRIDGE,
    NO_TAGS,
    YES_TAGS,
    classifier_corpus,
    hashtag_fixture,
)

from conftest import STUDY
from oracles import (
    ami_exact,
    best_modularity,
    contingency_tables,
    hits_eig,
    modularity_double_loop,
    pagerank_dense,
    regex_match,
    spearman_brute,
    table_from_labels,
)

criterion = pytest.mark.criterion

# -- 1: modularity oracle and Louvain optimum ---------------------------------------

N_GRAPHS = 200
N_SEEDS = 20


def small_graphs():
    rng = random.Random(2024)
    out = []
    while len(out) < N_GRAPHS:
        n = rng.randint(2, 8)
        p = rng.uniform(0.2, 0.8)
        nodes = tuple(f"v{i}" for i in range(n))
        w = {(a, b): rng.randint(1, 3) for i, a in enumerate(nodes) for b in nodes[i + 1 :] if rng.random() < p}
        if w:
            out.append(HashtagGraph(nodes, w))
    return out


@pytest.fixture(scope="module")
def louvain_runs():
    t0 = time.perf_counter()
    per_graph = []
    for g in small_graphs():
        best = best_modularity(g.nodes, g.weights)
        hits_ = sum(louvain(g, seed=s).modularity >= best - 1e-9 for s in range(N_SEEDS))
        per_graph.append(hits_)
    return per_graph, time.perf_counter() - t0


@criterion("1", "modularity equals the O(n^2) double loop on 200 graphs; Louvain optimum >= 95% of runs")
def test_c1_modularity_and_louvain(louvain_runs):
    t0 = time.perf_counter()
    rng = random.Random(1)
    for g in small_graphs():
        labels = {u: rng.randrange(3) for u in g.nodes}
        assert abs(modularity(g, labels) - modularity_double_loop(g.nodes, g.weights, labels)) <= 1e-12
    per_graph, elapsed = louvain_runs
    rate = sum(per_graph) / (N_GRAPHS * N_SEEDS)
    print(f"Louvain reached the exhaustive optimum on {rate:.2%} of {N_GRAPHS * N_SEEDS} seeded runs")
    assert rate >= 0.95
    assert elapsed + time.perf_counter() - t0 < 60


@criterion("1 per-graph", "Louvain optimum on >= 95% of seeds for every single graph")
@pytest.mark.xfail(
    strict=True,
    reason="known limitation: on a few tiny graphs Louvain's local moves stall in a suboptimal split for "
    "several seeds; the aggregate rate is reported by the criterion-1 test",
)
def test_c1_louvain_per_graph(louvain_runs):
    per_graph, _ = louvain_runs
    weak = [k for k in per_graph if k < math.ceil(0.95 * N_SEEDS)]
    print(f"{len(weak)} of {N_GRAPHS} graphs below 95% of seeds")
    assert not weak


# -- 2: planted cliques ---------------------------------------------------------------

@criterion("2", "30 bridged 8-cliques stay intact for 10 seeds")
def test_c2_ring_of_cliques():
    w = {}
    for c in range(30):
        names = [f"c{c:02d}_{i}" for i in range(8)]
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                w[a, b] = 1
        a, b = f"c{c:02d}_0", f"c{(c + 1) % 30:02d}_1"
        w[min(a, b), max(a, b)] = 1
    g = HashtagGraph(tuple(sorted({u for e in w for u in e})), w)
    for seed in range(10):
        part = louvain(g, seed=seed)
        for c in range(30):
            assert len({part.assignment[f"c{c:02d}_{i}"] for i in range(8)}) == 1


# -- 3: AMI ---------------------------------------------------------------------------

@criterion("3", "AMI: identity 1, exact oracle on every table with <= 8 elements, label invariance")
def test_c3_ami():
    rng = random.Random(3)
    for _ in range(50):
        lab = {i: rng.randrange(5) for i in range(rng.randint(2, 30))}
        assert abs(ami(lab, lab) - 1.0) <= 1e-12
    count = 0
    for n in range(1, 9):
        for t in contingency_tables(n):
            assert abs(ami_from_table(np.array(t)) - ami_exact(t)) <= 1e-10, t
            count += 1
    print(f"{count} contingency tables checked")
    for _ in range(300):
        n = rng.randint(2, 30)
        a = [rng.randrange(4) for _ in range(n)]
        b = [rng.randrange(5) for _ in range(n)]
        perm = rng.sample(range(10), 10)
        base = ami(dict(enumerate(a)), dict(enumerate(b)))
        assert ami(dict(enumerate(perm[x] for x in a)), dict(enumerate(b))) == base
        assert abs(base - ami_exact(table_from_labels(a, b))) <= 1e-10


# -- 4, 5: PageRank and HITS ----------------------------------------------------------

def weighted_digraphs(seed, count=50):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(2, 12)
        p = rng.uniform(0.1, 0.6)
        nodes = tuple(f"v{i:02d}" for i in range(n))
        w = {(a, b): rng.uniform(0.5, 3.0) for a in nodes for b in nodes if a != b and rng.random() < p}
        if w:
            out.append(RetweetGraph(nodes, w))
    return out


@criterion("4", "PageRank vs dense solve (L-inf 1e-9), unit sum, uniform 3-cycle")
def test_c4_pagerank():
    for g in weighted_digraphs(4):
        pr = pagerank(g)
        want = pagerank_dense(g.nodes, g.weights)
        assert max(abs(pr[u] - want[u]) for u in g.nodes) <= 1e-9
        assert abs(math.fsum(pr.scores.values()) - 1.0) <= 1e-9
    cycle = pagerank(RetweetGraph(("a", "b", "c"), {("a", "b"): 1, ("b", "c"): 1, ("c", "a"): 1}))
    assert all(abs(cycle[u] - 1 / 3) <= 1e-12 for u in "abc")


@criterion("5", "HITS vs dominant eigenvectors (1e-8); two hubs one authority")
def test_c5_hits():
    for g in weighted_digraphs(5):
        hub, auth = hits(g, tol=1e-14, max_iter=200000)
        h_want, a_want = hits_eig(g.nodes, g.weights)
        assert max(abs(hub[u] - h_want[u]) for u in g.nodes) <= 1e-8
        assert max(abs(auth[u] - a_want[u]) for u in g.nodes) <= 1e-8
    _, auth = hits(RetweetGraph(("u1", "u2", "v"), {("u1", "v"): 1, ("u2", "v"): 1}))
    assert (auth["u1"], auth["u2"], auth["v"]) == (0.0, 0.0, 1.0)


# -- 6: Spearman ----------------------------------------------------------------------

@criterion("6", "Spearman with ties vs brute force (1e-12) on 1000 vectors; exact monotone invariance")
def test_c6_spearman():
    rng = random.Random(6)
    done = 0
    while done < 1000:
        n = rng.randint(3, 10)
        xs = [rng.randint(0, 4) for _ in range(n)]
        ys = [rng.randint(0, 4) for _ in range(n)]
        if len(set(xs)) == 1 or len(set(ys)) == 1:
            continue
        x, y = dict(enumerate(xs)), dict(enumerate(ys))
        assert abs(spearman(x, y) - spearman_brute(xs, ys)) <= 1e-12
        fx = {k: v**3 + 5 * v for k, v in x.items()}
        assert spearman(fx, y) == spearman(x, y)
        done += 1


# -- 7: cluster polarization ----------------------------------------------------------

@criterion("7", "p_c matches direct counting; boundary values exact")
def test_c7_cluster_polarization():
    rng = random.Random(7)
    for _ in range(200):
        nodes = [f"u{i}" for i in range(rng.randint(1, 80))]
        part = canonical_partition({u: rng.randrange(6) for u in nodes})
        cls = {u: rng.choice(("YES", "NO", "UNK")) for u in nodes}
        stats = cluster_polarization(part, cls)
        for s in stats:
            members = part.members(s.community)
            y = sum(cls[u] == "YES" for u in members)
            n = sum(cls[u] == "NO" for u in members)
            assert s.p_c == (None if y + n == 0 else (y - n) / (y + n))
        assert sum(s.yes for s in stats) == sum(v == "YES" for v in cls.values())
        assert sum(s.no for s in stats) == sum(v == "NO" for v in cls.values())
    part = canonical_partition({"a": 0, "b": 0, "c": 1, "d": 1, "e": 2, "f": 2})
    cls = {"a": "YES", "b": "UNK", "c": "NO", "d": "NO", "e": "YES", "f": "NO"}
    got = {tuple(part.members(s.community)): s.p_c for s in cluster_polarization(part, cls)}
    assert got == {("a", "b"): 1.0, ("c", "d"): -1.0, ("e", "f"): 0.0}


# -- 8: classifier --------------------------------------------------------------------

@criterion("8", "gradient vs finite differences < 1e-4; CV accuracy >= 99%; seed precedence 100%")
def test_c8_classifier():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(25, 7))
    y = rng.choice([-1.0, 1.0], size=25)
    w, b = rng.normal(size=7), -0.2
    gw, gb = logistic_grad(w, b, X, y, 0.01)
    h = 1e-6
    for j in range(7):
        e = np.zeros(7)
        e[j] = h
        num = (logistic_loss(w + e, b, X, y, 0.01) - logistic_loss(w - e, b, X, y, 0.01)) / (2 * h)
        assert abs(gw[j] - num) / max(abs(num), 1e-8) < 1e-4
    num_b = (logistic_loss(w, b + h, X, y, 0.01) - logistic_loss(w, b - h, X, y, 0.01)) / (2 * h)
    assert abs(gb - num_b) / max(abs(num_b), 1e-8) < 1e-4

    corpus = Corpus(tuple(classifier_corpus(2000)))
    seeds = seed_label(corpus, YES_TAGS, NO_TAGS)
    res = train_text_model(corpus, seeds, folds=10, seed=42)
    print(f"10-fold CV accuracy {res.cv.mean:.4f} on {sum(1 for v in seeds.labels.values() if v)} seed tweets")
    assert res.cv.mean >= 0.99
    scores = score_tweets(res.model, corpus, seeds.labels).scores
    assert all(scores[t] == v for t, v in seeds.labels.items())


# -- 9: seed clusters -----------------------------------------------------------------

@criterion("9", "planted YES/NO hashtag sets recovered; pruning the bridge raises modularity")
def test_c9_seed_clusters():
    hg = build_hashtag_graph(hashtag_fixture())
    kw = dict(yes_anchors=("bastaunsì",), no_anchors=("iovotono",))
    after = derive_seed_clusters(hg, stoplist=(HASHTAG_BRIDGE,), **kw)
    before = derive_seed_clusters(hg, stoplist=(), **kw)
    assert after.yes_tags == set(YES_TAGS) and after.no_tags == set(NO_TAGS)
    print(f"seed-cluster modularity {before.modularity:.4f} -> {after.modularity:.4f} after pruning")
    assert after.modularity > before.modularity
    planted = {t: t in YES_TAGS for t in hg.nodes if t != HASHTAG_BRIDGE}
    assert modularity(prune_nodes(hg, [HASHTAG_BRIDGE]), planted) > modularity(hg, {**planted, HASHTAG_BRIDGE: True})


# -- 10: queries ----------------------------------------------------------------------

def random_ast(rng, depth=0):
    if depth >= 3 or rng.random() < 0.35:
        alphabet = "abcéì 'ANDOR.-"
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 8)))
        return Term(text if text.strip() else "x")
    kids = tuple(random_ast(rng, depth + 1) for _ in range(rng.randint(2, 4)))
    return And(kids) if rng.random() < 0.5 else Or(kids)


@criterion("10", "print/parse round-trip on 1000 queries; filter equals regex oracle; PI2 AST shape")
def test_c10_queries():
    rng = random.Random(10)
    for _ in range(1000):
        ast = random_ast(rng)
        assert parse_query(format_query(ast)) == ast
    corpus, _ = load_corpus(STUDY / "corpus.jsonl")
    entries = json.loads((STUDY / "queries.json").read_text(encoding="utf-8"))
    for entry, item in zip(entries, load_items(STUDY / "queries.json")):
        assert [r.tweet_id for r in filter_corpus(corpus, item)] == [
            r.tweet_id for r in corpus if regex_match(entry["query"], r.text)
        ]
    pi2 = parse_query(
        "('illegittimo' OR 'illeggittimo' OR 'illegal' OR 'non eletto') "
        "AND ('parlamento' OR 'governo' OR 'renzi' OR 'presidente')"
    )
    assert pi2 == And((
        Or(tuple(map(Term, ("illegittimo", "illeggittimo", "illegal", "non eletto")))),
        Or(tuple(map(Term, ("parlamento", "governo", "renzi", "presidente")))),
    ))


# -- 11: determinism ------------------------------------------------------------------

@criterion("11", "two `propnet run` invocations give byte-identical trees, each under 120 s")
def test_c11_determinism(tmp_path):
    trees = []
    for name in ("a", "b"):
        out = tmp_path / name
        t0 = time.perf_counter()
        res = subprocess.run(
            [sys.executable, "-m", "propnet.cli", "run", "--config", str(STUDY / "pipeline.toml"), "--out", str(out)],
            capture_output=True, text=True, check=False,
        )
        elapsed = time.perf_counter() - t0
        assert res.returncode == 0, res.stderr
        assert elapsed < 120
        trees.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    print(f"{len(trees[0])} files compared")
    assert trees[0] == trees[1]


# -- 12: structural reproduction -------------------------------------------------------

def _majority(rows, cls):
    c = Counter(r["class"] for r in rows)
    return c[cls] > len(rows) / 2


@criterion("12a", "item-4 top users from the opposite camp, items 1-3 from the main camp")
def test_c12a_top_users(study_run, truth):
    out, _ = study_run
    top = json.loads((out / "centrality/top_users.json").read_text())
    main, other = truth["main_camp"], "YES" if truth["main_camp"] == "NO" else "NO"
    assert truth["opposite_camp_item"] == "PI4"
    for metric in ("in_degree", "out_degree", "pagerank", "hub", "authority"):
        assert _majority(top["PI4"][metric], other), metric
        for item in ("PI1", "PI2", "PI3"):
            assert _majority(top[item][metric], main), (item, metric)


@criterion("12b", "AMI(item, whole) below AMI(P/D, whole)")
def test_c12b_ami_ordering(study_run):
    out, _ = study_run
    lines = (out / "comparison/ami.csv").read_text().splitlines()
    header = lines[0].split(",")[1:]
    table = {row.split(",")[0]: dict(zip(header, map(float, row.split(",")[1:]))) for row in lines[1:]}
    pd_whole = table["PD"]["whole"]
    print("AMI vs whole: " + ", ".join(f"{g}={table[g]['whole']:.3f}" for g in ("PD", "PI1", "PI2", "PI3", "PI4")))
    for item in ("PI1", "PI2", "PI3", "PI4"):
        assert table[item]["whole"] < pd_whole


@criterion("12c", "membership buckets equal the planted counts")
def test_c12c_membership(study_run, truth):
    out, _ = study_run
    d = json.loads((out / "membership/decomposition.json").read_text())
    assert {int(k): v for k, v in d["exactly"].items()} == {int(k): v for k, v in truth["membership_counts"].items()}
    assert d["other"] == truth["membership_other"] and d["total"] == truth["membership_total"]
