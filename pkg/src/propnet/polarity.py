"""Stance scoring: hashtag seed clusters -> seed labels -> tf-idf logistic
regression -> per-tweet scores -> per-user polarization p_u."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import pairwise

import numpy as np
from scipy import sparse
from scipy.special import expit

from . import ConfigError, DataError
from .community import louvain
from .graphs import HashtagGraph, prune_nodes, top_by_weighted_degree
from .ingest import Corpus, normalize_text

log = logging.getLogger(__name__)

DEFAULT_STOPLIST = (
    "referendum",
    "referendumcostituzionale",
    "photo",
    "riformacostituzionale",
    "costituzione",
    "4dicembre",
    "trendingtopic",
    "1w1l",
)
DEFAULT_YES_ANCHORS = ("bastaunsì", "iovotosi")
DEFAULT_NO_ANCHORS = ("iovotono",)

_WORD = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; ``#tag`` yields ``tag``."""
    return _WORD.findall(normalize_text(text))


# -- seed clusters and labels --------------------------------------------------

class OrientationError(ConfigError):
    """The two largest hashtag clusters cannot be told apart by the anchors."""


@dataclass(frozen=True)
class SeedClusters:
    yes_tags: frozenset
    no_tags: frozenset
    modularity: float
    clusters: tuple  # all clusters of the top-n subgraph, largest first


def derive_seed_clusters(
    hg: HashtagGraph,
    stoplist: Iterable[str] = DEFAULT_STOPLIST,
    top_n: int = 30,
    seed: int = 42,
    yes_anchors: Iterable[str] = DEFAULT_YES_ANCHORS,
    no_anchors: Iterable[str] = DEFAULT_NO_ANCHORS,
) -> SeedClusters:
    """Cluster the top hashtags and return the YES and NO tag sets.

    The stoplist is pruned first, the *top_n* tags by weighted degree are
    clustered with Louvain, and the two largest clusters are oriented by the
    anchor tags.
    """
    pruned = prune_nodes(hg, [normalize_text(t) for t in stoplist])
    if not pruned.nodes:
        raise DataError("hashtag graph is empty after pruning")
    sub = pruned.induced(top_by_weighted_degree(pruned, top_n))
    part = louvain(sub, seed=seed)
    clusters = tuple(frozenset(c) for c in part.clusters())
    if len(clusters) < 2:
        raise OrientationError("top hashtags form a single cluster")
    yes_a = {normalize_text(t) for t in yes_anchors}
    no_a = {normalize_text(t) for t in no_anchors}
    first, second = clusters[0], clusters[1]

    def side(c):
        y, n = bool(c & yes_a), bool(c & no_a)
        return "YES" if y and not n else "NO" if n and not y else None

    s1, s2 = side(first), side(second)
    if {s1, s2} != {"YES", "NO"}:
        raise OrientationError(
            f"anchors do not orient the two largest clusters ({sorted(first)} / {sorted(second)}); "
            "configure anchor hashtags explicitly"
        )
    yes, no = (first, second) if s1 == "YES" else (second, first)
    return SeedClusters(yes, no, part.modularity, clusters)


@dataclass(frozen=True)
class SeedLabeling:
    yes_tags: frozenset
    no_tags: frozenset
    labels: Mapping[str, int]  # tweet_id -> -1 / 0 / +1, seed-eligible tweets only


def seed_label(corpus: Iterable, yes_tags: Iterable[str], no_tags: Iterable[str]) -> SeedLabeling:
    yes, no = frozenset(yes_tags), frozenset(no_tags)
    if yes & no:
        raise ValueError(f"YES and NO tag sets overlap: {sorted(yes & no)}")
    labels = {}
    for rec in corpus:
        tags = set(rec.hashtags)
        y, n = bool(tags & yes), bool(tags & no)
        if y and n:
            labels[rec.tweet_id] = 0
        elif y:
            labels[rec.tweet_id] = 1
        elif n:
            labels[rec.tweet_id] = -1
    return SeedLabeling(yes, no, labels)


# -- tf-idf --------------------------------------------------------------------

@dataclass(frozen=True)
class Tfidf:
    vocabulary: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocabulary)}

    @property
    def idf(self) -> np.ndarray:
        df = np.asarray(self.df, dtype=float)
        return np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0

    def transform(self, docs: Sequence[str]) -> sparse.csr_matrix:
        """L2-normalized tf-idf rows; out-of-vocabulary documents give zero rows."""
        index = self.index
        idf = self.idf
        rows, cols, vals = [], [], []
        for r, doc in enumerate(docs):
            counts = defaultdict(int)
            for tok in tokenize(doc):
                j = index.get(tok)
                if j is not None:
                    counts[j] += 1
            if not counts:
                continue
            js = sorted(counts)
            v = np.array([counts[j] * idf[j] for j in js])
            v /= np.linalg.norm(v)
            rows.extend([r] * len(js))
            cols.extend(js)
            vals.extend(v.tolist())
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(docs), len(self.vocabulary)))


def tfidf_fit(docs: Sequence[str]) -> Tfidf:
    if not docs:
        raise ValueError("tf-idf needs at least one document")
    df = defaultdict(int)
    for doc in docs:
        for tok in set(tokenize(doc)):
            df[tok] += 1
    if not df:
        raise DataError("empty vocabulary")
    vocab = tuple(sorted(df))
    return Tfidf(vocab, tuple(df[t] for t in vocab), len(docs))


def tfidf_transform(model: Tfidf, doc: str) -> dict[str, float]:
    row = model.transform([doc])
    return {model.vocabulary[j]: v for j, v in zip(row.indices, row.data)}


# -- logistic regression -------------------------------------------------------

def logistic_loss(w: np.ndarray, b: float, X, y: np.ndarray, l2: float) -> float:
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, -y * z)) + 0.5 * l2 * (w @ w))


def logistic_grad(w: np.ndarray, b: float, X, y: np.ndarray, l2: float) -> tuple[np.ndarray, float]:
    z = X @ w + b
    r = -y * expit(-y * z) / len(y)
    return np.asarray(X.T @ r).ravel() + l2 * w, float(r.sum())


@dataclass
class LogReg:
    weights: np.ndarray
    bias: float
    losses: list = field(default_factory=list)

    def decision(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision(X) >= 0, 1, -1)


def train_logreg(X, y, l2: float = 1e-4, epochs: int = 300, lr: float = 4.0) -> LogReg:
    """Full-batch gradient descent on the L2-regularized mean logistic loss.

    A step that would raise the loss is retried with half the learning
    rate, so the recorded per-epoch loss never increases. Labels are -1/+1.
    """
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise DataError("training data has a single class")
    X = sparse.csr_matrix(X) if sparse.issparse(X) else np.asarray(X, dtype=float)
    w = np.zeros(X.shape[1])
    b = 0.0
    loss = logistic_loss(w, b, X, y, l2)
    losses = [loss]
    for _ in range(epochs):
        gw, gb = logistic_grad(w, b, X, y, l2)
        step = lr
        for _ in range(60):
            w2, b2 = w - step * gw, b - step * gb
            loss2 = logistic_loss(w2, b2, X, y, l2)
            if loss2 <= loss:
                break
            step /= 2
        else:
            break
        if loss - loss2 < 1e-15:
            w, b, loss = w2, b2, loss2
            losses.append(loss)
            break
        w, b, loss = w2, b2, loss2
        losses.append(loss)
    if any(b_ > a_ for a_, b_ in pairwise(losses)):
        raise AssertionError("training loss increased")
    return LogReg(w, b, losses)


@dataclass(frozen=True)
class CVResult:
    mean: float
    folds: tuple[float, ...]
    fold_sizes: tuple[int, ...]


def stratified_folds(y: Sequence, folds: int, seed: int) -> list[int]:
    """Fold index per example; classes are spread evenly and sizes differ by <= 1."""
    rng = random.Random(seed)
    order = []
    for cls in sorted(set(y)):
        members = [i for i, v in enumerate(y) if v == cls]
        rng.shuffle(members)
        order.extend(members)
    assign = [0] * len(y)
    for pos, i in enumerate(order):
        assign[i] = pos % folds
    return assign


def cross_validate(X, y, folds: int = 10, seed: int = 42, **train_kw) -> CVResult:
    y = np.asarray(y)
    if len(y) < folds:
        raise DataError(f"{len(y)} examples cannot fill {folds} folds")
    X = sparse.csr_matrix(X) if sparse.issparse(X) else np.asarray(X, dtype=float)
    assign = np.asarray(stratified_folds(y.tolist(), folds, seed))
    accs, sizes = [], []
    for f in range(folds):
        test = assign == f
        model = train_logreg(X[~test], y[~test], **train_kw)
        accs.append(float(np.mean(model.predict(X[test]) == y[test])))
        sizes.append(int(test.sum()))
    return CVResult(float(np.mean(accs)), tuple(accs), tuple(sizes))


# -- text model ----------------------------------------------------------------

@dataclass(frozen=True)
class TextModel:
    tfidf: Tfidf
    weights: tuple[float, ...]
    bias: float
    config: Mapping = field(default_factory=dict)

    def decision(self, docs: Sequence[str]) -> np.ndarray:
        X = self.tfidf.transform(docs)
        return np.asarray(X @ np.asarray(self.weights)).ravel() + self.bias

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.config, sort_keys=True).encode())
        h.update("\x00".join(self.tfidf.vocabulary).encode())
        return h.hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "propnet-textmodel/1",
                "config": dict(self.config),
                "fingerprint": self.fingerprint(),
                "n_docs": self.tfidf.n_docs,
                "vocabulary": list(self.tfidf.vocabulary),
                "df": list(self.tfidf.df),
                "idf": self.tfidf.idf.tolist(),
                "weights": list(self.weights),
                "bias": self.bias,
            },
            ensure_ascii=False,
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> TextModel:
        obj = json.loads(text)
        if obj.get("format") != "propnet-textmodel/1":
            raise ConfigError("not a propnet text model")
        tfidf = Tfidf(tuple(obj["vocabulary"]), tuple(obj["df"]), obj["n_docs"])
        if len(obj["weights"]) != len(tfidf.vocabulary):
            raise ConfigError("weight vector does not match vocabulary")
        return cls(tfidf, tuple(obj["weights"]), obj["bias"], obj.get("config", {}))


@dataclass(frozen=True)
class TrainResult:
    model: TextModel
    seeds: SeedLabeling
    clusters: SeedClusters | None
    cv: CVResult | None
    losses: tuple


def train_text_model(
    corpus: Corpus,
    seeds: SeedLabeling,
    l2: float = 1e-4,
    epochs: int = 300,
    lr: float = 4.0,
    folds: int = 10,
    seed: int = 42,
    clusters: SeedClusters | None = None,
) -> TrainResult:
    """Fit tf-idf + logistic regression on the +-1 seed tweets of *corpus*."""
    train = [r for r in corpus if seeds.labels.get(r.tweet_id, 0) != 0]
    docs = [r.text for r in train]
    y = np.array([seeds.labels[r.tweet_id] for r in train])
    if len(set(y.tolist())) < 2:
        raise DataError("seed labels cover a single class")
    tfidf = tfidf_fit(docs)
    X = tfidf.transform(docs)
    cv = cross_validate(X, y, folds, seed, l2=l2, epochs=epochs, lr=lr) if len(y) >= folds else None
    clf = train_logreg(X, y, l2=l2, epochs=epochs, lr=lr)
    config = {
        "l2": l2,
        "epochs": epochs,
        "lr": lr,
        "yes_tags": sorted(seeds.yes_tags),
        "no_tags": sorted(seeds.no_tags),
    }
    model = TextModel(tfidf, tuple(clf.weights.tolist()), clf.bias, config)
    return TrainResult(model, seeds, clusters, cv, tuple(clf.losses))


@dataclass(frozen=True)
class TweetScores:
    scores: Mapping[str, int]  # tweet_id -> -1 / 0 / +1
    low_confidence: frozenset  # tweets with no in-vocabulary token (decided by bias)


def score_tweets(model: TextModel, corpus: Iterable, seed_labels: Mapping[str, int] | None = None) -> TweetScores:
    """Hard +-1 score per tweet; seed labels (including 0) take precedence.

    A zero decision value maps to +1.
    """
    seed_labels = seed_labels or {}
    records = list(corpus)
    X = model.tfidf.transform([r.text for r in records])
    z = np.asarray(X @ np.asarray(model.weights)).ravel() + model.bias
    empty = np.diff(X.indptr) == 0
    scores, low = {}, set()
    for i, rec in enumerate(records):
        if rec.tweet_id in seed_labels:
            scores[rec.tweet_id] = int(seed_labels[rec.tweet_id])
            continue
        scores[rec.tweet_id] = 1 if z[i] >= 0 else -1
        if empty[i]:
            low.add(rec.tweet_id)
    return TweetScores(scores, frozenset(low))


@dataclass(frozen=True)
class UserPolarity:
    p: Mapping[str, float]
    tweet_count: Mapping[str, int]


def user_polarization(corpus: Iterable, scores: Mapping[str, int] | TweetScores) -> UserPolarity:
    """Mean tweet score per author; retweets count for the retweeting user."""
    if isinstance(scores, TweetScores):
        scores = scores.scores
    total = defaultdict(float)
    count = defaultdict(int)
    for rec in corpus:
        s = scores.get(rec.tweet_id)
        if s is None:
            continue
        total[rec.author_id] += s
        count[rec.author_id] += 1
    p = {u: max(-1.0, min(1.0, total[u] / count[u])) for u in sorted(count)}
    return UserPolarity(p, dict(sorted(count.items())))
