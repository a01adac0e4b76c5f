"""End-to-end study: polarity, six kinds of retweet graphs, clustering,
centrality and cross-graph comparisons, written as CSV/JSON reports."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import ConfigError, PropnetError, __version__
from .centrality import (
    METRICS,
    SIDES,
    all_metrics,
    correlation_matrices,
    top_k,
    write_correlation_csv,
    write_scores_csv,
)
from .community import (
    ami,
    cluster_polarization,
    intersection_matrix,
    louvain,
    size_distribution,
    top_clusters,
    write_partition_csv,
)
from .graphs import (
    RetweetGraph,
    build_hashtag_graph,
    build_retweet_graph,
    giant_wcc,
    user_classes,
    write_edge_csv,
    write_node_csv,
)
from .ingest import load_corpus, parse_date_bound
from .polarity import (
    DEFAULT_NO_ANCHORS,
    DEFAULT_STOPLIST,
    DEFAULT_YES_ANCHORS,
    derive_seed_clusters,
    score_tweets,
    seed_label,
    train_text_model,
    user_polarization,
)
from .query import filter_corpus, load_items, membership_decomposition

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    corpus: Path
    output_dir: Path
    start: int | None = None
    end: int | None = None
    items_path: Path | None = None
    stoplist: tuple = DEFAULT_STOPLIST
    yes_anchors: tuple = DEFAULT_YES_ANCHORS
    no_anchors: tuple = DEFAULT_NO_ANCHORS
    top_n_hashtags: int = 30
    l2: float = 1e-4
    epochs: int = 300
    lr: float = 4.0
    folds: int = 10
    seed: int = 42
    top_clusters: int = 10
    top_users: int = 10
    whole_clusters: int = 30
    histogram_bins: int = 21
    weighted: bool = True
    max_iter: int = 5000
    workers: int = 4
    record_timings: bool = False

    @classmethod
    def from_toml(cls, path, output_dir=None) -> PipelineConfig:
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data, path.parent, output_dir)

    @classmethod
    def from_dict(cls, data: Mapping, base: Path = Path("."), output_dir=None) -> PipelineConfig:
        def resolve(p):
            p = Path(p)
            return p if p.is_absolute() else base / p

        corpus = data.get("corpus", {})
        if "path" not in corpus:
            raise ConfigError("config needs [corpus] path")
        pol = data.get("polarity", {})
        clu = data.get("clustering", {})
        rep = data.get("report", {})
        out = data.get("output", {})
        items = data.get("items", {})
        cfg = cls(
            corpus=resolve(corpus["path"]),
            output_dir=Path(output_dir) if output_dir else resolve(out.get("dir", "out")),
            start=parse_date_bound(_opt_str(corpus.get("from"))),
            end=parse_date_bound(_opt_str(corpus.get("to")), end=True),
            items_path=resolve(items["path"]) if items.get("path") else None,
            stoplist=tuple(pol.get("stoplist", DEFAULT_STOPLIST)),
            yes_anchors=tuple(pol.get("yes_anchors", DEFAULT_YES_ANCHORS)),
            no_anchors=tuple(pol.get("no_anchors", DEFAULT_NO_ANCHORS)),
            top_n_hashtags=int(pol.get("top_n", 30)),
            l2=float(pol.get("l2", 1e-4)),
            epochs=int(pol.get("epochs", 300)),
            lr=float(pol.get("lr", 4.0)),
            folds=int(pol.get("folds", 10)),
            seed=int(clu.get("seed", 42)),
            top_clusters=int(rep.get("top_clusters", 10)),
            top_users=int(rep.get("top_users", 10)),
            whole_clusters=int(rep.get("whole_clusters", 30)),
            histogram_bins=int(rep.get("histogram_bins", 21)),
            weighted=bool(rep.get("weighted", True)),
            max_iter=int(data.get("centrality", {}).get("max_iter", 5000)),
            workers=int(data.get("run", {}).get("workers", 4)),
            record_timings=bool(out.get("record_timings", False)),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not self.corpus.exists():
            raise ConfigError(f"corpus {self.corpus} does not exist")
        if self.items_path is not None and not self.items_path.exists():
            raise ConfigError(f"query file {self.items_path} does not exist")
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ConfigError("corpus 'from' is after 'to'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def fingerprint(self, extra: bytes = b"") -> str:
        d = asdict(self)
        d = {k: str(v) if isinstance(v, Path) else v for k, v in d.items()}
        d.pop("output_dir")
        d.pop("workers")  # no effect on outputs
        h = hashlib.sha256(json.dumps(d, sort_keys=True, ensure_ascii=False).encode())
        h.update(extra)
        return h.hexdigest()


def _opt_str(v):
    return None if v is None else str(v)


@dataclass
class RunManifest:
    fingerprint: str
    versions: dict
    inputs: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    failed_stage: str | None = None

    def to_json(self, with_timings: bool) -> str:
        d = {
            "fingerprint": self.fingerprint,
            "versions": self.versions,
            "inputs": self.inputs,
            "stages": self.stages,
        }
        if self.failed_stage:
            d["failed_stage"] = self.failed_stage
        if with_timings:
            d["timings"] = self.timings
        return json.dumps(d, indent=1, sort_keys=True)


class StageError(PropnetError):
    def __init__(self, stage: str, cause: Exception, manifest: RunManifest):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.manifest = manifest
        self.exit_code = getattr(cause, "exit_code", 3)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def polarization_histogram(values, bins: int = 21) -> list[int]:
    """Counts of values over *bins* equal bins covering [-1, 1].

    Binning is mirror-symmetric: ``x`` and ``-x`` always fall in mirrored bins.
    """
    counts = [0] * bins
    for p in values:
        if p <= 0:
            i = min(int((p + 1.0) * bins / 2.0), bins - 1)
        else:
            i = bins - 1 - min(int((1.0 - p) * bins / 2.0), bins - 1)
        counts[max(0, i)] += 1
    return counts


def report_polarization_histogram(g: RetweetGraph, bins: int = 21) -> dict:
    values = [g.polarization[u] for u in g.nodes if u in g.polarization]
    edges = np.linspace(-1.0, 1.0, bins + 1)
    return {"bins": bins, "edges": [round(float(e), 12) for e in edges], "counts": polarization_histogram(values, bins)}


# -- helpers writing files ----------------------------------------------------

class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.outputs: list[str] = []

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(rel)
        return p

    def json(self, rel, obj):
        self.path(rel).write_text(json.dumps(obj, indent=1, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")

    def matrix_csv(self, rel, row_labels, col_labels, matrix, corner="cluster"):
        with open(self.path(rel), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([corner, *col_labels])
            for lab, row in zip(row_labels, matrix):
                w.writerow([lab, *(repr(float(x)) for x in row)])

    def checksums(self, names) -> dict:
        return {n: sha256_file(self.root / n) for n in names}


class _Stage:
    def __init__(self, run, name):
        self.run = run
        self.name = name

    def __enter__(self):
        self.t = time.perf_counter()
        self.first = len(self.run.w.outputs)
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        m = self.run.manifest
        m.timings[self.name] = round(time.perf_counter() - self.t, 4)
        names = self.run.w.outputs[self.first :]
        m.stages.append({"name": self.name, "outputs": self.run.w.checksums(names)})
        if exc is not None and not isinstance(exc, StageError):
            m.failed_stage = self.name
            self.run.write_manifest()
            raise StageError(self.name, exc, m) from exc
        return False


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.w = _Writer(cfg.output_dir)
        inputs = {"corpus": sha256_file(cfg.corpus)}
        if cfg.items_path is not None:
            inputs["items"] = sha256_file(cfg.items_path)
        self.manifest = RunManifest(
            fingerprint=cfg.fingerprint("".join(inputs.values()).encode()),
            versions={
                "propnet": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            inputs=inputs,
        )

    def stage(self, name):
        return _Stage(self, name)

    def write_manifest(self):
        self.cfg.output_dir.mkdir(parents=True, exist_ok=True)
        (self.cfg.output_dir / "manifest.json").write_text(
            self.manifest.to_json(self.cfg.record_timings) + "\n", encoding="utf-8"
        )


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Run every stage, writing reports under ``cfg.output_dir``.

    A failing stage raises :class:`StageError` after writing a partial
    manifest naming the stage.
    """
    run = _Run(cfg)
    w = run.w

    with run.stage("ingest"):
        corpus, report = load_corpus(cfg.corpus, cfg.start, cfg.end)
        items = load_items(cfg.items_path) if cfg.items_path else []
        w.json("ingest/stats.json", report.as_dict())

    with run.stage("polarity"):
        hg = build_hashtag_graph(corpus)
        clusters = derive_seed_clusters(hg, cfg.stoplist, cfg.top_n_hashtags, cfg.seed, cfg.yes_anchors, cfg.no_anchors)
        seeds = seed_label(corpus, clusters.yes_tags, clusters.no_tags)
        trained = train_text_model(
            corpus, seeds, l2=cfg.l2, epochs=cfg.epochs, lr=cfg.lr, folds=cfg.folds, seed=cfg.seed, clusters=clusters
        )
        scored = score_tweets(trained.model, corpus, seeds.labels)
        users = user_polarization(corpus, scored)
        w.json(
            "polarity/seed_clusters.json",
            {
                "yes_tags": sorted(clusters.yes_tags),
                "no_tags": sorted(clusters.no_tags),
                "modularity": clusters.modularity,
                "clusters": [sorted(c) for c in clusters.clusters],
                "seed_labels": {
                    "yes": sum(1 for v in seeds.labels.values() if v == 1),
                    "no": sum(1 for v in seeds.labels.values() if v == -1),
                    "mixed": sum(1 for v in seeds.labels.values() if v == 0),
                },
            },
        )
        w.json(
            "polarity/classifier.json",
            {
                "cv_mean_accuracy": None if trained.cv is None else trained.cv.mean,
                "cv_fold_accuracy": None if trained.cv is None else list(trained.cv.folds),
                "final_loss": trained.losses[-1],
                "epochs_run": len(trained.losses) - 1,
                "low_confidence_tweets": len(scored.low_confidence),
            },
        )
        w.path("polarity/model.json").write_text(trained.model.to_json() + "\n", encoding="utf-8")
        with open(w.path("polarity/tweet_scores.csv"), "w", newline="", encoding="utf-8") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(["tweet_id", "score", "seed", "low_confidence"])
            for rec in corpus:
                cw.writerow([rec.tweet_id, scored.scores[rec.tweet_id], int(rec.tweet_id in seeds.labels),
                             int(rec.tweet_id in scored.low_confidence)])
        with open(w.path("polarity/user_polarity.csv"), "w", newline="", encoding="utf-8") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(["user", "p_u", "tweets"])
            for u, p in users.p.items():
                cw.writerow([u, repr(p), users.tweet_count[u]])

    with run.stage("graphs"):
        complete = build_retweet_graph(corpus)
        whole = giant_wcc(complete).with_polarization(users.p)
        graphs: dict[str, RetweetGraph] = {"whole": whole}
        item_corpora = {}
        summary = {
            "whole": {
                "complete_nodes": len(complete.nodes),
                "complete_edges": len(complete.weights),
                "wcc_node_share": len(whole.nodes) / len(complete.nodes) if complete.nodes else 0.0,
                "wcc_edge_share": len(whole.weights) / len(complete.weights) if complete.weights else 0.0,
            }
        }
        if items:
            for item in items:
                item_corpora[item.id] = filter_corpus(corpus, item)
            matched = {r.tweet_id for c in item_corpora.values() for r in c}
            union = [r for r in corpus if r.tweet_id in matched]
            graphs["PD"] = build_retweet_graph(union).with_polarization(users.p)
            for item in items:
                graphs[item.id] = build_retweet_graph(item_corpora[item.id]).with_polarization(users.p)
        for gid, g in graphs.items():
            write_edge_csv(g, w.path(f"graphs/{gid}_edges.csv"))
            write_node_csv(g, w.path(f"graphs/{gid}_nodes.csv"))
            summary.setdefault(gid, {}).update(
                {
                    "nodes": len(g.nodes),
                    "edges": len(g.weights),
                    "total_weight": g.total_weight,
                    "tweets": len(corpus) if gid == "whole" else None,
                }
            )
        for item in items:
            summary[item.id]["tweets"] = len(item_corpora[item.id])
        if items:
            summary["PD"]["tweets"] = len(union)
        w.json("graphs/summary.json", summary)

    partitions = {}
    metrics = {}
    with run.stage("clustering"):
        cluster_report = {}
        todo = [gid for gid, g in graphs.items() if g.nodes]
        with ThreadPoolExecutor(cfg.workers) as pool:
            done = pool.map(lambda gid: louvain(graphs[gid], seed=cfg.seed), todo)
            partitions.update(zip(todo, done))
        for gid in todo:
            g, part = graphs[gid], partitions[gid]
            write_partition_csv(part, w.path(f"clusters/{gid}_partition.csv"))
            pol = cluster_polarization(part, user_classes(g))
            cluster_report[gid] = {
                "modularity": part.modularity,
                "levels": list(part.levels),
                "communities": part.n_communities,
                "size_distribution": size_distribution(part),
                "top_clusters": [c.as_dict() for c in pol[: cfg.top_clusters]],
            }
        w.json("clusters/summary.json", cluster_report)

    with run.stage("centrality"):
        top_report = {}
        todo = [gid for gid, g in graphs.items() if g.weights]
        with ThreadPoolExecutor(cfg.workers) as pool:
            done = pool.map(lambda gid: all_metrics(graphs[gid], cfg.weighted, max_iter=cfg.max_iter), todo)
            metrics.update(zip(todo, done))
        for gid in todo:
            g = graphs[gid]
            write_scores_csv(g, metrics[gid], w.path(f"centrality/{gid}_scores.csv"))
            top_report[gid] = {
                m: [
                    {"rank": r.rank, "node": r.node, "score": r.score, "class": r.user_class, "p_u": r.p_u}
                    for r in top_k(sv, cfg.top_users, g.polarization)
                ]
                for m, sv in metrics[gid].items()
            }
        w.json("centrality/top_users.json", top_report)

    with run.stage("comparison"):
        ids = [gid for gid in graphs if gid in partitions]
        if len(ids) >= 2:
            matrix = []
            for a in ids:
                row = []
                for b in ids:
                    common = set(partitions[a].assignment) & set(partitions[b].assignment)
                    row.append(ami(partitions[a], partitions[b], common) if len(common) >= 2 else float("nan"))
                matrix.append(row)
            w.matrix_csv("comparison/ami.csv", ids, ids, matrix, corner="graph")
        for item in items:
            if item.id not in partitions:
                continue
            rows = top_clusters(partitions[item.id], cfg.top_clusters)
            for ref in ("whole", "PD"):
                if ref not in partitions:
                    continue
                cols = top_clusters(partitions[ref], cfg.whole_clusters)
                w.matrix_csv(
                    f"comparison/intersection_{item.id}_vs_{ref}.csv",
                    [f"{item.id}:{i}" for i in range(len(rows))],
                    [f"{ref}:{j}" for j in range(len(cols))],
                    intersection_matrix(rows, cols),
                )
        corr_ids = [gid for gid in graphs if gid in metrics]
        if len(corr_ids) >= 2:
            sub = {gid: graphs[gid] for gid in corr_ids}
            for metric in METRICS:
                scores = {gid: metrics[gid][metric] for gid in corr_ids}
                for side in SIDES:
                    cm = correlation_matrices(sub, metric, side, cfg.weighted, scores=scores)
                    write_correlation_csv(
                        cm,
                        w.path(f"comparison/spearman_{metric}_{side}.csv"),
                        w.path(f"comparison/spearman_{metric}_{side}_counts.csv"),
                    )

    with run.stage("membership"):
        if items:
            decomp = membership_decomposition(
                graphs["PD"].nodes, {item.id: set(graphs[item.id].nodes) for item in items}
            )
            w.json("membership/decomposition.json", decomp.as_dict())

    with run.stage("histograms"):
        w.json(
            "polarity/histograms.json",
            {gid: report_polarization_histogram(g, cfg.histogram_bins) for gid, g in graphs.items()},
        )

    run.write_manifest()
    return run.manifest
