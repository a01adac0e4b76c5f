"""Command-line entry point: ``propnet <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import ConfigError, DataError, PropnetError, __version__
from .centrality import (
    METRICS,
    SIDES,
    all_metrics,
    compute_metric,
    correlation_matrices,
    top_k,
    write_correlation_csv,
    write_scores_csv,
)
from .community import ami, louvain, modularity, read_partition_csv, write_partition_csv
from .graphs import build_hashtag_graph, build_retweet_graph, read_retweet_graph
from .ingest import load_corpus, parse_date_bound, write_corpus
from .pipeline import PipelineConfig, report_polarization_histogram, run_pipeline
from .polarity import (
    DEFAULT_NO_ANCHORS,
    DEFAULT_STOPLIST,
    DEFAULT_YES_ANCHORS,
    TextModel,
    derive_seed_clusters,
    score_tweets,
    seed_label,
    train_text_model,
    user_polarization,
)
from .query import filter_corpus, load_items, membership_decomposition

log = logging.getLogger("propnet")


def _csv_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=1, ensure_ascii=False, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _load(path, start=None, end=None):
    return load_corpus(path, parse_date_bound(start), parse_date_bound(end, end=True))


# -- commands ------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = PipelineConfig.from_toml(args.config, output_dir=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.unweighted:
        cfg = replace(cfg, weighted=False)
    if args.record_timings:
        cfg = replace(cfg, record_timings=True)
    manifest = run_pipeline(cfg)
    print(f"wrote {sum(len(s['outputs']) for s in manifest.stages)} files to {cfg.output_dir}")
    return 0


def cmd_ingest(args) -> int:
    corpus, report = _load(args.input, getattr(args, "from"), args.to)
    _write_json(args.stats_out, report.as_dict())
    if args.out:
        write_corpus(corpus, args.out)
    return 0


def cmd_filter(args) -> int:
    items = {it.id: it for it in load_items(args.queries)}
    if args.item not in items:
        raise ConfigError(f"unknown item {args.item!r}; known: {', '.join(items)}")
    corpus, _ = _load(args.input)
    sub = filter_corpus(corpus, items[args.item])
    write_corpus(sub, args.out)
    log.info("%s: %d of %d tweets match", args.item, len(sub), len(corpus))
    return 0


def _anchors(specs):
    yes, no = DEFAULT_YES_ANCHORS, DEFAULT_NO_ANCHORS
    for spec in specs or ():
        side, _, tags = spec.partition(":")
        if side.lower() == "yes":
            yes = _csv_list(tags)
        elif side.lower() == "no":
            no = _csv_list(tags)
        else:
            raise ConfigError(f"anchor spec {spec!r} must look like yes:tag1,tag2 or no:tag")
    return yes, no


def cmd_polarity_train(args) -> int:
    corpus, _ = _load(args.corpus, getattr(args, "from"), args.to)
    yes, no = _anchors(args.anchors)
    stoplist = _csv_list(args.stoplist) if args.stoplist is not None else DEFAULT_STOPLIST
    clusters = derive_seed_clusters(build_hashtag_graph(corpus), stoplist, args.top_n, args.seed, yes, no)
    seeds = seed_label(corpus, clusters.yes_tags, clusters.no_tags)
    res = train_text_model(
        corpus, seeds, l2=args.l2, epochs=args.epochs, lr=args.lr, folds=args.folds, seed=args.seed, clusters=clusters
    )
    Path(args.model_out).write_text(res.model.to_json() + "\n", encoding="utf-8")
    summary = {
        "yes_tags": sorted(clusters.yes_tags),
        "no_tags": sorted(clusters.no_tags),
        "seed_tweets": sum(1 for v in seeds.labels.values() if v != 0),
        "cv_mean_accuracy": None if res.cv is None else res.cv.mean,
        "final_loss": res.losses[-1],
    }
    _write_json(args.report, summary)
    return 0


def cmd_polarity_score(args) -> int:
    model = TextModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    corpus, _ = _load(args.corpus, getattr(args, "from"), args.to)
    seeds = seed_label(corpus, model.config.get("yes_tags", ()), model.config.get("no_tags", ()))
    scored = score_tweets(model, corpus, seeds.labels)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tweet_id", "score", "seed", "low_confidence"])
        for rec in corpus:
            w.writerow([rec.tweet_id, scored.scores[rec.tweet_id], int(rec.tweet_id in seeds.labels),
                        int(rec.tweet_id in scored.low_confidence)])
    if args.users_out:
        users = user_polarization(corpus, scored)
        with open(args.users_out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "p_u", "tweets"])
            for u, p in users.p.items():
                w.writerow([u, repr(p), users.tweet_count[u]])
    return 0


def cmd_cluster(args) -> int:
    g = read_retweet_graph(args.edges, args.nodes)
    part = louvain(g, seed=args.seed)
    write_partition_csv(part, args.out)
    print(f"{part.n_communities} communities, modularity {part.modularity:.6f}")
    return 0


def cmd_centrality(args) -> int:
    g = read_retweet_graph(args.edges, args.nodes)
    metrics = all_metrics(g, weighted=not args.unweighted, max_iter=args.max_iter)
    write_scores_csv(g, metrics, args.out)
    if args.top_out:
        _write_json(
            args.top_out,
            {
                m: [{"rank": r.rank, "node": r.node, "score": r.score, "class": r.user_class, "p_u": r.p_u}
                    for r in top_k(sv, args.top, g.polarization)]
                for m, sv in metrics.items()
            },
        )
    return 0


def _named(specs):
    """``name=path`` pairs, keeping order."""
    out = {}
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).stem, spec
        if name in out:
            raise ConfigError(f"duplicate name {name!r}")
        out[name] = path
    return out


def cmd_report_ami(args) -> int:
    parts = {k: read_partition_csv(p) for k, p in _named(args.partitions).items()}
    ids = list(parts)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph", *ids])
        for a in ids:
            w.writerow([a, *(repr(ami(parts[a], parts[b])) for b in ids)])
    return 0


def cmd_report_spearman(args) -> int:
    graphs = {k: read_retweet_graph(*_edge_node(p)) for k, p in _named(args.graphs).items()}
    weighted = not args.unweighted
    kw = {} if args.metric.endswith("degree") else {"max_iter": args.max_iter}
    scores = {k: compute_metric(g, args.metric, weighted, **kw) for k, g in graphs.items()}
    cm = correlation_matrices(graphs, args.metric, args.side, weighted, scores=scores)
    write_correlation_csv(cm, args.out, args.counts_out)
    return 0


def _edge_node(path):
    """``edges.csv`` or ``edges.csv+nodes.csv``."""
    edges, _, nodes = path.partition("+")
    return edges, nodes or None


def cmd_report_histogram(args) -> int:
    g = read_retweet_graph(args.edges, args.nodes)
    _write_json(args.out, report_polarization_histogram(g, args.bins))
    return 0


def cmd_report_membership(args) -> int:
    items = load_items(args.queries)
    corpus, _ = _load(args.input, getattr(args, "from"), args.to)
    item_users = {it.id: set(build_retweet_graph(filter_corpus(corpus, it)).nodes) for it in items}
    universe = set().union(*item_users.values()) if item_users else set()
    _write_json(args.out, membership_decomposition(universe, item_users).as_dict())
    return 0


def cmd_report_modularity(args) -> int:
    g = read_retweet_graph(args.edges, args.nodes)
    print(repr(modularity(g, read_partition_csv(args.partition))))
    return 0


def cmd_synth(args) -> int:
    from . import synth

    root = Path(args.outdir)
    synth.write_study(root / "study", seed=args.seed)
    synth.write_ingest(root / "ingest_1000.jsonl")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="propnet", description="Propaganda-item retweet network analysis.")
    p.add_argument("--version", action="version", version=f"propnet {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run the full study from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides [output] dir)")
    s.add_argument("--seed", type=int, help="Louvain / CV seed (overrides [clustering] seed)")
    s.add_argument("--unweighted", action="store_true", help="ignore edge weights in centrality")
    s.add_argument("--record-timings", action="store_true", help="store stage timings in the manifest")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("ingest", help="validate a JSONL corpus and report counts")
    s.add_argument("--input", required=True)
    s.add_argument("--from", dest="from", help="first day (inclusive), YYYY-MM-DD or RFC 3339")
    s.add_argument("--to", help="last day (inclusive)")
    s.add_argument("--stats-out", default="-")
    s.add_argument("--out", help="write accepted records as normalized JSONL")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("filter", help="keep tweets matching one propaganda item")
    s.add_argument("--item", required=True)
    s.add_argument("--queries", required=True, help="JSON or TOML item file")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_filter)

    pol = sub.add_parser("polarity", help="train or apply the tweet polarity classifier")
    psub = pol.add_subparsers(dest="action", required=True)
    s = psub.add_parser("train")
    s.add_argument("--corpus", required=True)
    s.add_argument("--from", dest="from")
    s.add_argument("--to")
    s.add_argument("--anchors", nargs="+", metavar="SIDE:TAGS", help="e.g. yes:bastaunsì,iovotosi no:iovotono")
    s.add_argument("--stoplist", help="comma-separated hashtags to drop before clustering")
    s.add_argument("--top-n", type=int, default=30)
    s.add_argument("--l2", type=float, default=1e-4)
    s.add_argument("--epochs", type=int, default=300)
    s.add_argument("--lr", type=float, default=4.0)
    s.add_argument("--folds", type=int, default=10)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--model-out", required=True)
    s.add_argument("--report", default="-", help="training summary JSON (default stdout)")
    s.set_defaults(func=cmd_polarity_train)
    s = psub.add_parser("score")
    s.add_argument("--model", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--from", dest="from")
    s.add_argument("--to")
    s.add_argument("--out", required=True, help="per-tweet scores CSV")
    s.add_argument("--users-out", help="per-user p_u CSV")
    s.set_defaults(func=cmd_polarity_score)

    s = sub.add_parser("cluster", help="Louvain communities of a retweet graph")
    s.add_argument("--edges", required=True)
    s.add_argument("--nodes")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("centrality", help="degree, PageRank and HITS scores")
    s.add_argument("--edges", required=True)
    s.add_argument("--nodes")
    s.add_argument("--unweighted", action="store_true")
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--top-out")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_centrality)

    rep = sub.add_parser("report", help="cross-graph comparisons and summaries")
    rsub = rep.add_subparsers(dest="report", required=True)
    s = rsub.add_parser("ami", help="AMI matrix between partition CSVs")
    s.add_argument("partitions", nargs="+", metavar="NAME=PATH")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report_ami)
    s = rsub.add_parser("spearman", help="rank correlation of one metric across graphs")
    s.add_argument("graphs", nargs="+", metavar="NAME=EDGES[+NODES]")
    s.add_argument("--metric", choices=METRICS, default="in_degree")
    s.add_argument("--side", choices=SIDES, default="ALL")
    s.add_argument("--unweighted", action="store_true")
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--out", required=True)
    s.add_argument("--counts-out")
    s.set_defaults(func=cmd_report_spearman)
    s = rsub.add_parser("histogram", help="binned p_u counts of a graph")
    s.add_argument("--edges", required=True)
    s.add_argument("--nodes", required=True)
    s.add_argument("--bins", type=int, default=21)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_report_histogram)
    s = rsub.add_parser("membership", help="how many items each participating user is involved in")
    s.add_argument("--queries", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--from", dest="from")
    s.add_argument("--to")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_report_membership)
    s = rsub.add_parser("modularity", help="modularity of a stored partition")
    s.add_argument("--edges", required=True)
    s.add_argument("--nodes")
    s.add_argument("--partition", required=True)
    s.set_defaults(func=cmd_report_modularity)

    s = sub.add_parser("synth", help="write the synthetic fixtures")
    s.add_argument("outdir")
    s.add_argument("--seed", type=int, default=7)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except PropnetError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return ConfigError.exit_code
    except ValueError as exc:
        log.error("%s", exc)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
