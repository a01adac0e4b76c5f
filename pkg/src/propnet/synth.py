"""Deterministic synthetic corpora with planted ground truth.

``study_fixture`` plants two camps (NO: three communities, YES: two), four
propaganda items whose participants are chosen by design (item 4 is spread
mostly by the YES camp), and a few disconnected neutral pairs. Item retweets
go to authorities of the spreader's camp without regard to community, while
spreader-to-spreader cascades stay inside a community; only the union of all
items therefore mirrors the community structure well. The ground
truth dictionary records the camp of every user and the planted
item-membership counts.

Run ``python -m propnet.synth OUTDIR`` to (re)write the bundled fixtures.
"""

from __future__ import annotations

import json
import random
import sys
from collections import Counter, defaultdict
from pathlib import Path

from .ingest import TweetRecord, extract_hashtags, format_timestamp, parse_timestamp
from .query import items_from_entries

T0 = parse_timestamp("2016-11-01T00:00:00Z")
T1 = parse_timestamp("2016-12-04T23:59:59Z")

YES_TAGS = ["bastaunsì", "iovotosi", "italiachedicesì", "sìcambia", "sìriforma", "votasì"]
NO_TAGS = ["iovotono", "iodicono", "renziacasa", "famiglieperilno", "noriforma", "ottoemezzo"]
NEUTRAL_TAGS = ["italyreferendum", "italy", "breaking"]
BRIDGE_TAGS = ["referendum", "referendumcostituzionale", "photo", "riformacostituzionale", "costituzione", "4dicembre"]

YES_WORDS = ["cambiamento", "futuro", "semplificare", "stabilità", "crescita", "coraggio", "innovare",
             "governabilità", "risparmio", "efficienza", "modernizzare", "fiducia"]
NO_WORDS = ["casta", "truffa", "difendiamo", "democrazia", "resistere", "vergogna", "poltrone",
            "libertà", "partigiani", "diritti", "opposizione", "sovrano"]
SHARED_WORDS = ["oggi", "italia", "domenica", "dibattito", "intervista", "piazza", "televisione",
                "giornale", "sondaggio", "elettori", "campagna", "ancora"]
NEUTRAL_WORDS = ["polls", "markets", "europe", "analysis", "vote", "result", "live", "update"]

QUERIES = [
    {
        "id": "PI1",
        "query": "('brogli' OR 'matite cancellabili' OR 'schede truccate') AND ('voto' OR 'seggi' OR 'scrutinio')",
        "description": "alleged vote rigging",
    },
    {
        "id": "PI2",
        "query": "('illegittimo' OR 'illeggittimo' OR 'illegal' OR 'non eletto') "
        "AND ('parlamento' OR 'governo' OR 'renzi' OR 'presidente')",
        "description": "illegitimately elected parliament",
    },
    {
        "id": "PI3",
        "query": "('sovranità nazionale' OR 'articolo 117' OR 'art.117') AND ('europa' OR 'bruxelles' OR 'merkel')",
        "description": "sovereignty yielded to EU institutions",
    },
    {
        "id": "PI4",
        "query": "('deriva autoritaria' OR 'dittatura' OR 'uomo solo al comando') AND ('riforma' OR 'renzi' OR 'governo')",
        "description": "shift towards authoritarianism",
    },
]

ITEM_PHRASES = {
    "PI1": (["brogli", "matite cancellabili", "schede truccate"], ["voto", "seggi", "scrutinio"]),
    "PI2": (["illegittimo", "illeggittimo", "illegal", "non eletto"], ["parlamento", "governo", "presidente"]),
    "PI3": (["sovranità nazionale", "articolo 117", "art.117"], ["europa", "bruxelles", "merkel"]),
    "PI4": (["deriva autoritaria", "dittatura", "uomo solo al comando"], ["riforma", "renzi", "governo"]),
}

COMMUNITIES = {"N1": "NO", "N2": "NO", "N3": "NO", "Y1": "YES", "Y2": "YES"}
COMMUNITY_SIZE = 60
N_INFLUENCERS = 4

# item authorities: (community, influencer index)
AUTHORITIES = {
    "PI1": [("N1", 0), ("N2", 0), ("N3", 0)],
    "PI2": [("N1", 1), ("N2", 1), ("N3", 1), ("Y1", 1)],
    "PI3": [("N1", 2), ("N2", 2), ("N3", 2)],
    "PI4": [("Y1", 3), ("Y2", 3), ("N1", 3)],
}

# planted spreader subsets per community of each camp: subset -> number of users
SPREADERS = {
    "NO": {
        ("PI1",): 8, ("PI2",): 8, ("PI3",): 8,
        ("PI1", "PI2"): 4, ("PI1", "PI3"): 3, ("PI2", "PI3"): 3,
        ("PI1", "PI2", "PI3"): 4, ("PI1", "PI2", "PI3", "PI4"): 2, ("PI2", "PI4"): 1,
    },
    "YES": {("PI4",): 20, ("PI2", "PI4"): 4, ("PI2",): 2},
}

N_NEUTRAL_PAIRS = 8

# item retweets: share aimed at an authority, and share of spreaders posting their own item tweet
AUTHORITY_P = 0.3
SPREADER_POST_P = 0.6


class _Gen:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.records: list[TweetRecord] = []
        self.originals = defaultdict(list)  # user -> chatter tweets
        self.item_originals = defaultdict(list)  # (item, user) -> tweets
        self.next_id = 1

    def tid(self):
        i = self.next_id
        self.next_id += 1
        return f"t{i:06d}"

    def ts(self):
        return self.rng.randint(T0, T1)

    def add(self, user, text, rt=None, ts=None):
        rec = TweetRecord(self.tid(), user, text, self.ts() if ts is None else ts, tuple(extract_hashtags(text)), rt)
        self.records.append(rec)
        return rec

    def camp_text(self, camp, tag_p=0.6):
        rng = self.rng
        words = YES_WORDS if camp == "YES" else NO_WORDS
        tags = YES_TAGS if camp == "YES" else NO_TAGS
        other = NO_TAGS if camp == "YES" else YES_TAGS
        parts = rng.sample(words, rng.randint(2, 4)) + rng.sample(SHARED_WORDS, rng.randint(1, 3))
        if rng.random() < tag_p:
            parts += ["#" + t for t in rng.sample(tags, rng.randint(1, 2))]
        if rng.random() < 0.4:
            parts.append("#" + rng.choice(BRIDGE_TAGS))
        if rng.random() < 0.02:
            parts.append("#" + rng.choice(other))
        rng.shuffle(parts)
        return " ".join(parts)

    def item_text(self, item, camp):
        rng = self.rng
        first, second = ITEM_PHRASES[item]
        words = YES_WORDS if camp == "YES" else NO_WORDS
        tags = YES_TAGS if camp == "YES" else NO_TAGS
        parts = [rng.choice(first), rng.choice(second)] + rng.sample(words, 2)
        if rng.random() < 0.5:
            parts.append("#" + rng.choice(tags))
        rng.shuffle(parts)
        return " ".join(parts)


def _retweet(gen: _Gen, user, orig: TweetRecord):
    ts = min(T1, orig.created_at + gen.rng.randint(60, 86400))
    return gen.add(user, f"RT @{orig.author_id}: {orig.text}", rt=orig.author_id, ts=ts)


def study_fixture(seed: int = 7):
    """Return ``(records, queries, truth)`` for the planted two-camp study."""
    gen = _Gen(seed)
    rng = gen.rng
    n_users = len(COMMUNITIES) * COMMUNITY_SIZE + 2 * N_NEUTRAL_PAIRS
    ids = [f"u{i:04d}" for i in rng.sample(range(1000, 10000), n_users)]
    it = iter(ids)

    members = {c: [next(it) for _ in range(COMMUNITY_SIZE)] for c in COMMUNITIES}
    camp_of = {u: COMMUNITIES[c] for c, us in members.items() for u in us}
    comm_of = {u: c for c, us in members.items() for u in us}
    influencers = {c: us[:N_INFLUENCERS] for c, us in members.items()}
    neutral_pairs = [(next(it), next(it)) for _ in range(N_NEUTRAL_PAIRS)]

    # chatter originals
    for c, us in members.items():
        for u in us:
            for _ in range(rng.randint(8, 12) if u in influencers[c] else rng.randint(2, 4)):
                gen.originals[u].append(gen.add(u, gen.camp_text(camp_of[u])))

    # chatter retweets
    by_camp = defaultdict(list)
    for c, camp in COMMUNITIES.items():
        by_camp[camp].append(c)
    for c, us in members.items():
        camp = COMMUNITIES[c]
        for u in us:
            for _ in range(rng.randint(4, 8)):
                r = rng.random()
                if r < 0.70:
                    target = rng.choice(influencers[c])
                elif r < 0.88:
                    target = rng.choice(us)
                elif r < 0.97:
                    target = rng.choice(members[rng.choice([x for x in by_camp[camp] if x != c])])
                else:
                    other = "YES" if camp == "NO" else "NO"
                    target = rng.choice(members[rng.choice(by_camp[other])])
                if target != u:
                    _retweet(gen, u, rng.choice(gen.originals[target]))

    # neutral, disconnected pairs
    for a, b in neutral_pairs:
        text = " ".join(rng.sample(NEUTRAL_WORDS, 4) + ["#" + rng.choice(NEUTRAL_TAGS)])
        orig = gen.add(a, text)
        _retweet(gen, b, orig)

    # propaganda items
    authorities = {item: [influencers[c][k] for c, k in spec] for item, spec in AUTHORITIES.items()}
    for item, auths in authorities.items():
        for a in auths:
            for _ in range(3):
                gen.item_originals[item, a].append(gen.add(a, gen.item_text(item, camp_of[a])))

    participants = defaultdict(set)  # item -> planted users
    spreaders = defaultdict(list)  # item -> spreader users
    subset_of = {}
    for c, us in members.items():
        pool = iter(us[N_INFLUENCERS:])
        for subset, count in SPREADERS[COMMUNITIES[c]].items():
            for _ in range(count):
                u = next(pool)
                subset_of[u] = subset
                for item in subset:
                    spreaders[item].append(u)
    for item, auths in authorities.items():
        participants[item].update(auths)
        participants[item].update(spreaders[item])

    for item in sorted(spreaders):
        auths = authorities[item]
        for u in spreaders[item]:
            if rng.random() < SPREADER_POST_P:
                gen.item_originals[item, u].append(gen.add(u, gen.item_text(item, camp_of[u])))
        retweeted = set()
        for u in spreaders[item]:
            same_camp = [a for a in auths if camp_of[a] == camp_of[u]]
            peers = [v for v in spreaders[item] if v != u and comm_of[v] == comm_of[u] and gen.item_originals[item, v]]
            for _ in range(rng.randint(1, 3)):
                # authorities are picked regardless of community; peer cascades stay local
                if peers and rng.random() >= AUTHORITY_P:
                    _retweet(gen, u, rng.choice(gen.item_originals[item, rng.choice(peers)]))
                else:
                    a = rng.choice(same_camp)
                    _retweet(gen, u, rng.choice(gen.item_originals[item, a]))
                    retweeted.add(a)
        for a in auths:
            if a not in retweeted:
                u = rng.choice([s for s in spreaders[item] if camp_of[s] == camp_of[a]])
                _retweet(gen, u, gen.item_originals[item, a][0])

    # a few records outside the analysed window
    for _ in range(12):
        u = rng.choice(ids[: len(COMMUNITIES) * COMMUNITY_SIZE])
        gen.add(u, gen.camp_text(camp_of[u]), ts=T0 - rng.randint(86400, 30 * 86400))

    records = sorted(gen.records, key=lambda r: (r.created_at, r.tweet_id))

    items = items_from_entries(QUERIES)
    for rec in records:
        hits = [it.id for it in items if it.matches(rec.text)]
        if len(hits) > 1:
            raise AssertionError(f"fixture tweet {rec.tweet_id} matches several items: {hits}")

    membership = Counter(u for us in participants.values() for u in us)
    counts = Counter(membership.values())
    truth = {
        "camp": {u: camp_of.get(u, "NEUTRAL") for u in ids},
        "community": comm_of,
        "influencers": {c: list(v) for c, v in influencers.items()},
        "authorities": authorities,
        "participants": {k: sorted(v) for k, v in participants.items()},
        "membership_counts": {str(k): counts.get(k, 0) for k in range(1, len(QUERIES) + 1)},
        "membership_other": 0,
        "membership_total": len(membership),
        "main_camp": "NO",
        "opposite_camp_item": "PI4",
        "yes_tags": YES_TAGS,
        "no_tags": NO_TAGS,
        "bridge_tags": BRIDGE_TAGS,
    }
    return records, QUERIES, truth


def ingest_fixture(n: int = 1000, malformed: int = 3, seed: int = 11) -> list[str]:
    """JSONL lines: *n* total, of which *malformed* cannot be parsed."""
    rng = random.Random(seed)
    users = [f"a{i:03d}" for i in range(40)]
    bad_at = sorted(rng.sample(range(n), malformed))
    bad_kinds = [
        '{"id": "x", "user": "a", "text": "broken',
        "not json at all",
        '{"id": "y", "text": "no user", "created_at": 0}',
    ]
    lines = []
    for i in range(n):
        if i in bad_at:
            lines.append(bad_kinds[bad_at.index(i) % len(bad_kinds)])
            continue
        u = rng.choice(users)
        obj = {
            "id": str(i + 1),
            "user": u,
            "text": " ".join(rng.sample(YES_WORDS + NO_WORDS, 3) + ["#" + rng.choice(YES_TAGS + NO_TAGS)]),
            "created_at": format_timestamp(rng.randint(T0, T1)) if i % 2 else rng.randint(T0, T1),
        }
        if rng.random() < 0.4:
            obj["retweeted_user"] = rng.choice(users)
        lines.append(json.dumps(obj, ensure_ascii=False))
    return lines


def classifier_corpus(n: int = 2000, seed: int = 5) -> list[TweetRecord]:
    """Tweets from two camps with disjoint vocabularies.

    About 95% carry one or two hashtags of their camp (seed tweets), 2% mix
    both camps' tags and the rest carry no tag at all.
    """
    gen = _Gen(seed)
    rng = gen.rng
    for i in range(n):
        camp = "YES" if i % 2 else "NO"
        words = YES_WORDS if camp == "YES" else NO_WORDS
        tags = YES_TAGS if camp == "YES" else NO_TAGS
        parts = rng.sample(words, rng.randint(2, 4)) + rng.sample(SHARED_WORDS, rng.randint(1, 3))
        r = rng.random()
        if r < 0.95:
            parts += ["#" + t for t in rng.sample(tags, rng.randint(1, 2))]
        elif r < 0.97:
            parts += ["#" + rng.choice(YES_TAGS), "#" + rng.choice(NO_TAGS)]
        rng.shuffle(parts)
        gen.add(f"c{i % 300:03d}", " ".join(parts))
    return gen.records


HASHTAG_BRIDGE = "referendum"


def hashtag_fixture(n: int = 600, seed: int = 3) -> list[TweetRecord]:
    """Two hashtag camps that never co-occur, joined only by one bridge tag."""
    gen = _Gen(seed)
    rng = gen.rng
    for i in range(n):
        tags = YES_TAGS if i % 2 else NO_TAGS
        picked = rng.sample(tags, rng.randint(1, 3))
        if rng.random() < 0.3:
            picked.append(HASHTAG_BRIDGE)
        gen.add(f"h{i % 50:02d}", " ".join(["#" + t for t in picked] + rng.sample(SHARED_WORDS, 2)))
    return gen.records


def pipeline_toml(corpus="corpus.jsonl", queries="queries.json", out="out") -> str:
    return f"""# propnet study configuration for the bundled synthetic fixture
[corpus]
path = "{corpus}"
from = "2016-11-01"
to = "2016-12-04"

[items]
path = "{queries}"

[polarity]
top_n = 30
yes_anchors = ["bastaunsì", "iovotosi"]
no_anchors = ["iovotono"]

[clustering]
seed = 42

[output]
dir = "{out}"
"""


def write_study(outdir, seed: int = 7) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    records, queries, truth = study_fixture(seed)
    with open(outdir / "corpus.jsonl", "w", encoding="utf-8") as fh:
        fh.writelines(rec.to_json() + "\n" for rec in records)
    (outdir / "queries.json").write_text(json.dumps(queries, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    (outdir / "truth.json").write_text(json.dumps(truth, ensure_ascii=False, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (outdir / "pipeline.toml").write_text(pipeline_toml(), encoding="utf-8")
    return outdir


def write_ingest(path) -> None:
    Path(path).write_text("\n".join(ingest_fixture()) + "\n", encoding="utf-8")


if __name__ == "__main__":
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
    write_study(root / "study")
    write_ingest(root / "ingest_1000.jsonl")
