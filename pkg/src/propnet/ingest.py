"""JSONL tweet ingestion: record parsing, hashtag extraction, date slicing."""

from __future__ import annotations

import json
import logging
import unicodedata
from collections.abc import Iterable
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import DataError

log = logging.getLogger(__name__)


class RecordError(DataError):
    """A corpus line could not be turned into a TweetRecord."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class ParseError(RecordError):
    pass


class SchemaError(RecordError):
    pass


def normalize_text(text: str) -> str:
    """NFC + full case folding; accents are kept."""
    return unicodedata.normalize("NFC", unicodedata.normalize("NFC", text).casefold())


def _is_tag_char(ch: str) -> bool:
    # combining marks are kept so that folded forms such as "i̇" stay in one tag
    return ch.isalnum() or ch == "_" or unicodedata.category(ch).startswith("M")


def extract_hashtags(text: str) -> list[str]:
    """Return every ``#tag`` in *text*, case-folded, in order, duplicates kept."""
    text = unicodedata.normalize("NFC", text)
    tags = []
    i, n = 0, len(text)
    while i < n:
        if text[i] != "#":
            i += 1
            continue
        j = i + 1
        while j < n and _is_tag_char(text[j]):
            j += 1
        if j > i + 1:
            # folding can emit characters outside the tag alphabet (rare); split on them
            tags.extend(_split_folded(normalize_text(text[i + 1 : j])))
        i = j
    return tags


def _split_folded(tag: str) -> list[str]:
    parts, cur = [], []
    for ch in tag:
        if _is_tag_char(ch):
            cur.append(ch)
        elif cur:
            parts.append("".join(cur))
            cur = []
    if cur:
        parts.append("".join(cur))
    return parts


def _normalize_tag(raw) -> str:
    if not isinstance(raw, str):
        raise SchemaError(f"hashtag {raw!r} is not a string", field="hashtags")
    tag = normalize_text(raw.strip().lstrip("#"))
    if not tag or not all(map(_is_tag_char, tag)):
        raise SchemaError(f"invalid hashtag {raw!r}", field="hashtags")
    return tag


def parse_timestamp(value) -> int:
    """Epoch seconds from an integer or an RFC 3339 string."""
    if isinstance(value, bool):
        raise SchemaError("created_at must be a timestamp", field="created_at")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        s = value.strip()
        if s.lstrip("-").isdigit():
            return int(s)
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(s)
        except ValueError:
            raise SchemaError(f"unparseable created_at {value!r}", field="created_at") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise SchemaError("created_at must be a timestamp", field="created_at")


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    author_id: str
    text: str
    created_at: int
    hashtags: tuple[str, ...] = ()
    retweeted_author_id: str | None = None

    @property
    def is_retweet(self) -> bool:
        return self.retweeted_author_id is not None

    def to_json(self) -> str:
        obj = {
            "id": self.tweet_id,
            "user": self.author_id,
            "text": self.text,
            "created_at": self.created_at,
            "hashtags": list(self.hashtags),
        }
        if self.retweeted_author_id is not None:
            obj["retweeted_user"] = self.retweeted_author_id
        return json.dumps(obj, ensure_ascii=False)


def _required_str(obj: dict, name: str, line: int | None) -> str:
    if name not in obj:
        raise SchemaError(f"missing field {name!r}", line=line, field=name)
    value = obj[name]
    if isinstance(value, int) and not isinstance(value, bool) and name in ("id", "user"):
        value = str(value)
    if not isinstance(value, str):
        raise SchemaError(f"field {name!r} must be a string", line=line, field=name)
    return value


def parse_tweet_record(line: str, lineno: int | None = None) -> TweetRecord:
    """Parse one JSONL line into a normalized :class:`TweetRecord`.

    Raises :class:`ParseError` for malformed JSON and :class:`SchemaError`
    when a mandatory field is missing or has the wrong type.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON ({exc.msg})", line=lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=lineno)

    tweet_id = _required_str(obj, "id", lineno)
    user = _required_str(obj, "user", lineno)
    text = _required_str(obj, "text", lineno)
    if not tweet_id:
        raise SchemaError("empty field 'id'", line=lineno, field="id")
    if not user:
        raise SchemaError("empty field 'user'", line=lineno, field="user")
    if "created_at" not in obj:
        raise SchemaError("missing field 'created_at'", line=lineno, field="created_at")
    try:
        created_at = parse_timestamp(obj["created_at"])
    except SchemaError as exc:
        raise SchemaError(str(exc), line=lineno, field="created_at") from None

    rt = obj.get("retweeted_user")
    if rt is not None:
        if isinstance(rt, int) and not isinstance(rt, bool):
            rt = str(rt)
        if not isinstance(rt, str) or not rt:
            raise SchemaError("retweeted_user must be a non-empty string", line=lineno, field="retweeted_user")

    if obj.get("hashtags") is None:
        tags = extract_hashtags(text)
    else:
        if not isinstance(obj["hashtags"], list):
            raise SchemaError("hashtags must be an array", line=lineno, field="hashtags")
        try:
            tags = [_normalize_tag(t) for t in obj["hashtags"]]
        except SchemaError as exc:
            raise SchemaError(str(exc), line=lineno, field="hashtags") from None

    return TweetRecord(tweet_id, user, text, created_at, tuple(tags), rt)


@dataclass(frozen=True)
class Corpus:
    records: tuple[TweetRecord, ...]
    date_range: tuple[int, int] | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def subset(self, records: Iterable[TweetRecord]) -> Corpus:
        return Corpus(tuple(records), self.date_range)


@dataclass
class LoadReport:
    lines: int = 0
    accepted: int = 0
    rejected: int = 0  # parsed but outside the date range
    malformed: int = 0
    duplicates: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "lines": self.lines,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "malformed": self.malformed,
            "duplicates": self.duplicates,
            "errors": [{"line": n, "error": msg} for n, msg in self.errors],
        }


def read_records(lines: Iterable[str], report: LoadReport) -> list[TweetRecord]:
    """Parse lines, collecting errors into *report*; duplicate ids keep the last copy."""
    by_id: dict[str, TweetRecord] = {}
    for lineno, line in enumerate(lines, start=1):
        report.lines += 1
        if not line.strip():
            continue
        try:
            rec = parse_tweet_record(line, lineno)
        except RecordError as exc:
            report.malformed += 1
            report.errors.append((lineno, str(exc)))
            continue
        if rec.tweet_id in by_id:
            report.duplicates += 1
            log.warning("duplicate tweet id %s at line %d; keeping the later record", rec.tweet_id, lineno)
        by_id[rec.tweet_id] = rec
    return list(by_id.values())


def load_corpus(path, start: int | None = None, end: int | None = None) -> tuple[Corpus, LoadReport]:
    """Load a JSONL corpus keeping records with ``start <= created_at <= end``.

    Either bound may be ``None`` (unbounded). Returns the corpus together with
    accepted/rejected/malformed counts.
    """
    if start is not None and end is not None and start > end:
        raise ValueError(f"start {start} is after end {end}")
    report = LoadReport()
    with open(Path(path), encoding="utf-8") as fh:
        records = read_records(fh, report)
    lo = float("-inf") if start is None else start
    hi = float("inf") if end is None else end
    kept = [r for r in records if lo <= r.created_at <= hi]
    report.accepted = len(kept)
    report.rejected = len(records) - len(kept)
    if not kept:
        log.warning("no records accepted from %s", path)
    if start is not None and end is not None:
        date_range = (start, end)
    elif kept:
        date_range = (
            start if start is not None else min(r.created_at for r in kept),
            end if end is not None else max(r.created_at for r in kept),
        )
    else:
        date_range = None
    return Corpus(tuple(kept), date_range), report


def write_corpus(corpus: Iterable[TweetRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(rec.to_json() + "\n" for rec in corpus)


def parse_date_bound(value: str | None, end: bool = False) -> int | None:
    """CLI date bound: epoch seconds, RFC 3339, or ``YYYY-MM-DD`` (a date-only
    upper bound covers the whole day)."""
    if value is None:
        return None
    if len(value) == 10 and value[4] == "-" and value[7] == "-":
        ts = parse_timestamp(value + "T00:00:00Z")
        return ts + 86399 if end else ts
    return parse_timestamp(value)
