import json
import logging
import tempfile
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propnet.ingest import (
    ParseError,
    SchemaError,
    TweetRecord,
    extract_hashtags,
    load_corpus,
    normalize_text,
    parse_date_bound,
    parse_timestamp,
    parse_tweet_record,
    write_corpus,
)

from conftest import FIXTURES


def line(**obj):
    return json.dumps(obj, ensure_ascii=False)


def test_record_with_hashtag_and_no_retweet():
    rec = parse_tweet_record(line(id="1", user="a", text="#IoVotoNo renzi", created_at="2016-11-02T10:00:00Z"))
    assert rec.hashtags == ("iovotono",)
    assert rec.retweeted_author_id is None
    assert rec.created_at == parse_timestamp("2016-11-02T10:00:00+00:00")


def test_retweeted_user_passes_through():
    rec = parse_tweet_record(line(id="2", user="b", text="RT", created_at="2016-11-02T10:01:00Z", retweeted_user="a"))
    assert rec.retweeted_author_id == "a"
    assert rec.is_retweet


def test_bundled_ingest_fixture_counts():
    corpus, report = load_corpus(FIXTURES / "ingest_1000.jsonl")
    assert report.lines == 1000
    assert len(corpus) == 997
    assert report.malformed == 3
    assert [n for n, _ in report.errors] == sorted(n for n, _ in report.errors)
    assert all(msg.startswith(f"line {n}:") for n, msg in report.errors)


@pytest.mark.parametrize(
    "text, tags",
    [
        ("Vota #bastaunsì! #BASTAUNSÌ", ["bastaunsì", "bastaunsì"]),
        ("no tags here", []),
        ("#Italiachedicesì,#iovotono", ["italiachedicesì", "iovotono"]),
        ("# alone and #", []),
        ("#snake_case #x1", ["snake_case", "x1"]),
        ("#Straße", ["strasse"]),
    ],
)
def test_extract_hashtags(text, tags):
    assert extract_hashtags(text) == tags


def test_decomposed_accents_normalize_to_composed():
    assert extract_hashtags("#bastaunsi\u0300") == ["bastaunsì"]
    assert extract_hashtags("#BASTAUNSI\u0300 ") == ["bastaunsì"]


def test_missing_field_names_the_field():
    with pytest.raises(SchemaError) as err:
        parse_tweet_record(line(id="1", text="x", created_at=0), lineno=5)
    assert err.value.field == "user"
    assert err.value.line == 5
    assert "user" in str(err.value)


def test_malformed_json_reports_line():
    with pytest.raises(ParseError) as err:
        parse_tweet_record('{"id": ', lineno=12)
    assert err.value.line == 12


def test_integer_ids_are_strings():
    rec = parse_tweet_record(line(id=7, user=9, text="", created_at=1, retweeted_user=3))
    assert (rec.tweet_id, rec.author_id, rec.retweeted_author_id) == ("7", "9", "3")


def test_explicit_hashtags_are_normalized():
    rec = parse_tweet_record(line(id="1", user="u", text="ignored", created_at=0, hashtags=["#IoVotoNO", "Sì"]))
    assert rec.hashtags == ("iovotono", "sì")


def test_bad_timestamp_is_schema_error():
    with pytest.raises(SchemaError) as err:
        parse_tweet_record(line(id="1", user="u", text="", created_at="yesterday"))
    assert err.value.field == "created_at"


def _write(tmp: Path, records):
    p = tmp / "c.jsonl"
    write_corpus(records, p)
    return p


def _records(timestamps):
    return [TweetRecord(str(i), f"u{i % 3}", f"tweet {i}", t) for i, t in enumerate(timestamps)]


def test_date_range_of_seven(tmp_path):
    ts = [100 * i for i in range(10)]
    corpus, report = load_corpus(_write(tmp_path, _records(ts)), 200, 800)
    assert len(corpus) == 7
    assert (report.accepted, report.rejected) == (7, 3)


def test_single_instant_range_is_inclusive(tmp_path):
    corpus, _ = load_corpus(_write(tmp_path, _records([5, 10, 15])), 10, 10)
    assert [r.created_at for r in corpus] == [10]


def test_empty_file_warns(tmp_path, caplog):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    with caplog.at_level(logging.WARNING):
        corpus, _ = load_corpus(p)
    assert len(corpus) == 0
    assert "no records" in caplog.text


def test_inverted_range_rejected(tmp_path):
    with pytest.raises(ValueError):
        load_corpus(_write(tmp_path, _records([1])), 10, 5)


def test_duplicates_keep_last_content_at_first_position(tmp_path, caplog):
    p = tmp_path / "d.jsonl"
    p.write_text(
        "\n".join(
            [
                line(id="1", user="a", text="old", created_at=1),
                line(id="2", user="b", text="x", created_at=2),
                line(id="1", user="a", text="new", created_at=3),
            ]
        )
    )
    with caplog.at_level(logging.WARNING):
        corpus, report = load_corpus(p)
    assert [(r.tweet_id, r.text) for r in corpus] == [("1", "new"), ("2", "x")]
    assert report.duplicates == 1
    assert "duplicate" in caplog.text


def test_date_only_upper_bound_covers_day():
    start = parse_date_bound("2016-12-04")
    end = parse_date_bound("2016-12-04", end=True)
    assert end - start == 86399


# -- properties ----------------------------------------------------------------

texts = st.text(
    alphabet=st.sampled_from(list("abcXYZ àèìòùÌ#_,.!1") + ["̀", "ß"]), max_size=40
)


@settings(max_examples=200, deadline=None)
@given(
    tid=st.integers(min_value=1, max_value=10**12),
    user=st.text(alphabet="abcdef0123", min_size=1, max_size=6),
    text=texts,
    ts=st.integers(min_value=0, max_value=2**33),
    rt=st.none() | st.text(alphabet="xyz", min_size=1, max_size=3),
)
def test_record_json_round_trip(tid, user, text, ts, rt):
    obj = {"id": str(tid), "user": user, "text": text, "created_at": ts}
    if rt is not None:
        obj["retweeted_user"] = rt
    rec = parse_tweet_record(json.dumps(obj, ensure_ascii=False))
    assert parse_tweet_record(rec.to_json()) == rec


@settings(max_examples=200, deadline=None)
@given(text=texts)
def test_hashtags_are_normalized_fixpoints(text):
    for tag in extract_hashtags(text):
        assert tag and normalize_text(tag) == tag
        assert extract_hashtags("#" + tag) == [tag]


@settings(max_examples=60, deadline=None)
@given(
    ts=st.lists(st.integers(min_value=0, max_value=1000), max_size=30),
    a=st.integers(min_value=0, max_value=1000),
    b=st.integers(min_value=0, max_value=1000),
)
def test_date_filter_matches_inclusive_bounds(ts, a, b):
    lo, hi = min(a, b), max(a, b)
    with tempfile.TemporaryDirectory() as d:
        corpus, report = load_corpus(_write(Path(d), _records(ts)), lo, hi)
    assert sorted(r.created_at for r in corpus) == sorted(t for t in ts if lo <= t <= hi)
    assert report.accepted + report.rejected == len(ts)
