"""Tests for archive ingestion: id arithmetic, parsing, windowing, HTTP client."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divlens import ingest
from divlens.ingest import (
    ArchiveClient,
    ArchiveError,
    ArchiveParser,
    Comment,
    TimeWindow,
    comment_to_json,
    decode_base36,
    encode_base36,
    parse_archive,
    read_archive,
    sample_id_range,
    window_split,
    write_archive,
)


def make_comment(id36="c00001", author="alice", community="comm", body="hello world", ts=1000):
    return Comment(id=id36, author=author, community=community, body=body, created_utc=ts)


class TestBase36:
    def test_known_values(self):
        assert decode_base36("0") == 0
        assert decode_base36("z") == 35
        assert decode_base36("10") == 36
        assert decode_base36("zz") == 1295

    def test_encode_known_values(self):
        assert encode_base36(0) == "0"
        assert encode_base36(35) == "z"
        assert encode_base36(1295) == "zz"

    @given(st.integers(min_value=0, max_value=36**8))
    def test_roundtrip(self, n):
        assert decode_base36(encode_base36(n)) == n

    def test_invalid_character_is_named(self):
        with pytest.raises(ValueError) as exc:
            decode_base36("ab!cd")
        assert "!" in str(exc.value)

    def test_uppercase_rejected(self):
        # archive ids are lowercase; callers normalize before decoding
        with pytest.raises(ValueError):
            decode_base36("ZZ")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            decode_base36("")

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            encode_base36(-1)


class TestSampleIdRange:
    def test_sorted_unique_in_range(self):
        ids = sample_id_range(1000, 2000, n=50, seed=7)
        assert ids == sorted(ids)
        assert len(set(ids)) == 50
        assert all(1000 <= v <= 2000 for v in ids)

    def test_deterministic(self):
        a = sample_id_range(0, 100_000, n=20, seed=3)
        assert a == sample_id_range(0, 100_000, n=20, seed=3)
        assert a != sample_id_range(0, 100_000, n=20, seed=4)

    def test_mean_is_unbiased(self):
        # Without-replacement sample of n from [lo, hi]; the sample mean
        # should sit within 3 standard errors of the population mean.
        lo, hi, n = 0, 99_999, 2000
        values = sample_id_range(lo, hi, n=n, seed=11)
        pop = hi - lo + 1
        pop_mean = (lo + hi) / 2
        pop_var = (pop**2 - 1) / 12
        se = math.sqrt(pop_var / n * (pop - n) / (pop - 1))
        assert abs(sum(values) / n - pop_mean) < 3 * se

    def test_n_larger_than_range_rejected(self):
        with pytest.raises(ValueError):
            sample_id_range(0, 9, n=100, seed=0)

    def test_reversed_range_rejected(self):
        with pytest.raises(ValueError):
            sample_id_range(200, 100, n=1, seed=0)


class TestComment:
    def test_id_int(self):
        assert make_comment(id36="zz").id_int == 1295

    def test_is_deleted(self):
        assert make_comment(author="[deleted]").is_deleted
        assert not make_comment(author="alice").is_deleted


class TestTimeWindow:
    def test_boundaries(self):
        w = TimeWindow(ban_time=1_000_000)
        assert w.pre_start == 1_000_000 - 60 * 86400
        assert w.post_end == 1_000_000 + 60 * 86400
        assert w.corpus_start == 1_000_000 - 182 * 86400

    def test_nonpositive_days_rejected(self):
        with pytest.raises(ValueError):
            TimeWindow(ban_time=0, days_before=0)
        with pytest.raises(ValueError):
            TimeWindow(ban_time=0, days_after=-1)


class TestParser:
    def line(self, **overrides):
        record = {
            "id": "abc123",
            "author": "alice",
            "subreddit": "comm",
            "body": "some text",
            "created_utc": 1234,
        }
        record.update(overrides)
        return json.dumps(record)

    def test_valid_line(self):
        parser = ArchiveParser([self.line()])
        comments = list(parser)
        assert parser.parsed == 1
        assert parser.malformed == 0
        assert comments[0].author == "alice"
        assert comments[0].community == "comm"

    def test_malformed_json_counted(self):
        parser = ArchiveParser(["{not json"])
        assert list(parser) == []
        assert parser.malformed == 1

    def test_missing_field_counted(self):
        record = json.loads(self.line())
        del record["author"]
        parser = ArchiveParser([json.dumps(record)])
        assert list(parser) == []
        assert parser.malformed == 1

    def test_wrong_type_counted(self):
        bad = [
            self.line(created_utc="1234"),
            self.line(created_utc=True),
            self.line(author=""),
            self.line(id="ab!c"),
        ]
        parser = ArchiveParser(bad)
        assert list(parser) == []
        assert parser.malformed == 4

    def test_submission_counted_separately(self):
        submission = json.dumps(
            {"id": "s1", "author": "bob", "subreddit": "comm",
             "title": "a post", "selftext": "text", "created_utc": 5}
        )
        parser = ArchiveParser([submission])
        assert list(parser) == []
        assert parser.submissions == 1
        assert parser.malformed == 0

    def test_blank_lines_skipped(self):
        parser = ArchiveParser(["", self.line(), "   ", self.line(id="abc124")])
        assert len(list(parser)) == 2
        assert parser.malformed == 0

    def test_parse_archive_counts(self):
        parser = parse_archive([self.line(), "{bad", self.line(id="abc124")])
        comments = list(parser)
        assert len(comments) == 2
        assert (parser.parsed, parser.malformed) == (2, 1)


class TestArchiveIO:
    def test_write_read_roundtrip(self, tmp_path):
        comments = [make_comment(id36=encode_base36(1000 + i), ts=100 + i) for i in range(5)]
        path = tmp_path / "arch.ndjson"
        assert write_archive(comments, path) == 5
        loaded, parser = read_archive(path)
        assert loaded == comments
        assert parser.malformed == 0

    def test_written_lines_are_compact_json(self, tmp_path):
        path = tmp_path / "arch.ndjson"
        write_archive([make_comment()], path)
        line = path.read_text(encoding="utf-8").splitlines()[0]
        assert ", " not in line
        assert json.loads(line)["subreddit"] == "comm"


class TestWindowSplit:
    def test_boundary_membership(self):
        w = TimeWindow(ban_time=1_000_000, days_before=1, days_after=1, corpus_days_before=2)
        ban = 1_000_000
        pre_start = ban - 86400
        post_end = ban + 86400
        comments = [
            make_comment(id36="a1", ts=pre_start - 1),  # before window
            make_comment(id36="a2", ts=pre_start),      # first pre second
            make_comment(id36="a3", ts=ban - 1),        # last pre second
            make_comment(id36="a4", ts=ban),            # first post second
            make_comment(id36="a5", ts=post_end - 1),   # last post second
            make_comment(id36="a6", ts=post_end),       # past window
        ]
        pre, post = window_split(comments, w)
        assert [c.id for c in pre] == ["a2", "a3"]
        assert [c.id for c in post] == ["a4", "a5"]

    @given(st.lists(st.integers(min_value=0, max_value=2_000_000), max_size=50))
    @settings(max_examples=50)
    def test_partition_property(self, timestamps):
        w = TimeWindow(ban_time=1_000_000, days_before=5, days_after=5, corpus_days_before=10)
        comments = [make_comment(id36=encode_base36(i + 100), ts=ts)
                    for i, ts in enumerate(timestamps)]
        pre, post = window_split(comments, w)
        assert not (set(c.id for c in pre) & set(c.id for c in post))
        for c in pre:
            assert w.pre_start <= c.created_utc < w.ban_time
        for c in post:
            assert w.ban_time <= c.created_utc < w.post_end


class StubResponse:
    def __init__(self, status_code, text):
        self.status_code = status_code
        self.text = text


class StubSession:
    """Scripted responses: each entry is (status, ndjson text) or an exception."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append((url, dict(params or {})))
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        status, text = item
        return StubResponse(status, text)


def page(*id36s):
    return "\n".join(
        comment_to_json(make_comment(id36=i, ts=100)) for i in id36s
    )


class TestArchiveClient:
    def test_requires_url(self, monkeypatch):
        monkeypatch.delenv(ingest.ARCHIVE_URL_ENV, raising=False)
        with pytest.raises(ArchiveError):
            ArchiveClient()

    def test_url_from_environment(self, monkeypatch):
        monkeypatch.setenv(ingest.ARCHIVE_URL_ENV, "http://archive.test")
        client = ArchiveClient(session=StubSession([]))
        assert client.base_url == "http://archive.test"

    def test_pagination_until_short_page(self):
        session = StubSession([
            (200, page("100", "101")),
            (200, page("102")),
        ])
        client = ArchiveClient(base_url="http://a", session=session, page_size=2)
        got = list(client.iter_comments(after=decode_base36("zz")))
        assert [c.id for c in got] == ["100", "101", "102"]
        # second request resumes after the last id of the first page
        assert session.calls[1][1]["after"] == "101"

    def test_until_bound_is_inclusive(self):
        session = StubSession([
            (200, page("100", "101", "102")),
        ])
        client = ArchiveClient(base_url="http://a", session=session, page_size=3)
        got = list(client.iter_comments(until=decode_base36("101")))
        assert [c.id for c in got] == ["100", "101"]

    def test_retry_then_success(self):
        sleeps = []
        session = StubSession([
            (503, ""),
            OSError("boom"),
            (200, page("100")),
        ])
        client = ArchiveClient(
            base_url="http://a", session=session, page_size=5,
            backoff=0.5, sleep=sleeps.append,
        )
        got = list(client.iter_comments())
        assert len(got) == 1
        assert sleeps == [0.5, 1.0]  # exponential backoff between attempts

    def test_gives_up_after_max_attempts(self):
        session = StubSession([(500, "")] * 3)
        client = ArchiveClient(
            base_url="http://a", session=session, max_attempts=3, sleep=lambda s: None,
        )
        with pytest.raises(ArchiveError):
            list(client.iter_comments())
        assert len(session.calls) == 3

    def test_client_error_is_not_retried(self):
        session = StubSession([(404, "")])
        client = ArchiveClient(base_url="http://a", session=session, sleep=lambda s: None)
        with pytest.raises(ArchiveError):
            list(client.iter_comments())
        assert len(session.calls) == 1

    def test_fetch_ids_batches(self):
        session = StubSession([
            (200, page("100", "101")),
            (200, page("102")),
        ])
        client = ArchiveClient(base_url="http://a", session=session)
        ids = [decode_base36(i) for i in ("100", "101", "102")]
        got = client.fetch_ids(ids, batch_size=2)
        assert [c.id for c in got] == ["100", "101", "102"]
        assert session.calls[0][1]["ids"] == "100,101"
        assert session.calls[1][1]["ids"] == "102"

    def test_malformed_page_lines_counted(self):
        session = StubSession([(200, page("100") + "\n{bad")])
        client = ArchiveClient(base_url="http://a", session=session, page_size=5)
        got = list(client.iter_comments())
        assert [c.id for c in got] == ["100"]
        assert client.malformed == 1


def test_synthetic_archive_ids_increase(tmp_path):
    # Generated archives must present comments in id order so that id
    # arithmetic over (first, last) brackets the stream.
    from divlens import synth

    spec = synth.SynthSpec(
        shared_vocab_size=50, planted_vocab_size=5, n_users=30,
        baseline_tokens=2000, seed=5,
    )
    result = synth.generate(spec, tmp_path)
    comments, parser = read_archive(result.community_archive)
    assert parser.malformed == 0
    assert len(comments) >= 100
    ints = [c.id_int for c in comments]
    assert all(a < b for a, b in zip(ints, ints[1:]))
