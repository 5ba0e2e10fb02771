"""Archive ingestion: comment records, base-36 IDs, uniform ID sampling,
and pre/post-ban window slicing.

Archives are newline-delimited JSON, one record per line, with fields
``id`` (base-36 string), ``author``, ``subreddit``, ``body``, and
``created_utc`` (epoch seconds). Submission records (``title`` or
``selftext`` but no ``body``) are tolerated and counted separately from
malformed lines; only comments are analyzed.
"""

from __future__ import annotations

import json
import logging
import os
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

DELETED_AUTHOR = "[deleted]"
SECONDS_PER_DAY = 86400
ARCHIVE_URL_ENV = "DIVLENS_ARCHIVE_URL"

_BASE36_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"
_BASE36_VALUE = {ch: i for i, ch in enumerate(_BASE36_DIGITS)}


class ArchiveError(Exception):
    """Unusable archive source: bad client configuration or a remote
    endpoint that keeps failing after retries."""


def decode_base36(id36: str) -> int:
    """Decode a lowercase base-36 ID string to an integer."""
    if not id36:
        raise ValueError("empty base-36 id")
    value = 0
    for pos, ch in enumerate(id36):
        digit = _BASE36_VALUE.get(ch)
        if digit is None:
            raise ValueError(
                f"invalid base-36 character {ch!r} at position {pos} in {id36!r}"
            )
        value = value * 36 + digit
    return value


def encode_base36(value: int) -> str:
    """Encode a non-negative integer as a lowercase base-36 string."""
    if value < 0:
        raise ValueError(f"cannot encode negative value {value} as base-36")
    if value == 0:
        return "0"
    digits = []
    while value:
        value, rem = divmod(value, 36)
        digits.append(_BASE36_DIGITS[rem])
    return "".join(reversed(digits))


def sample_id_range(first_id: int, last_id: int, n: int, seed: int) -> list[int]:
    """Draw ``n`` distinct comment IDs uniformly from [first_id, last_id].

    Returns the sample sorted ascending. Deterministic for a fixed seed.
    """
    if last_id < first_id:
        raise ValueError(f"empty id range [{first_id}, {last_id}]")
    size = last_id - first_id + 1
    if n < 0 or n > size:
        raise ValueError(f"cannot draw {n} distinct ids from a range of {size}")
    rng = random.Random(seed)
    return sorted(rng.sample(range(first_id, last_id + 1), n))


@dataclass(frozen=True)
class Comment:
    """One comment record. ``community`` holds the subreddit name."""

    id: str
    author: str
    community: str
    body: str
    created_utc: int

    @property
    def id_int(self) -> int:
        return decode_base36(self.id)

    @property
    def is_deleted(self) -> bool:
        return self.author == DELETED_AUTHOR


@dataclass(frozen=True)
class TimeWindow:
    """Observation windows around a ban timestamp (all spans in days)."""

    ban_time: int
    days_before: int = 60
    days_after: int = 60
    corpus_days_before: int = 182

    def __post_init__(self) -> None:
        for name in ("days_before", "days_after", "corpus_days_before"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def pre_start(self) -> int:
        return self.ban_time - self.days_before * SECONDS_PER_DAY

    @property
    def post_end(self) -> int:
        return self.ban_time + self.days_after * SECONDS_PER_DAY

    @property
    def corpus_start(self) -> int:
        return self.ban_time - self.corpus_days_before * SECONDS_PER_DAY


def comment_to_json(comment: Comment) -> str:
    """Serialize one comment in the archive line format (no newline)."""
    return json.dumps(
        {
            "id": comment.id,
            "author": comment.author,
            "subreddit": comment.community,
            "body": comment.body,
            "created_utc": comment.created_utc,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


class ArchiveParser:
    """Streams comments out of newline-delimited JSON, skipping what it
    cannot use.

    Counters after (or during) iteration: ``parsed`` comments yielded,
    ``malformed`` lines skipped (bad JSON, missing fields, bad types),
    ``submissions`` records skipped for having a title but no body.
    """

    def __init__(self, lines: Iterable[str]):
        self._lines = lines
        self.parsed = 0
        self.malformed = 0
        self.submissions = 0

    def __iter__(self) -> Iterator[Comment]:
        for line in self._lines:
            if not line.strip():
                continue
            comment = self._parse_line(line)
            if comment is not None:
                self.parsed += 1
                yield comment

    def _parse_line(self, line: str) -> Comment | None:
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            self.malformed += 1
            return None
        if not isinstance(record, dict):
            self.malformed += 1
            return None
        if "body" not in record and ("title" in record or "selftext" in record):
            self.submissions += 1
            return None
        if not _valid_record(record):
            self.malformed += 1
            return None
        return Comment(
            id=record["id"],
            author=record["author"],
            community=record["subreddit"],
            body=record["body"],
            created_utc=record["created_utc"],
        )


def _valid_record(record: dict) -> bool:
    id36 = record.get("id")
    if not isinstance(id36, str) or not id36 or any(ch not in _BASE36_VALUE for ch in id36):
        return False
    author = record.get("author")
    if not isinstance(author, str) or not author:
        return False
    if not isinstance(record.get("subreddit"), str):
        return False
    if not isinstance(record.get("body"), str):
        return False
    created = record.get("created_utc")
    if isinstance(created, bool) or not isinstance(created, int):
        return False
    return True


def parse_archive(lines: Iterable[str]) -> ArchiveParser:
    return ArchiveParser(lines)


def read_archive(path: str | Path) -> tuple[list[Comment], ArchiveParser]:
    """Load a whole archive file. Returns (comments, parser-with-counters)."""
    with open(path, encoding="utf-8") as fh:
        parser = ArchiveParser(fh)
        comments = list(parser)
    if parser.malformed:
        log.warning("%s: skipped %d malformed lines", path, parser.malformed)
    return comments, parser


def write_archive(comments: Iterable[Comment], path: str | Path) -> int:
    """Write comments as archive lines. Returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for comment in comments:
            fh.write(comment_to_json(comment))
            fh.write("\n")
            n += 1
    return n


def window_split(
    comments: Iterable[Comment], window: TimeWindow
) -> tuple[list[Comment], list[Comment]]:
    """Partition comments into (pre, post) ban windows.

    Pre covers [ban - days_before, ban), post covers [ban, ban + days_after).
    Comments outside both windows are dropped. Input order is preserved.
    """
    pre: list[Comment] = []
    post: list[Comment] = []
    for comment in comments:
        ts = comment.created_utc
        if window.pre_start <= ts < window.ban_time:
            pre.append(comment)
        elif window.ban_time <= ts < window.post_end:
            post.append(comment)
    return pre, post


class ArchiveClient:
    """Paginated reader for a remote archive endpoint.

    The endpoint serves archive records as newline-delimited JSON:
    ``GET {base_url}?after=<id36>&limit=<n>`` returns up to ``limit``
    comments with ID strictly greater than ``after``, ordered by ID.
    ``GET {base_url}?ids=<id36,id36,...>`` returns the named comments.
    A short or empty page ends pagination.

    Transient failures (connection errors, HTTP 5xx) retry with
    exponential backoff, at most ``max_attempts`` tries per request.
    The endpoint URL comes from ``base_url`` or the DIVLENS_ARCHIVE_URL
    environment variable; with neither set, construction fails, since
    local-file mode needs no client at all.
    """

    def __init__(
        self,
        base_url: str | None = None,
        session=None,
        page_size: int = 1000,
        max_attempts: int = 5,
        backoff: float = 0.5,
        sleep=time.sleep,
    ):
        url = base_url or os.environ.get(ARCHIVE_URL_ENV)
        if not url:
            raise ArchiveError(
                f"no archive endpoint configured; set {ARCHIVE_URL_ENV} or pass "
                "base_url (local-file mode needs no client)"
            )
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        self.base_url = url
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.page_size = page_size
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep
        self.malformed = 0
        self.submissions = 0

    def _get(self, params: dict) -> str:
        delay = self.backoff
        for attempt in range(1, self.max_attempts + 1):
            error: Exception
            try:
                response = self._session.get(self.base_url, params=params, timeout=30)
            except OSError as exc:
                error = exc
            else:
                if response.status_code == 200:
                    return response.text
                if response.status_code < 500:
                    raise ArchiveError(
                        f"archive request failed with HTTP {response.status_code}"
                    )
                error = ArchiveError(f"HTTP {response.status_code}")
            if attempt == self.max_attempts:
                raise ArchiveError(
                    f"archive request failed after {attempt} attempts: {error}"
                ) from error
            log.warning("archive request attempt %d failed (%s), retrying", attempt, error)
            self._sleep(delay)
            delay *= 2
        raise AssertionError("unreachable")

    def _parse_page(self, text: str) -> list[Comment]:
        parser = ArchiveParser(text.splitlines())
        comments = list(parser)
        self.malformed += parser.malformed
        self.submissions += parser.submissions
        return comments

    def iter_comments(
        self, after: int | None = None, until: int | None = None
    ) -> Iterator[Comment]:
        """Stream comments in ID order, optionally bounded by ``until``
        (inclusive). ``after`` is an exclusive integer lower bound."""
        cursor = after
        while True:
            params: dict = {"limit": self.page_size}
            if cursor is not None:
                params["after"] = encode_base36(cursor)
            page = self._parse_page(self._get(params))
            if not page:
                return
            for comment in page:
                if until is not None and comment.id_int > until:
                    return
                yield comment
            cursor = page[-1].id_int
            if len(page) < self.page_size:
                return

    def fetch_ids(self, ids: Sequence[int], batch_size: int = 500) -> list[Comment]:
        """Fetch specific comments by integer ID, preserving request order
        where the endpoint honors it. Missing IDs are simply absent."""
        out: list[Comment] = []
        for start in range(0, len(ids), batch_size):
            batch = ids[start : start + batch_size]
            text = self._get({"ids": ",".join(encode_base36(i) for i in batch)})
            out.extend(self._parse_page(text))
        return out
