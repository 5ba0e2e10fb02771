"""Per-user windowed statistics and normalized pre/post shift metrics.

The shift metric for a non-negative quantity x is
(x_after - x_before) / (x_after + x_before), bounded in [-1, 1]:
-1 means the behavior vanished after the ban, 0 means no change,
+1 means it only appeared afterward. It is undefined (never 0) when
both sides are zero.

Activity uses comment counts in the two windows. Vocabulary usage uses
the in-group token rate r = ingroup_tokens / total_tokens per window,
so a user who merely writes less does not look like they dropped the
vocabulary.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import DEFAULT_TOKENIZER, TokenizerConfig, tokenize
from .ingest import Comment, TimeWindow

log = logging.getLogger(__name__)


class UndefinedShiftError(ValueError):
    """Both windows are zero, so the shift has no value."""


def normalized_shift(before: float, after: float) -> float:
    if before < 0 or after < 0:
        raise ValueError("shift inputs must be non-negative")
    if before + after == 0:
        raise UndefinedShiftError("shift undefined when both windows are zero")
    return (after - before) / (after + before)


def count_ingroup(tokens: Iterable[str], vocab) -> int:
    """How many tokens belong to the in-group vocabulary. ``vocab`` may
    be a VocabularyList or any collection of words."""
    words = vocab.words() if hasattr(vocab, "words") else set(vocab)
    return sum(1 for token in tokens if token in words)


@dataclass(frozen=True)
class UserWindowStats:
    username: str
    pre_comments: int = 0
    post_comments: int = 0
    pre_words: int = 0
    post_words: int = 0
    pre_ingroup: int = 0
    post_ingroup: int = 0

    def __post_init__(self) -> None:
        for name in (
            "pre_comments",
            "post_comments",
            "pre_words",
            "post_words",
            "pre_ingroup",
            "post_ingroup",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.pre_ingroup > self.pre_words or self.post_ingroup > self.post_words:
            raise ValueError("in-group token count cannot exceed the window word count")
        if (self.pre_comments == 0 and self.pre_words != 0) or (
            self.post_comments == 0 and self.post_words != 0
        ):
            raise ValueError("a window with zero comments cannot contain words")


@dataclass(frozen=True)
class ShiftRecord:
    username: str
    cohort: str
    pre_comments: int
    post_comments: int
    activity_shift: float
    r_before: float
    r_after: float
    vocab_shift: float | None


def build_shift_record(stats: UserWindowStats, cohort: str) -> ShiftRecord:
    """Turn one user's window stats into shift metrics.

    Callers should have applied the omission rules first; a user with
    zero comments in both windows raises UndefinedShiftError. The
    vocabulary shift is None when the user never used the vocabulary in
    either window (that combination is an omission case too, but the
    record stays constructible for diagnostics).
    """
    activity = normalized_shift(stats.pre_comments, stats.post_comments)
    r_before = stats.pre_ingroup / stats.pre_words if stats.pre_words else 0.0
    r_after = stats.post_ingroup / stats.post_words if stats.post_words else 0.0
    if r_before + r_after > 0:
        vocab = (r_after - r_before) / (r_after + r_before)
    else:
        vocab = None
    return ShiftRecord(
        username=stats.username,
        cohort=cohort,
        pre_comments=stats.pre_comments,
        post_comments=stats.post_comments,
        activity_shift=activity,
        r_before=r_before,
        r_after=r_after,
        vocab_shift=vocab,
    )


def compute_window_stats(
    username: str,
    pre_comments: Sequence[Comment],
    post_comments: Sequence[Comment],
    vocab,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
) -> UserWindowStats:
    words = vocab.words() if hasattr(vocab, "words") else set(vocab)

    def tally(comments: Sequence[Comment]) -> tuple[int, int, int]:
        n_words = 0
        n_ingroup = 0
        for comment in comments:
            tokens = tokenize(comment.body, config)
            n_words += len(tokens)
            n_ingroup += sum(1 for t in tokens if t in words)
        return len(comments), n_words, n_ingroup

    pre_n, pre_w, pre_g = tally(pre_comments)
    post_n, post_w, post_g = tally(post_comments)
    return UserWindowStats(
        username=username,
        pre_comments=pre_n,
        post_comments=post_n,
        pre_words=pre_w,
        post_words=post_w,
        pre_ingroup=pre_g,
        post_ingroup=post_g,
    )


def collect_user_stats(
    comments: Iterable[Comment],
    usernames: Sequence[str],
    window: TimeWindow,
    vocab,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
) -> dict[str, UserWindowStats]:
    """Window statistics for each requested user from a platform-wide
    comment stream. Users absent from the stream get all-zero stats."""
    wanted = set(usernames)
    words = vocab.words() if hasattr(vocab, "words") else set(vocab)
    acc: dict[str, list[int]] = {u: [0, 0, 0, 0, 0, 0] for u in usernames}
    for comment in comments:
        if comment.author not in wanted:
            continue
        ts = comment.created_utc
        if window.pre_start <= ts < window.ban_time:
            base = 0
        elif window.ban_time <= ts < window.post_end:
            base = 1
        else:
            continue
        tokens = tokenize(comment.body, config)
        row = acc[comment.author]
        row[base] += 1
        row[2 + base] += len(tokens)
        row[4 + base] += sum(1 for t in tokens if t in words)
    return {
        u: UserWindowStats(u, row[0], row[1], row[2], row[3], row[4], row[5])
        for u, row in acc.items()
    }


SHIFT_HEADER = [
    "username",
    "cohort",
    "pre_comments",
    "post_comments",
    "activity_shift",
    "r_before",
    "r_after",
    "vocab_shift",
]


def write_shifts_csv(records: Sequence[ShiftRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHIFT_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.username,
                    r.cohort,
                    r.pre_comments,
                    r.post_comments,
                    repr(r.activity_shift),
                    repr(r.r_before),
                    repr(r.r_after),
                    "" if r.vocab_shift is None else repr(r.vocab_shift),
                ]
            )


def load_shifts_csv(path: str | Path) -> list[ShiftRecord]:
    records: list[ShiftRecord] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SHIFT_HEADER:
            raise ValueError(f"{path}: unexpected shifts header {header!r}")
        for row in reader:
            records.append(
                ShiftRecord(
                    username=row[0],
                    cohort=row[1],
                    pre_comments=int(row[2]),
                    post_comments=int(row[3]),
                    activity_shift=float(row[4]),
                    r_before=float(row[5]),
                    r_after=float(row[6]),
                    vocab_shift=float(row[7]) if row[7] else None,
                )
            )
    return records
