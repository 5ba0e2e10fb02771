"""User ranking and cohort selection around a community ban.

Two cohorts per community: the 100 most active users by pre-ban comment
count ("top") and a seeded uniform sample of 1000 of the remaining
eligible users ("random"). Known bots and the placeholder author left
by comment deletion are never eligible. After window statistics are
computed, users are further omitted when they have no post-ban comments
at all (their activity shift would be forced to -1 by construction) or
never used the in-group vocabulary in either window (their vocabulary
shift is undefined).
"""

from __future__ import annotations

import csv
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import Comment, DELETED_AUTHOR
from .shift import UserWindowStats

log = logging.getLogger(__name__)

OMIT_BOT = "bot"
OMIT_DELETED = "deleted"
OMIT_ZERO_POSTBAN = "zero_postban"
OMIT_ZERO_VOCAB = "zero_vocab"

COHORT_TOP = "top"
COHORT_RANDOM = "random"


@dataclass(frozen=True)
class UserRank:
    username: str
    preban_comments: int


@dataclass
class CohortSelection:
    top: list[str] = field(default_factory=list)
    random: list[str] = field(default_factory=list)
    omitted: dict[str, str] = field(default_factory=dict)  # username -> reason

    def cohort_of(self) -> dict[str, str]:
        mapping = {u: COHORT_TOP for u in self.top}
        mapping.update({u: COHORT_RANDOM for u in self.random})
        return mapping


def rank_users(comments: Iterable[Comment]) -> list[UserRank]:
    """Authors ordered by comment count desc, then username asc."""
    tally = Counter(c.author for c in comments)
    return [
        UserRank(username, count)
        for username, count in sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def select_cohorts(
    ranked: Sequence[UserRank],
    bots: Iterable[str] = (),
    n_top: int = 100,
    n_random: int = 1000,
    seed: int = 0,
) -> CohortSelection:
    """Pick the top and random cohorts from a ranking.

    Bots and the deletion placeholder are recorded in ``omitted`` with
    their reason. The random cohort is drawn without replacement from
    eligible users below the top block and kept in rank order; the draw
    is deterministic for a fixed seed. Short cohorts only warn, so small
    communities still produce output.
    """
    if n_top < 0 or n_random < 0:
        raise ValueError("cohort sizes must be non-negative")
    bot_set = set(bots)
    omitted: dict[str, str] = {}
    eligible: list[str] = []
    for rank in ranked:
        if rank.username in bot_set:
            omitted[rank.username] = OMIT_BOT
        elif rank.username == DELETED_AUTHOR:
            omitted[rank.username] = OMIT_DELETED
        else:
            eligible.append(rank.username)
    top = eligible[:n_top]
    pool = eligible[n_top:]
    k = min(n_random, len(pool))
    if len(top) < n_top:
        log.warning("top cohort short: %d of %d requested", len(top), n_top)
    if k < n_random:
        log.warning("random cohort short: %d of %d requested", k, n_random)
    chosen = set(random.Random(seed).sample(pool, k))
    return CohortSelection(
        top=top,
        random=[u for u in pool if u in chosen],
        omitted=omitted,
    )


def apply_omission_rules(stats: UserWindowStats) -> str | None:
    """Reason a cohort member must be excluded from shift analysis, or
    None to keep them. Zero post-ban activity takes precedence over
    never having used the vocabulary."""
    if stats.post_comments == 0:
        return OMIT_ZERO_POSTBAN
    if stats.pre_ingroup + stats.post_ingroup == 0:
        return OMIT_ZERO_VOCAB
    return None


def secondary_omission_reason(stats: UserWindowStats, primary: str) -> str:
    """Diagnostic companion to apply_omission_rules: reports when an
    omitted user would also have tripped the other rule."""
    if primary == OMIT_ZERO_POSTBAN and stats.pre_ingroup + stats.post_ingroup == 0:
        return OMIT_ZERO_VOCAB
    return ""


def load_bot_list(path: str | Path) -> set[str]:
    """One username per line; blank lines and '#' comments ignored."""
    bots: set[str] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name = line.strip()
        if name and not name.startswith("#"):
            bots.add(name)
    return bots


COHORT_HEADER = ["username", "cohort", "preban_comments"]
OMISSION_HEADER = ["username", "reason"]


def write_cohorts_csv(
    selection: CohortSelection,
    preban_counts: Mapping[str, int],
    path: str | Path,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COHORT_HEADER)
        for cohort, users in ((COHORT_TOP, selection.top), (COHORT_RANDOM, selection.random)):
            for username in users:
                writer.writerow([username, cohort, preban_counts.get(username, 0)])


def load_cohorts_csv(path: str | Path) -> list[tuple[str, str, int]]:
    rows: list[tuple[str, str, int]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COHORT_HEADER:
            raise ValueError(f"{path}: unexpected cohorts header {header!r}")
        for row in reader:
            rows.append((row[0], row[1], int(row[2])))
    return rows


def write_omissions_csv(omitted: Mapping[str, str], path: str | Path) -> None:
    """Selection-stage omissions (bots, deletion placeholder)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OMISSION_HEADER)
        for username in sorted(omitted):
            writer.writerow([username, omitted[username]])


SHIFT_OMISSION_HEADER = ["username", "cohort", "reason", "secondary_reason"]


def write_shift_omissions_csv(
    entries: Sequence[tuple[str, str, str, str]], path: str | Path
) -> None:
    """Analysis-stage omissions: (username, cohort, reason, secondary)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHIFT_OMISSION_HEADER)
        for row in entries:
            writer.writerow(list(row))


def load_shift_omissions_csv(path: str | Path) -> list[tuple[str, str, str, str]]:
    rows: list[tuple[str, str, str, str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SHIFT_OMISSION_HEADER:
            raise ValueError(f"{path}: unexpected omissions header {header!r}")
        for row in reader:
            rows.append((row[0], row[1], row[2], row[3]))
    return rows
