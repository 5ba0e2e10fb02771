"""Tokenization and mergeable word-frequency tables.

Tables are plain word -> count maps plus a cached token total, built per
archive shard and merged, so a large corpus never has to be tokenized in
one pass. Counts are positive integers for observed corpora; estimated
population tables (see the sage module) may carry fractional counts.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# Alphanumeric runs, letters or digits in any script, with internal ASCII
# apostrophes kept so contractions stay single tokens. Underscore excluded.
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")

_INT_RE = re.compile(r"-?\d+")


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    strip_urls: bool = True
    min_token_length: int = 2

    def __post_init__(self) -> None:
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be at least 1")


DEFAULT_TOKENIZER = TokenizerConfig()


def tokenize(text: str, config: TokenizerConfig = DEFAULT_TOKENIZER) -> list[str]:
    """Split text into normalized word tokens.

    URLs go first, then case folding, then extraction of alphanumeric
    runs (internal apostrophes allowed), then the minimum-length filter.
    Idempotent: tokenizing the join of the output returns the same list.
    """
    if config.strip_urls:
        text = _URL_RE.sub(" ", text)
    if config.lowercase:
        text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    if config.min_token_length > 1:
        tokens = [t for t in tokens if len(t) >= config.min_token_length]
    return tokens


@dataclass
class FrequencyTable:
    """Word counts with their total.

    ``comments`` records how many source comments fed the table when the
    builder knows it (0 otherwise); the population-scale estimator needs
    it to turn a sampled baseline into per-comment expectations.
    """

    counts: dict[str, float] = field(default_factory=dict)
    total: float = 0
    comments: int = 0

    @classmethod
    def from_counts(cls, counts: dict[str, float], comments: int = 0) -> "FrequencyTable":
        for word, count in counts.items():
            if count < 0:
                raise ValueError(f"negative count {count!r} for word {word!r}")
        clean = {w: c for w, c in counts.items() if c > 0}
        return cls(counts=clean, total=sum(clean.values()), comments=comments)

    def rate(self, word: str) -> float:
        if self.total <= 0:
            raise ValueError("rate undefined for an empty table")
        return self.counts.get(word, 0) / self.total

    def copy(self) -> "FrequencyTable":
        return FrequencyTable(dict(self.counts), self.total, self.comments)

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, word: str) -> bool:
        return word in self.counts


def empty_table() -> FrequencyTable:
    return FrequencyTable()


def build_table(tokens: Iterable[str]) -> FrequencyTable:
    counts = Counter(tokens)
    return FrequencyTable(counts=dict(counts), total=sum(counts.values()))


def table_from_comments(comments: Iterable, config: TokenizerConfig = DEFAULT_TOKENIZER) -> FrequencyTable:
    """Tokenize comment bodies into one table, tracking the comment count."""
    counts: Counter = Counter()
    n = 0
    for comment in comments:
        counts.update(tokenize(comment.body, config))
        n += 1
    return FrequencyTable(counts=dict(counts), total=sum(counts.values()), comments=n)


def merge(a: FrequencyTable, b: FrequencyTable) -> FrequencyTable:
    """Combine two tables. Associative and commutative on counts."""
    counts = dict(a.counts)
    for word, count in b.counts.items():
        counts[word] = counts.get(word, 0) + count
    return FrequencyTable(counts=counts, total=a.total + b.total, comments=a.comments + b.comments)


def top_words(table: FrequencyTable, k: int) -> list[str]:
    """The k most frequent words; ties broken by count desc, then word asc."""
    if k < 0:
        raise ValueError("k must be non-negative")
    ranked = sorted(table.counts.items(), key=lambda item: (-item[1], item[0]))
    return [word for word, _ in ranked[:k]]


def remove_top_k(
    community: FrequencyTable, baseline: FrequencyTable, k: int = 10000
) -> tuple[FrequencyTable, FrequencyTable]:
    """Drop the k most frequent *baseline* words from both tables.

    Platform-dominant words carry no in-group signal; removing them
    before computing relative rates keeps the divergence ranking from
    being swamped by stopwords. Returns (community', baseline').
    """
    removed = set(top_words(baseline, k))

    def strip(table: FrequencyTable) -> FrequencyTable:
        kept = {w: c for w, c in table.counts.items() if w not in removed}
        return FrequencyTable(counts=kept, total=sum(kept.values()), comments=table.comments)

    return strip(community), strip(baseline)


def _format_count(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(value)


def _parse_count(text: str):
    if _INT_RE.fullmatch(text):
        return int(text)
    return float(text)


def save_table(table: FrequencyTable, path: str | Path) -> None:
    """Write ``word<TAB>count`` rows, count desc then word asc, after a
    ``#total <N>`` header line. Format round-trips byte-exactly."""
    lines = [f"#total {_format_count(table.total)}"]
    if table.comments:
        lines.append(f"#comments {table.comments}")
    for word, count in sorted(table.counts.items(), key=lambda item: (-item[1], item[0])):
        lines.append(f"{word}\t{_format_count(count)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_table(path: str | Path) -> FrequencyTable:
    text = Path(path).read_text(encoding="utf-8")
    total = None
    comments = 0
    counts: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        if line.startswith("#total "):
            total = _parse_count(line[len("#total "):])
            continue
        if line.startswith("#comments "):
            comments = int(line[len("#comments "):])
            continue
        word, sep, count_text = line.partition("\t")
        if not sep or not word:
            raise ValueError(f"{path}: malformed row at line {lineno}: {line!r}")
        counts[word] = _parse_count(count_text)
    if total is None:
        raise ValueError(f"{path}: missing '#total' header")
    summed = sum(counts.values())
    if isinstance(total, int) and isinstance(summed, int):
        if summed != total:
            raise ValueError(f"{path}: header total {total} != sum of counts {summed}")
    elif abs(summed - total) > 1e-9 * max(1.0, abs(total)):
        raise ValueError(f"{path}: header total {total} != sum of counts {summed}")
    return FrequencyTable(counts=counts, total=total, comments=comments)
