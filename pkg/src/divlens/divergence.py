"""Per-word Jensen-Shannon divergence contributions and in-group vocabulary.

The divergence between the baseline distribution P and the community
distribution Q uses the equal-weight mixture M = (P + Q) / 2 and log
base 2, so the total lands in [0, 1] bits. Each word w contributes

    delta_w = -m_w*log2(m_w) + (p_w*log2(p_w) + q_w*log2(q_w)) / 2

with 0*log2(0) taken as 0. The in-group vocabulary is the top k words
by contribution among those overrepresented in the community (q > p).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .corpus import FrequencyTable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WordContribution:
    word: str
    contribution: float  # bits
    p_rate: float  # baseline relative frequency
    q_rate: float  # community relative frequency


@dataclass
class VocabularyList:
    community: str
    entries: list[WordContribution] = field(default_factory=list)

    def words(self) -> set[str]:
        return {entry.word for entry in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[WordContribution]:
        return iter(self.entries)


def _xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


def jsd_contributions(
    baseline: FrequencyTable, community: FrequencyTable
) -> list[WordContribution]:
    """Per-word divergence contributions over the union vocabulary,
    sorted by contribution desc then word asc."""
    if not baseline.counts or not community.counts:
        raise ValueError("jsd_contributions requires two non-empty tables")
    p_total = baseline.total
    q_total = community.total
    contributions = []
    for word in set(baseline.counts) | set(community.counts):
        p = baseline.counts.get(word, 0) / p_total
        q = community.counts.get(word, 0) / q_total
        m = 0.5 * p + 0.5 * q
        delta = -_xlog2x(m) + 0.5 * (_xlog2x(p) + _xlog2x(q))
        # Mathematically delta >= 0; cancellation can leave a residue
        # around -1e-17 when p and q are nearly equal, so clamp.
        if delta < 0.0:
            delta = 0.0
        contributions.append(WordContribution(word, delta, p, q))
    contributions.sort(key=lambda c: (-c.contribution, c.word))
    return contributions


def total_jsd(contributions: Sequence[WordContribution]) -> float:
    """Total divergence in bits: the exact (compensated) sum of the
    per-word contributions."""
    return math.fsum(c.contribution for c in contributions)


def top_k_ingroup(
    contributions: Sequence[WordContribution], k: int = 100, community: str = ""
) -> VocabularyList:
    """The k highest-contribution words used *more* in the community than
    in the baseline (q > p strictly). Warns when fewer than k qualify."""
    if k < 0:
        raise ValueError("k must be non-negative")
    qualifying = [c for c in contributions if c.q_rate > c.p_rate]
    qualifying.sort(key=lambda c: (-c.contribution, c.word))
    if len(qualifying) < k:
        log.warning(
            "only %d words are community-overrepresented; %d requested",
            len(qualifying),
            k,
        )
    return VocabularyList(community=community, entries=qualifying[:k])


VOCAB_HEADER = ["word", "contribution_bits", "baseline_rate", "community_rate"]


def save_vocabulary(vocab: VocabularyList, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(VOCAB_HEADER)
        for entry in vocab.entries:
            writer.writerow(
                [entry.word, repr(entry.contribution), repr(entry.p_rate), repr(entry.q_rate)]
            )


def load_vocabulary(path: str | Path, community: str = "") -> VocabularyList:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != VOCAB_HEADER:
            raise ValueError(f"{path}: unexpected vocabulary header {header!r}")
        entries = [
            WordContribution(row[0], float(row[1]), float(row[2]), float(row[3]))
            for row in reader
        ]
    return VocabularyList(community=community, entries=entries)
