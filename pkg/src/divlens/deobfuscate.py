"""Recover community names hidden as a two-character prefix plus length.

An obscured entry like ``ge************`` reveals its first two
characters and its total length. Candidates (known community names with
population counts) are grouped by the same (lowercased prefix, length)
key; within a group, when there are at least as many candidates as
obscured entries, the N most populous candidates win, ties broken by
name ascending. With more obscured entries than candidates, every
candidate is assigned and the surplus entries stay unmatched.
"""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

_PATTERN_RE = re.compile(r"([a-z0-9_]{2})(\**)", re.IGNORECASE)


@dataclass(frozen=True)
class ObscuredName:
    prefix: str  # first two characters, lowercased
    length: int  # total name length

    def __post_init__(self) -> None:
        if len(self.prefix) != 2:
            raise ValueError(f"prefix must be exactly two characters: {self.prefix!r}")
        if self.length < 2:
            raise ValueError(f"length must be at least 2: {self.length}")


@dataclass(frozen=True)
class Candidate:
    name: str
    population: int

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("candidate name is empty")
        if self.population < 0:
            raise ValueError(f"negative population for {self.name!r}")


def parse_obscured_line(line: str) -> ObscuredName:
    text = line.strip()
    match = _PATTERN_RE.fullmatch(text)
    if not match:
        raise ValueError(f"unrecognized obscured pattern: {line!r}")
    prefix, stars = match.groups()
    return ObscuredName(prefix=prefix.lower(), length=2 + len(stars))


def load_obscured(path: str | Path) -> list[ObscuredName]:
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            names.append(parse_obscured_line(line))
    return names


def load_candidates(path: str | Path) -> list[Candidate]:
    """CSV with header name,population."""
    out: list[Candidate] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["name", "population"]:
            raise ValueError(f"{path}: unexpected candidates header {header!r}")
        for row in reader:
            out.append(Candidate(name=row[0], population=int(row[1])))
    return out


def _candidate_key(candidate: Candidate) -> tuple[str, int]:
    return candidate.name[:2].lower(), len(candidate.name)


def match_obscured(
    obscured: Sequence[ObscuredName], candidates: Sequence[Candidate]
) -> list[str | None]:
    """Resolve each obscured entry to a candidate name, or None.

    Result is aligned with the input order of ``obscured``. Duplicate
    candidate names are collapsed keeping the highest population, so no
    name is ever assigned twice.
    """
    best: dict[str, Candidate] = {}
    for candidate in candidates:
        kept = best.get(candidate.name)
        if kept is None or candidate.population > kept.population:
            best[candidate.name] = candidate
    groups: dict[tuple[str, int], list[Candidate]] = defaultdict(list)
    for candidate in best.values():
        groups[_candidate_key(candidate)].append(candidate)

    indices_by_key: dict[tuple[str, int], list[int]] = defaultdict(list)
    for idx, entry in enumerate(obscured):
        indices_by_key[(entry.prefix.lower(), entry.length)].append(idx)

    result: list[str | None] = [None] * len(obscured)
    for key, indices in indices_by_key.items():
        pool = sorted(groups.get(key, []), key=lambda c: (-c.population, c.name))
        if len(indices) < len(pool):
            pool = pool[: len(indices)]
        for idx, candidate in zip(indices, pool):
            result[idx] = candidate.name
    return result


MATCH_HEADER = ["prefix", "length", "match"]


def write_matches_csv(
    obscured: Sequence[ObscuredName], matches: Sequence[str | None], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MATCH_HEADER)
        for entry, match in zip(obscured, matches):
            writer.writerow([entry.prefix, entry.length, match or ""])
