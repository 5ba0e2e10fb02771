"""Per-community result summaries, vocabulary overlap, run config, and
the run manifest.

A community summary collapses shift records into per-cohort medians
plus an omission accounting: for each cohort, how many users were
dropped for zero post-ban activity and how many for never using the
in-group vocabulary. The pair (zero_postban, zero_vocab) aggregated
over cohorts is the community's omission signature.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import csv

import tomli

from . import __version__
from .sage import vocab_overlap
from .divergence import VocabularyList
from .shift import ShiftRecord
from .stats import BatteryRow, COMPARISON

SUMMARY_HEADER = [
    "community",
    "category",
    "cohort",
    "n_kept",
    "median_activity_shift",
    "median_vocab_shift",
    "omitted_zero_postban",
    "omitted_zero_vocab",
    "activity_q",
    "vocab_q",
]


@dataclass
class CohortSummary:
    cohort: str
    n_kept: int = 0
    median_activity_shift: float | None = None
    median_vocab_shift: float | None = None
    omitted: dict[str, int] = field(default_factory=dict)
    activity_q: float | None = None
    vocab_q: float | None = None

    def omission_pair(self) -> tuple[int, int]:
        return (
            self.omitted.get("zero_postban", 0),
            self.omitted.get("zero_vocab", 0),
        )


@dataclass
class CommunitySummary:
    community: str
    category: str = ""
    cohorts: dict[str, CohortSummary] = field(default_factory=dict)
    comparison_q: dict[str, float] = field(default_factory=dict)  # metric -> q

    def omission_pair(self) -> tuple[int, int]:
        zero_post = sum(c.omission_pair()[0] for c in self.cohorts.values())
        zero_vocab = sum(c.omission_pair()[1] for c in self.cohorts.values())
        return (zero_post, zero_vocab)


def _median(values: list[float]) -> float | None:
    return statistics.median(values) if values else None


def summarize(
    records: Sequence[ShiftRecord],
    tests: Sequence[BatteryRow] = (),
    community: str = "",
    category: str = "",
    omissions: Iterable[tuple[str, str, str]] = (),
) -> CommunitySummary:
    """Fold kept shift records, battery rows, and omission entries
    (username, cohort, reason) into one community summary. Medians are
    None, never 0, for empty cohorts."""
    summary = CommunitySummary(community=community, category=category)
    for record in records:
        cohort = summary.cohorts.setdefault(record.cohort, CohortSummary(record.cohort))
        cohort.n_kept += 1
    by_cohort: dict[str, list[ShiftRecord]] = {}
    for record in records:
        by_cohort.setdefault(record.cohort, []).append(record)
    for name, recs in by_cohort.items():
        cohort = summary.cohorts[name]
        cohort.median_activity_shift = _median([r.activity_shift for r in recs])
        cohort.median_vocab_shift = _median(
            [r.vocab_shift for r in recs if r.vocab_shift is not None]
        )
    for username, cohort_name, reason in omissions:
        cohort = summary.cohorts.setdefault(cohort_name, CohortSummary(cohort_name))
        cohort.omitted[reason] = cohort.omitted.get(reason, 0) + 1
    for row in tests:
        if row.community and community and row.community != community:
            continue
        q = row.result.q_value
        if q is None:
            continue
        if row.cohort == COMPARISON:
            summary.comparison_q[row.metric] = q
        elif row.cohort in summary.cohorts:
            target = summary.cohorts[row.cohort]
            if row.metric == "activity":
                target.activity_q = q
            elif row.metric == "vocabulary":
                target.vocab_q = q
    return summary


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary_csv(summaries: Sequence[CommunitySummary], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for summary in summaries:
            for name in sorted(summary.cohorts, key=_cohort_sort_key):
                cohort = summary.cohorts[name]
                writer.writerow(
                    [
                        summary.community,
                        summary.category,
                        name,
                        cohort.n_kept,
                        _fmt(cohort.median_activity_shift),
                        _fmt(cohort.median_vocab_shift),
                        cohort.omitted.get("zero_postban", 0),
                        cohort.omitted.get("zero_vocab", 0),
                        _fmt(cohort.activity_q),
                        _fmt(cohort.vocab_q),
                    ]
                )
            if summary.comparison_q:
                writer.writerow(
                    [
                        summary.community,
                        summary.category,
                        COMPARISON,
                        "",
                        "",
                        "",
                        "",
                        "",
                        _fmt(summary.comparison_q.get("activity")),
                        _fmt(summary.comparison_q.get("vocabulary")),
                    ]
                )


def _cohort_sort_key(name: str) -> tuple[int, str]:
    order = {"top": 0, "random": 1}
    return (order.get(name, 2), name)


# --- vocabulary overlap ----------------------------------------------


@dataclass
class OverlapMatrix:
    names: list[str]
    matrix: list[list[int]]  # symmetric; diagonal is each list's size

    def top_matches(self, n: int = 3) -> list[tuple[str, list[tuple[str, int]]]]:
        """For each community, its n highest-overlap partners, ties
        broken by overlap desc then name asc."""
        out = []
        for i, name in enumerate(self.names):
            others = [
                (self.names[j], self.matrix[i][j])
                for j in range(len(self.names))
                if j != i
            ]
            others.sort(key=lambda pair: (-pair[1], pair[0]))
            out.append((name, others[:n]))
        return out


def overlap_matrix(vocabularies: Sequence[VocabularyList]) -> OverlapMatrix:
    if len(vocabularies) < 2:
        raise ValueError("overlap needs at least two vocabulary lists")
    names = [v.community for v in vocabularies]
    size = len(vocabularies)
    matrix = [[0] * size for _ in range(size)]
    for i in range(size):
        matrix[i][i] = len(vocabularies[i])
        for j in range(i + 1, size):
            value = vocab_overlap(vocabularies[i], vocabularies[j])
            matrix[i][j] = value
            matrix[j][i] = value
    return OverlapMatrix(names=names, matrix=matrix)


def write_overlap_matrix_csv(overlap: OverlapMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["community"] + overlap.names)
        for name, row in zip(overlap.names, overlap.matrix):
            writer.writerow([name] + [str(v) for v in row])


def write_overlap_pairs_csv(overlap: OverlapMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["community_a", "community_b", "overlap"])
        for i in range(len(overlap.names)):
            for j in range(i + 1, len(overlap.names)):
                writer.writerow(
                    [overlap.names[i], overlap.names[j], str(overlap.matrix[i][j])]
                )


def write_top_matches_csv(overlap: OverlapMatrix, path: str | Path, n: int = 3) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["community"]
        for i in range(1, n + 1):
            header += [f"match{i}", f"overlap{i}"]
        writer.writerow(header)
        for name, matches in overlap.top_matches(n):
            row = [name]
            for other, value in matches:
                row += [other, str(value)]
            row += [""] * (len(header) - len(row))
            writer.writerow(row)


# --- run configuration -----------------------------------------------


@dataclass(frozen=True)
class CommunityConfig:
    name: str
    ban_time: int
    archive: str = ""
    users_archive: str = ""
    category: str = ""


@dataclass
class RunConfig:
    communities: list[CommunityConfig] = field(default_factory=list)
    bot_list: str = ""
    baseline_archive: str = ""

    def community(self, name: str) -> CommunityConfig:
        for entry in self.communities:
            if entry.name == name:
                return entry
        raise KeyError(f"community {name!r} not in config")


def load_config(path: str | Path) -> RunConfig:
    """TOML config: top-level ``bot_list`` and ``baseline_archive``
    strings plus repeated ``[[community]]`` tables with name, ban_time,
    archive, users_archive, category."""
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    communities = []
    for table in data.get("community", []):
        try:
            communities.append(
                CommunityConfig(
                    name=table["name"],
                    ban_time=int(table["ban_time"]),
                    archive=table.get("archive", ""),
                    users_archive=table.get("users_archive", ""),
                    category=table.get("category", ""),
                )
            )
        except KeyError as exc:
            raise ValueError(f"{path}: community table missing key {exc}") from exc
    return RunConfig(
        communities=communities,
        bot_list=data.get("bot_list", ""),
        baseline_archive=data.get("baseline_archive", ""),
    )


# --- run manifest ------------------------------------------------------

MANIFEST_NAME = "run_manifest.json"


def _relativize(value, out_dir: Path):
    if isinstance(value, str):
        try:
            resolved = Path(value).resolve()
            return str(resolved.relative_to(out_dir.resolve()))
        except (ValueError, OSError):
            return value
    if isinstance(value, (list, tuple)):
        return [_relativize(v, out_dir) for v in value]
    if isinstance(value, dict):
        return {k: _relativize(v, out_dir) for k, v in sorted(value.items())}
    return value


def update_run_manifest(out_dir: str | Path, command: str, seed: int, parameters: dict) -> Path:
    """Append one step to the out-dir's manifest. Records the package
    version, the seed, and the parameters with paths made relative to
    the output directory; no timestamps, so reruns are byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / MANIFEST_NAME
    if path.exists():
        manifest = json.loads(path.read_text(encoding="utf-8"))
    else:
        manifest = {"package": "divlens", "version": __version__, "steps": []}
    manifest["steps"].append(
        {
            "command": command,
            "seed": seed,
            "parameters": {k: _relativize(v, out) for k, v in sorted(parameters.items())},
        }
    )
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
