"""Nonparametric pre/post and cohort-comparison tests with FDR control.

Both Wilcoxon tests use midranks for ties. Small samples get an exact
null distribution, computed by subset-sum dynamic programming over
doubled ranks (doubling makes midranks integral, and the DP is
equivalent to full enumeration of sign assignments or group labelings).
Larger samples use the tie-corrected normal approximation with a 0.5
continuity correction. Two-sided p-values follow the doubling
convention p = min(1, 2*min(P(T <= t), P(T >= t))).

The test battery for one community pairs each cohort's pre/post values
(signed-rank) and compares shift distributions across cohorts
(rank-sum); q-values come from Benjamini-Hochberg over every battery
row gathered in input order.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

SIGNED_RANK_EXACT_MAX = 25
RANK_SUM_EXACT_MAX = 20


class DegenerateSampleError(ValueError):
    """No usable observations: every paired difference is zero."""


@dataclass
class TestResult:
    method: str
    statistic: float
    p_value: float
    n: object  # int for signed-rank, (n_a, n_b) for rank-sum
    q_value: float | None = None


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j + 2) / 2  # average of 1-based positions i+1 .. j+1
        for t in range(i, j + 1):
            ranks[order[t]] = mid
        i = j + 1
    return ranks


def _norm_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _tie_sizes(ranks: Sequence[float]) -> list[int]:
    return list(Counter(ranks).values())


def _doubled(ranks: Sequence[float]) -> list[int]:
    # Midranks are multiples of 1/2, so doubling gives exact integers.
    return [int(round(2 * r)) for r in ranks]


def wilcoxon_signed_rank(pairs: Iterable[tuple[float, float]]) -> TestResult:
    """Paired two-sided test of after vs before.

    Zero differences are dropped; |differences| are midranked; the
    statistic W is the rank sum over positive differences. Exact null
    distribution for n <= 25 nonzero pairs, normal approximation with
    tie correction sum(t^3 - t)/48 beyond that.
    """
    diffs = [after - before for before, after in pairs]
    diffs = [d for d in diffs if d != 0]
    n = len(diffs)
    if n == 0:
        raise DegenerateSampleError("all paired differences are zero")
    ranks = _midranks([abs(d) for d in diffs])
    w = sum(r for r, d in zip(ranks, diffs) if d > 0)
    if n <= SIGNED_RANK_EXACT_MAX:
        p = _signed_rank_exact_p(ranks, w)
    else:
        p = _signed_rank_normal_p(ranks, w)
    return TestResult(method="signed_rank", statistic=w, p_value=p, n=n)


def _signed_rank_exact_p(ranks: Sequence[float], w: float) -> float:
    doubled = _doubled(ranks)
    total = sum(doubled)
    # ways[s] = number of sign assignments whose positive doubled-rank sum is s
    ways = [0] * (total + 1)
    ways[0] = 1
    for d in doubled:
        for s in range(total, d - 1, -1):
            ways[s] += ways[s - d]
    w2 = int(round(2 * w))
    denom = 2 ** len(ranks)
    p_le = sum(ways[: w2 + 1]) / denom
    p_ge = sum(ways[w2:]) / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def _signed_rank_normal_p(ranks: Sequence[float], w: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    tie_term = sum(t**3 - t for t in _tie_sizes(ranks)) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    return min(1.0, 2.0 * _norm_sf(z))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Unpaired two-sided comparison of two samples (Mann-Whitney U).

    The statistic is U for sample ``a``: U = R_a - n_a(n_a+1)/2 with R_a
    the midrank sum of ``a`` in the pooled ranking. Exact null
    distribution (over group labelings) for n_a + n_b <= 20, otherwise
    the tie-corrected normal approximation.
    """
    a = list(a)
    b = list(b)
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    ranks = _midranks(a + b)
    r_a = sum(ranks[:n_a])
    u = r_a - n_a * (n_a + 1) / 2.0
    if n_a + n_b <= RANK_SUM_EXACT_MAX:
        p = _rank_sum_exact_p(ranks, n_a, r_a)
    else:
        p = _rank_sum_normal_p(ranks, n_a, n_b, u)
    return TestResult(method="rank_sum", statistic=u, p_value=p, n=(n_a, n_b))


def _rank_sum_exact_p(ranks: Sequence[float], n_a: int, r_a: float) -> float:
    doubled = _doubled(ranks)
    total = sum(doubled)
    # ways[k][s] = number of size-k subsets of the pooled doubled ranks
    # summing to s; row n_a is the null distribution of 2*R_a.
    ways = [[0] * (total + 1) for _ in range(n_a + 1)]
    ways[0][0] = 1
    for d in doubled:
        for k in range(min(n_a, len(doubled)), 0, -1):
            row, prev = ways[k], ways[k - 1]
            for s in range(total, d - 1, -1):
                if prev[s - d]:
                    row[s] += prev[s - d]
    dist = ways[n_a]
    denom = math.comb(len(doubled), n_a)
    r2 = int(round(2 * r_a))
    p_le = sum(dist[: r2 + 1]) / denom
    p_ge = sum(dist[r2:]) / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def _rank_sum_normal_p(ranks: Sequence[float], n_a: int, n_b: int, u: float) -> float:
    n = n_a + n_b
    mean = n_a * n_b / 2.0
    tie_sum = sum(t**3 - t for t in _tie_sizes(ranks))
    var = n_a * n_b / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = max(0.0, abs(u - mean) - 0.5) / math.sqrt(var)
    return min(1.0, 2.0 * _norm_sf(z))


def bh_fdr(p_values: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up q-values, aligned with the input order.

    q_(i) = min over j >= i of p_(j) * m / j, capped at 1. Inputs must
    lie in (0, 1]; anything else (including NaN) raises ValueError.
    """
    m = len(p_values)
    for p in p_values:
        if not (0.0 < p <= 1.0):
            raise ValueError(f"p-value {p!r} outside (0, 1]")
    order = sorted(range(m), key=lambda i: p_values[i])
    q = [0.0] * m
    running = 1.0
    for pos in range(m - 1, -1, -1):
        idx = order[pos]
        running = min(running, p_values[idx] * m / (pos + 1))
        q[idx] = running
    return q


def apply_fdr(results: Sequence[TestResult]) -> None:
    """Fill ``q_value`` on each result, correcting across the whole list
    in its given order."""
    if not results:
        return
    for result, q in zip(results, bh_fdr([r.p_value for r in results])):
        result.q_value = q


# --- test battery over shift records ---------------------------------

COHORT_ORDER = ("top", "random")
METRICS = ("activity", "vocabulary")
COMPARISON = "top_vs_random"


@dataclass
class BatteryRow:
    community: str
    cohort: str  # "top", "random", or "top_vs_random"
    metric: str  # "activity" or "vocabulary"
    result: TestResult


def run_battery(community: str, records: Sequence) -> list[BatteryRow]:
    """Build the standard six-test battery for one community's shift
    records: signed-rank pre vs post per cohort and metric, then
    rank-sum of top-cohort shifts against random-cohort shifts.

    Rows whose test would be empty or degenerate are skipped with a
    warning; q-values are left for the caller (apply after gathering
    rows across communities).
    """
    by_cohort: dict[str, list] = {c: [] for c in COHORT_ORDER}
    for record in records:
        if record.cohort in by_cohort:
            by_cohort[record.cohort].append(record)

    rows: list[BatteryRow] = []

    def add(cohort: str, metric: str, build) -> None:
        try:
            rows.append(BatteryRow(community, cohort, metric, build()))
        except (DegenerateSampleError, ValueError) as exc:
            log.warning("%s/%s/%s: skipped (%s)", community, cohort, metric, exc)

    for cohort in COHORT_ORDER:
        recs = by_cohort[cohort]
        pairs_activity = [(r.pre_comments, r.post_comments) for r in recs]
        add(cohort, "activity", lambda p=pairs_activity: wilcoxon_signed_rank(p))
        pairs_vocab = [
            (r.r_before, r.r_after) for r in recs if r.vocab_shift is not None
        ]
        add(cohort, "vocabulary", lambda p=pairs_vocab: wilcoxon_signed_rank(p))

    top, rand = by_cohort["top"], by_cohort["random"]
    activity_a = [r.activity_shift for r in top]
    activity_b = [r.activity_shift for r in rand]
    add(COMPARISON, "activity", lambda: wilcoxon_rank_sum(activity_a, activity_b))
    vocab_a = [r.vocab_shift for r in top if r.vocab_shift is not None]
    vocab_b = [r.vocab_shift for r in rand if r.vocab_shift is not None]
    add(COMPARISON, "vocabulary", lambda: wilcoxon_rank_sum(vocab_a, vocab_b))
    return rows


BATTERY_HEADER = [
    "community",
    "cohort",
    "metric",
    "method",
    "statistic",
    "n",
    "p_value",
    "q_value",
    "significant_at_0.05",
]


def _format_n(n) -> str:
    if isinstance(n, tuple):
        return f"{n[0]}+{n[1]}"
    return str(n)


def _parse_n(text: str):
    if "+" in text:
        a, _, b = text.partition("+")
        return (int(a), int(b))
    return int(text)


def write_battery_csv(rows: Sequence[BatteryRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BATTERY_HEADER)
        for row in rows:
            res = row.result
            q = res.q_value
            writer.writerow(
                [
                    row.community,
                    row.cohort,
                    row.metric,
                    res.method,
                    repr(res.statistic),
                    _format_n(res.n),
                    repr(res.p_value),
                    "" if q is None else repr(q),
                    "" if q is None else str(q <= 0.05).lower(),
                ]
            )


def load_battery_csv(path: str | Path) -> list[BatteryRow]:
    rows: list[BatteryRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != BATTERY_HEADER:
            raise ValueError(f"{path}: unexpected battery header {header!r}")
        for rec in reader:
            result = TestResult(
                method=rec[3],
                statistic=float(rec[4]),
                p_value=float(rec[6]),
                n=_parse_n(rec[5]),
                q_value=float(rec[7]) if rec[7] else None,
            )
            rows.append(BatteryRow(rec[0], rec[1], rec[2], result))
    return rows
