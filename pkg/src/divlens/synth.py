"""Synthetic platform generator with planted in-group vocabulary and a
configurable ban response, for end-to-end pipeline validation.

Design notes. Shared words follow a Zipf law so the corpus has a
natural frequency shape; planted tokens are drawn uniformly among
themselves at a fixed per-token rate and never occur in the baseline
archive, which makes recovery unambiguous. Each user's commenting is a
Poisson process whose per-window rate is Pareto-distributed across
users (heavy tail, floor for the least active), so counts in disjoint
windows are independent Poisson draws and a multiplier on the post-ban
rate is exactly a multiplier on expected activity. With all multipliers
at 1 the pre/post pairs are exchangeable, which is what makes the null
battery a fair calibration check of the whole pipeline.

Comment IDs are assigned platform-wide in timestamp order (ties broken
deterministically), so the ID span equals the number of platform
comments in the period, matching the assumption behind the
population-baseline estimator. Generation is single-threaded and
byte-deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ingest import SECONDS_PER_DAY, Comment, comment_to_json, encode_base36

log = logging.getLogger(__name__)

ID_BASE = 36**6  # first id "1000000": fixed-width 7-char base-36 ids

COHORT_TOP = "top"
COHORT_RANDOM = "random"


@dataclass(frozen=True)
class BanResponse:
    """Post-ban behavior multipliers relative to the pre-ban baseline."""

    activity_multiplier: float = 1.0
    vocab_rate_multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.activity_multiplier < 0 or self.vocab_rate_multiplier < 0:
            raise ValueError("multipliers must be non-negative")


def _default_response() -> dict[str, BanResponse]:
    return {COHORT_TOP: BanResponse(), COHORT_RANDOM: BanResponse()}


@dataclass(frozen=True)
class SynthSpec:
    """Generator knobs. Defaults are sized for a quick desk run: about
    2e5 community tokens and 2e6 baseline tokens."""

    shared_vocab_size: int = 5000
    planted_vocab_size: int = 50
    planted_rate: float = 0.002  # per-token rate of each planted word
    n_users: int = 2000
    user_activity_distribution: float = 2.5  # Pareto tail exponent, > 1
    ban_response: Mapping[str, BanResponse] = field(default_factory=_default_response)
    seed: int = 0
    community_name: str = "synthcomm"
    mean_words_per_comment: float = 12.0
    activity_floor: float = 0.9  # expected comments per window, least active user
    activity_cap: float = 400.0
    n_top: int = 100
    n_bots: int = 0
    baseline_tokens: int = 2_000_000
    ban_time: int = 1_600_000_000
    days_before: int = 60
    days_after: int = 60
    corpus_days: int = 182
    zipf_exponent: float = 1.1

    def validate(self) -> None:
        if self.shared_vocab_size < 1:
            raise ValueError("shared_vocab_size must be positive")
        if self.planted_vocab_size < 0:
            raise ValueError("planted_vocab_size must be non-negative")
        if self.planted_vocab_size and not (0.0 < self.planted_rate < 1.0):
            raise ValueError("planted_rate must lie in (0, 1)")
        if self.planted_vocab_size * self.planted_rate >= 1.0:
            raise ValueError("total planted token mass must stay below 1")
        if self.n_users < 1:
            raise ValueError("n_users must be positive")
        if self.user_activity_distribution <= 1.0:
            raise ValueError("user_activity_distribution must exceed 1")
        if self.activity_floor <= 0 or self.activity_cap < self.activity_floor:
            raise ValueError("need 0 < activity_floor <= activity_cap")
        if self.mean_words_per_comment < 1.0:
            raise ValueError("mean_words_per_comment must be at least 1")
        for cohort in (COHORT_TOP, COHORT_RANDOM):
            if cohort not in self.ban_response:
                raise ValueError(f"ban_response must cover cohort {cohort!r}")
        if self.baseline_tokens < 1:
            raise ValueError("baseline_tokens must be positive")
        if self.corpus_days < self.days_before:
            raise ValueError("corpus_days must cover the pre-ban window")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf_exponent must be positive")


@dataclass
class GroundTruth:
    community: str
    ban_time: int
    planted: list[str]
    top_users: list[str]
    users: dict[str, BanResponse]

    def save(self, path: str | Path) -> None:
        payload = {
            "community": self.community,
            "ban_time": self.ban_time,
            "planted": self.planted,
            "top_users": self.top_users,
            "users": {
                u: {
                    "activity_multiplier": r.activity_multiplier,
                    "vocab_rate_multiplier": r.vocab_rate_multiplier,
                }
                for u, r in self.users.items()
            },
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            community=payload["community"],
            ban_time=payload["ban_time"],
            planted=list(payload["planted"]),
            top_users=list(payload["top_users"]),
            users={
                u: BanResponse(r["activity_multiplier"], r["vocab_rate_multiplier"])
                for u, r in payload["users"].items()
            },
        )


@dataclass
class SynthResult:
    community_archive: Path
    baseline_archive: Path
    users_archive: Path
    truth_path: Path
    bots_path: Path | None
    truth: GroundTruth


def _zipf_probs(size: int, exponent: float) -> np.ndarray:
    p = 1.0 / np.arange(1, size + 1, dtype=float) ** exponent
    return p / p.sum()


class _TokenSampler:
    """Draws comment bodies: planted tokens at a per-comment rate, shared
    tokens from the Zipf background."""

    def __init__(self, rng, shared: Sequence[str], planted: Sequence[str], exponent: float):
        self._rng = rng
        width = max((len(w) for w in list(shared) + list(planted)), default=1)
        self._shared = np.array(shared, dtype=f"<U{width}")
        self._planted = np.array(planted, dtype=f"<U{width}") if planted else None
        self._zipf = _zipf_probs(len(shared), exponent)

    def bodies(self, token_counts: np.ndarray, planted_mass: np.ndarray) -> list[str]:
        """One body per entry of token_counts; planted_mass gives each
        comment's probability that a token is planted (0 for baseline)."""
        total = int(token_counts.sum())
        if total == 0:
            return ["" for _ in token_counts]
        per_token_mass = np.repeat(planted_mass, token_counts)
        use_planted = self._rng.random(total) < per_token_mass
        n_planted = int(use_planted.sum())
        tokens = np.empty(total, dtype=self._shared.dtype)
        if n_planted:
            picks = self._rng.integers(0, len(self._planted), size=n_planted)
            tokens[use_planted] = self._planted[picks]
        n_shared = total - n_planted
        if n_shared:
            picks = self._rng.choice(len(self._shared), size=n_shared, p=self._zipf)
            tokens[~use_planted] = self._shared[picks]
        offsets = np.concatenate(([0], np.cumsum(token_counts)))
        return [
            " ".join(tokens[offsets[i] : offsets[i + 1]])
            for i in range(len(token_counts))
        ]


def generate(spec: SynthSpec, out_dir: str | Path) -> SynthResult:
    """Write community.ndjson, baseline.ndjson, users.ndjson,
    ground_truth.json (and bots.txt when bots are requested) under
    out_dir. Byte-deterministic for a fixed spec."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    shared = [f"word{i:05d}" for i in range(spec.shared_vocab_size)]
    planted = [f"planted{i:03d}" for i in range(spec.planted_vocab_size)]
    sampler = _TokenSampler(rng, shared, planted, spec.zipf_exponent)
    planted_mass = spec.planted_vocab_size * spec.planted_rate

    user_width = max(4, len(str(spec.n_users - 1)))
    usernames = [f"user{i:0{user_width}d}" for i in range(spec.n_users)]
    tail = spec.user_activity_distribution - 1.0
    window_rate = np.minimum(
        spec.activity_floor * (1.0 + rng.pareto(tail, size=spec.n_users)),
        spec.activity_cap,
    )

    corpus_start = spec.ban_time - spec.corpus_days * SECONDS_PER_DAY
    post_end = spec.ban_time + spec.days_after * SECONDS_PER_DAY
    windows_in_corpus = spec.corpus_days / spec.days_before

    # Pre-ban comment counts determine the true top cohort.
    pre_counts = rng.poisson(window_rate * windows_in_corpus)
    order = sorted(range(spec.n_users), key=lambda i: (-pre_counts[i], usernames[i]))
    top_set = set(order[: spec.n_top])
    responses = [
        spec.ban_response[COHORT_TOP if i in top_set else COHORT_RANDOM]
        for i in range(spec.n_users)
    ]
    post_counts = rng.poisson(
        window_rate * np.array([r.activity_multiplier for r in responses])
    )

    # Events are (ts, stream, seq, author, subreddit, body-placeholder).
    # stream 0 = community pre-ban, 1 = bots, 2 = baseline, 3 = post-ban.
    events: list[list] = []

    def add_events(stream: int, author: str, stamps: np.ndarray, sub: str) -> None:
        for ts in stamps:
            events.append([int(ts), stream, len(events), author, sub, ""])

    pre_slices: list[tuple[int, int]] = []
    for i in range(spec.n_users):
        stamps = np.sort(rng.integers(corpus_start, spec.ban_time, size=int(pre_counts[i])))
        start = len(events)
        add_events(0, usernames[i], stamps, spec.community_name)
        pre_slices.append((start, len(events)))

    bot_names = [f"bot{i:02d}" for i in range(spec.n_bots)]
    for name in bot_names:
        n = int(rng.poisson(spec.activity_cap * windows_in_corpus))
        stamps = np.sort(rng.integers(corpus_start, spec.ban_time, size=n))
        add_events(1, name, stamps, spec.community_name)

    post_slices: list[tuple[int, int]] = []
    offsite = [f"offsite{i:02d}" for i in range(10)]
    for i in range(spec.n_users):
        n = int(post_counts[i])
        stamps = np.sort(rng.integers(spec.ban_time, post_end, size=n))
        subs = rng.integers(0, len(offsite), size=n)
        start = len(events)
        for ts, s in zip(stamps, subs):
            events.append([int(ts), 3, len(events), usernames[i], offsite[int(s)], ""])
        post_slices.append((start, len(events)))

    n_baseline = max(1, int(round(spec.baseline_tokens / spec.mean_words_per_comment)))
    baseline_start = len(events)
    base_stamps = np.sort(rng.integers(corpus_start, spec.ban_time, size=n_baseline))
    base_authors = rng.integers(0, max(50, n_baseline // 40), size=n_baseline)
    base_subs = rng.integers(0, 20, size=n_baseline)
    for ts, a, s in zip(base_stamps, base_authors, base_subs):
        events.append([int(ts), 2, len(events), f"buser{int(a):05d}", f"sub{int(s):02d}", ""])

    # Bodies, drawn stream by stream in a fixed order.
    def fill_bodies(indices: list[int], mass: np.ndarray) -> None:
        counts = 1 + rng.poisson(spec.mean_words_per_comment - 1.0, size=len(indices))
        for idx, body in zip(indices, sampler.bodies(counts, mass)):
            events[idx][5] = body

    pre_indices = [i for a, b in pre_slices for i in range(a, b)]
    fill_bodies(pre_indices, np.full(len(pre_indices), planted_mass))

    bot_indices = [i for i in range(len(events)) if events[i][1] == 1]
    fill_bodies(bot_indices, np.zeros(len(bot_indices)))

    post_indices = []
    post_mass = []
    for i in range(spec.n_users):
        a, b = post_slices[i]
        mult = responses[i].vocab_rate_multiplier
        for idx in range(a, b):
            post_indices.append(idx)
            post_mass.append(min(planted_mass * mult, 0.95))
    fill_bodies(post_indices, np.array(post_mass))

    baseline_indices = list(range(baseline_start, len(events)))
    fill_bodies(baseline_indices, np.zeros(len(baseline_indices)))

    # Platform-wide id assignment in timestamp order.
    id_order = sorted(range(len(events)), key=lambda i: (events[i][0], events[i][2]))
    ids = [""] * len(events)
    for position, event_idx in enumerate(id_order):
        ids[event_idx] = encode_base36(ID_BASE + position)

    def to_comment(idx: int) -> Comment:
        ev = events[idx]
        return Comment(
            id=ids[idx], author=ev[3], community=ev[4], body=ev[5], created_utc=ev[0]
        )

    def write_stream(path: Path, indices: list[int]) -> None:
        ordered = sorted(indices, key=lambda i: (events[i][0], events[i][2]))
        with open(path, "w", encoding="utf-8") as fh:
            for idx in ordered:
                fh.write(comment_to_json(to_comment(idx)))
                fh.write("\n")

    community_path = out / "community.ndjson"
    baseline_path = out / "baseline.ndjson"
    users_path = out / "users.ndjson"
    truth_path = out / "ground_truth.json"

    write_stream(community_path, pre_indices + bot_indices)
    write_stream(baseline_path, baseline_indices)
    pre_window_start = spec.ban_time - spec.days_before * SECONDS_PER_DAY
    users_indices = [i for i in pre_indices if events[i][0] >= pre_window_start]
    users_indices += post_indices
    write_stream(users_path, users_indices)

    truth = GroundTruth(
        community=spec.community_name,
        ban_time=spec.ban_time,
        planted=sorted(planted),
        top_users=sorted(usernames[i] for i in top_set),
        users={usernames[i]: responses[i] for i in range(spec.n_users)},
    )
    truth.save(truth_path)

    bots_path: Path | None = None
    if bot_names:
        bots_path = out / "bots.txt"
        bots_path.write_text("".join(f"{b}\n" for b in bot_names), encoding="utf-8")

    log.info(
        "generated %d community, %d baseline, %d platform comments",
        len(pre_indices) + len(bot_indices),
        len(baseline_indices),
        len(users_indices),
    )
    return SynthResult(
        community_archive=community_path,
        baseline_archive=baseline_path,
        users_archive=users_path,
        truth_path=truth_path,
        bots_path=bots_path,
        truth=truth,
    )


def recovery_score(found, truth_planted: Sequence[str]) -> float:
    """Fraction of the planted vocabulary present in ``found`` (a
    VocabularyList or any collection of words)."""
    planted = set(truth_planted)
    if not planted:
        raise ValueError("no planted vocabulary to recover")
    words = found.words() if hasattr(found, "words") else set(found)
    return len(words & planted) / len(planted)
