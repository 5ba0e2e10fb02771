"""Tests for the synthetic corpus generator."""

from __future__ import annotations

from collections import Counter

import pytest

from divlens.corpus import tokenize
from divlens.ingest import read_archive
from divlens.synth import (
    BanResponse,
    GroundTruth,
    SynthSpec,
    generate,
    recovery_score,
)


def small_spec(**overrides):
    defaults = dict(
        shared_vocab_size=80,
        planted_vocab_size=6,
        planted_rate=0.01,
        n_users=40,
        baseline_tokens=5000,
        seed=7,
    )
    defaults.update(overrides)
    return SynthSpec(**defaults)


def tree_bytes(root):
    return {
        p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


class TestDeterminism:
    def test_identical_bytes_for_same_spec(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        generate(small_spec(), a)
        generate(small_spec(), b)
        left, right = tree_bytes(a), tree_bytes(b)
        assert list(left) == list(right)
        for name in left:
            assert left[name] == right[name], name

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        generate(small_spec(seed=7), a)
        generate(small_spec(seed=8), b)
        assert tree_bytes(a) != tree_bytes(b)


def class_spec():
    return small_spec(n_bots=2, n_top=10)


@pytest.fixture(scope="module")
def result(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    return generate(class_spec(), out)


class TestArchiveShape:

    def test_ids_strictly_increase_within_each_archive(self, result):
        for path in (result.community_archive, result.baseline_archive):
            comments, parser = read_archive(path)
            assert parser.malformed == 0
            ints = [c.id_int for c in comments]
            assert all(x < y for x, y in zip(ints, ints[1:]))

    def test_ids_unique_across_archives(self, result):
        seen = set()
        for path in (result.community_archive, result.baseline_archive):
            for c, _ in [read_archive(path)]:
                for comment in c:
                    assert comment.id not in seen
                    seen.add(comment.id)

    def test_community_archive_fields(self, result):
        comments, _ = read_archive(result.community_archive)
        spec = class_spec()
        corpus_start = spec.ban_time - spec.corpus_days * 86400
        truth = result.truth
        legit = set(truth.users)
        bots = {f"bot{i:02d}" for i in range(2)}
        for comment in comments:
            assert comment.community == spec.community_name
            assert corpus_start <= comment.created_utc < spec.ban_time
            assert comment.author in legit | bots

    def test_users_archive_covers_both_windows(self, result):
        spec = class_spec()
        comments, _ = read_archive(result.users_archive)
        pre_start = spec.ban_time - spec.days_before * 86400
        post_end = spec.ban_time + spec.days_after * 86400
        stamps = [c.created_utc for c in comments]
        assert all(pre_start <= ts < post_end for ts in stamps)
        assert any(ts >= spec.ban_time for ts in stamps)
        assert any(ts < spec.ban_time for ts in stamps)

    def test_bots_file_lists_bots(self, result):
        assert result.bots_path is not None
        names = result.bots_path.read_text(encoding="utf-8").split()
        assert names == ["bot00", "bot01"]

    def test_ground_truth_roundtrip(self, result):
        loaded = GroundTruth.load(result.truth_path)
        assert loaded == result.truth

    def test_truth_shape(self, result):
        truth = result.truth
        spec = class_spec()
        assert len(truth.planted) == spec.planted_vocab_size
        assert len(truth.top_users) == spec.n_top or len(truth.top_users) == min(
            spec.n_top, spec.n_users
        )
        assert set(truth.top_users) <= set(truth.users)
        assert truth.ban_time == spec.ban_time
        assert truth.community == spec.community_name

    def test_top_users_match_archive_tally(self, result):
        # ground truth's top users are exactly the most active non-bot
        # authors of the community archive (count desc, name asc); the
        # truth file stores them name-sorted
        comments, _ = read_archive(result.community_archive)
        tally = Counter(
            c.author for c in comments if not c.author.startswith("bot")
        )
        ranked = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))
        expected = {name for name, _ in ranked[: len(result.truth.top_users)]}
        assert set(result.truth.top_users) == expected
        assert result.truth.top_users == sorted(result.truth.top_users)

    def test_planted_words_absent_from_baseline(self, result):
        planted = set(result.truth.planted)
        comments, _ = read_archive(result.baseline_archive)
        for comment in comments:
            assert not planted & set(tokenize(comment.body))

    def test_planted_words_present_in_community(self, result):
        planted = set(result.truth.planted)
        comments, _ = read_archive(result.community_archive)
        seen = set()
        for comment in comments:
            seen |= planted & set(tokenize(comment.body))
        assert seen == planted


class TestPlantedMass:
    def test_community_planted_rate_near_spec(self, tmp_path):
        spec = small_spec(n_users=150, planted_rate=0.01, planted_vocab_size=6, seed=3)
        result = generate(spec, tmp_path)
        comments, _ = read_archive(result.community_archive)
        planted = set(result.truth.planted)
        total = hits = 0
        for comment in comments:
            tokens = tokenize(comment.body)
            total += len(tokens)
            hits += sum(1 for t in tokens if t in planted)
        expected = spec.planted_rate * spec.planted_vocab_size
        assert hits / total == pytest.approx(expected, rel=0.25)


class TestBanResponse:
    def test_activity_multiplier_shapes_post_window(self, tmp_path):
        quiet = BanResponse(activity_multiplier=0.2)
        spec = small_spec(
            n_users=120,
            n_top=30,
            activity_floor=8.0,
            ban_response={"top": quiet, "random": BanResponse()},
            seed=1,
        )
        result = generate(spec, tmp_path)
        comments, _ = read_archive(result.users_archive)
        pre = Counter()
        post = Counter()
        for c in comments:
            (post if c.created_utc >= spec.ban_time else pre)[c.author] += 1
        top = set(result.truth.top_users)
        rest = set(result.truth.users) - top

        def ratio(users):
            pre_total = sum(pre[u] for u in users)
            post_total = sum(post[u] for u in users)
            return post_total / pre_total

        assert ratio(top) < 0.35
        assert 0.75 < ratio(rest) < 1.35

    def test_multiplier_validation(self):
        with pytest.raises(ValueError):
            BanResponse(activity_multiplier=-0.1)


class TestSpecValidation:
    def test_planted_mass_must_stay_below_one(self, tmp_path):
        with pytest.raises(ValueError):
            generate(small_spec(planted_vocab_size=200, planted_rate=0.01), tmp_path)

    def test_tail_exponent_bounds(self, tmp_path):
        with pytest.raises(ValueError):
            generate(small_spec(user_activity_distribution=1.0), tmp_path)

    def test_floor_cap_order(self, tmp_path):
        with pytest.raises(ValueError):
            generate(small_spec(activity_floor=10.0, activity_cap=5.0), tmp_path)

    def test_cohort_keys_required(self, tmp_path):
        with pytest.raises(ValueError):
            generate(small_spec(ban_response={"top": BanResponse()}), tmp_path)

    def test_corpus_must_cover_pre_window(self, tmp_path):
        with pytest.raises(ValueError):
            generate(small_spec(corpus_days=10, days_before=60), tmp_path)


class TestRecoveryScore:
    def test_full_and_partial(self):
        truth = ["p1", "p2", "p3", "p4"]
        assert recovery_score(["p1", "p2", "p3", "p4"], truth) == 1.0
        assert recovery_score(["p1", "p2", "x", "y"], truth) == 0.5
        assert recovery_score([], truth) == 0.0

    def test_accepts_vocabulary_list(self):
        from divlens.divergence import VocabularyList, WordContribution

        vocab = VocabularyList(
            "c", [WordContribution("p1", 0.5, 0.0, 0.1)]
        )
        assert recovery_score(vocab, ["p1", "p2"]) == 0.5

    def test_empty_truth_rejected(self):
        with pytest.raises(ValueError):
            recovery_score(["x"], [])

    def test_no_planted_words_generated_when_size_zero(self, tmp_path):
        spec = small_spec(planted_vocab_size=0)
        result = generate(spec, tmp_path)
        assert result.truth.planted == []
        with pytest.raises(ValueError):
            recovery_score(["x"], result.truth.planted)
