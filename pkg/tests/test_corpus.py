"""Tests for tokenization and frequency tables."""

from __future__ import annotations

import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divlens.corpus import (
    FrequencyTable,
    TokenizerConfig,
    build_table,
    empty_table,
    load_table,
    merge,
    remove_top_k,
    save_table,
    table_from_comments,
    tokenize,
    top_words,
)
from divlens.ingest import Comment


class TestTokenize:
    def test_lowercases_and_splits(self):
        assert tokenize("Hello, World!") == ["hello", "world"]

    def test_strips_urls_before_tokenizing(self):
        text = "look at https://example.com/a?b=c and www.example.org/x now"
        assert tokenize(text) == ["look", "at", "and", "now"]

    def test_min_length_filter(self):
        assert tokenize("a an the I x ok") == ["an", "the", "ok"]

    def test_keeps_contractions_whole(self):
        assert tokenize("don't can't it's") == ["don't", "can't", "it's"]

    def test_underscore_splits_tokens(self):
        assert tokenize("snake_case_name") == ["snake", "case", "name"]

    def test_digits_are_tokens(self):
        assert tokenize("he said 42 times in 2015") == ["he", "said", "42", "times", "in", "2015"]

    def test_unicode_words_survive(self):
        assert tokenize("naïve café") == ["naïve", "café"]

    def test_config_switches(self):
        config = TokenizerConfig(lowercase=False, strip_urls=False, min_token_length=1)
        tokens = tokenize("A https://x.io B", config)
        assert tokens == ["A", "https", "x", "io", "B"]

    def test_min_length_validation(self):
        with pytest.raises(ValueError):
            TokenizerConfig(min_token_length=0)

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_idempotent(self, text):
        once = tokenize(text)
        again = tokenize(" ".join(once))
        assert once == again


class TestFrequencyTable:
    def test_build_counts_and_total(self):
        table = build_table(["a", "b", "a", "c", "a"])
        assert table.counts == {"a": 3, "b": 1, "c": 1}
        assert table.total == 5

    def test_from_counts_drops_zeros(self):
        table = FrequencyTable.from_counts({"a": 2, "b": 0})
        assert table.counts == {"a": 2}
        assert table.total == 2

    def test_from_counts_rejects_negative(self):
        with pytest.raises(ValueError):
            FrequencyTable.from_counts({"a": -1})

    def test_rate(self):
        table = build_table(["a", "a", "b", "b"])
        assert table.rate("a") == 0.5
        assert table.rate("missing") == 0.0

    def test_rate_of_empty_table_undefined(self):
        with pytest.raises(ValueError):
            empty_table().rate("a")

    def test_membership_and_len(self):
        table = build_table(["a", "b"])
        assert "a" in table
        assert "z" not in table
        assert len(table) == 2

    def test_table_from_comments_tracks_count(self):
        comments = [
            Comment(id="a1", author="u", community="c", body="Hello world", created_utc=1),
            Comment(id="a2", author="u", community="c", body="hello again", created_utc=2),
        ]
        table = table_from_comments(comments)
        assert table.comments == 2
        assert table.counts == {"hello": 2, "world": 1, "again": 1}


class TestMerge:
    def test_worked_example(self):
        a = FrequencyTable.from_counts({"a": 2, "b": 1})
        b = FrequencyTable.from_counts({"b": 3, "c": 1})
        merged = merge(a, b)
        assert merged.counts == {"a": 2, "b": 4, "c": 1}
        assert merged.total == 7

    def test_merge_equals_single_pass_build(self):
        # Oracle: merging shard tables must equal building one table from
        # the concatenated token stream.
        rng = random.Random(42)
        words = [f"w{i}" for i in range(30)]
        shards = [
            [rng.choice(words) for _ in range(rng.randrange(0, 80))]
            for _ in range(10)
        ]
        merged = empty_table()
        for shard in shards:
            merged = merge(merged, build_table(shard))
        combined = build_table([t for shard in shards for t in shard])
        assert merged.counts == combined.counts
        assert merged.total == combined.total

    def test_comment_counts_add(self):
        a = FrequencyTable.from_counts({"a": 1}, comments=3)
        b = FrequencyTable.from_counts({"b": 1}, comments=4)
        assert merge(a, b).comments == 7

    tables = st.dictionaries(
        st.text(alphabet="abcdef", min_size=1, max_size=3),
        st.integers(min_value=1, max_value=50),
        max_size=8,
    )

    @given(tables, tables, tables)
    @settings(max_examples=100)
    def test_monoid_laws(self, x, y, z):
        tx, ty, tz = (FrequencyTable.from_counts(d) for d in (x, y, z))
        left = merge(merge(tx, ty), tz)
        right = merge(tx, merge(ty, tz))
        assert left.counts == right.counts and left.total == right.total
        ab, ba = merge(tx, ty), merge(ty, tx)
        assert ab.counts == ba.counts and ab.total == ba.total
        with_identity = merge(tx, empty_table())
        assert with_identity.counts == tx.counts and with_identity.total == tx.total


class TestTopWords:
    def test_tie_broken_by_word(self):
        table = FrequencyTable.from_counts({"c": 5, "a": 3, "b": 3})
        assert top_words(table, 2) == ["c", "a"]
        assert top_words(table, 3) == ["c", "a", "b"]

    def test_k_beyond_vocab(self):
        table = FrequencyTable.from_counts({"a": 1})
        assert top_words(table, 10) == ["a"]

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            top_words(empty_table(), -1)


class TestRemoveTopK:
    def test_removes_baseline_heads_from_both(self):
        baseline = FrequencyTable.from_counts({"the": 100, "and": 50, "rare": 2})
        community = FrequencyTable.from_counts({"the": 9, "slang": 4, "rare": 1})
        comm2, base2 = remove_top_k(community, baseline, k=2)
        assert comm2.counts == {"slang": 4, "rare": 1}
        assert base2.counts == {"rare": 2}
        assert comm2.total == 5 and base2.total == 2

    def test_matches_brute_force_oracle(self):
        rng = random.Random(7)
        for _ in range(20):
            base_counts = {f"w{i}": rng.randrange(1, 100) for i in range(40)}
            comm_counts = {f"w{i}": rng.randrange(1, 100) for i in rng.sample(range(60), 30)}
            k = rng.randrange(0, 45)
            baseline = FrequencyTable.from_counts(base_counts)
            community = FrequencyTable.from_counts(comm_counts)
            comm2, base2 = remove_top_k(community, baseline, k=k)
            drop = {
                w for w, _ in sorted(base_counts.items(), key=lambda i: (-i[1], i[0]))[:k]
            }
            assert base2.counts == {w: c for w, c in base_counts.items() if w not in drop}
            assert comm2.counts == {w: c for w, c in comm_counts.items() if w not in drop}

    def test_k_zero_is_identity(self):
        baseline = FrequencyTable.from_counts({"a": 3})
        community = FrequencyTable.from_counts({"a": 1, "b": 2})
        comm2, base2 = remove_top_k(community, baseline, k=0)
        assert comm2.counts == community.counts
        assert base2.counts == baseline.counts

    def test_k_at_least_vocab_empties_baseline(self):
        baseline = FrequencyTable.from_counts({"a": 3, "b": 1})
        community = FrequencyTable.from_counts({"a": 1, "c": 2})
        comm2, base2 = remove_top_k(community, baseline, k=100)
        assert len(base2) == 0
        assert comm2.counts == {"c": 2}


class TestPersistence:
    def test_roundtrip_int_counts(self, tmp_path):
        table = build_table(["b", "a", "a", "c", "c", "c"])
        path = tmp_path / "t.tsv"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.counts == table.counts
        assert loaded.total == table.total
        # a second save of the loaded table is byte-identical
        path2 = tmp_path / "t2.tsv"
        save_table(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_roundtrip_float_counts(self, tmp_path):
        table = FrequencyTable.from_counts({"a": 350.0, "b": 150.0, "c": 0.125})
        path = tmp_path / "t.tsv"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.counts == table.counts
        assert loaded.total == table.total

    def test_roundtrip_comment_count(self, tmp_path):
        table = FrequencyTable.from_counts({"a": 1}, comments=42)
        path = tmp_path / "t.tsv"
        save_table(table, path)
        assert load_table(path).comments == 42

    def test_rows_sorted_count_desc_then_word(self, tmp_path):
        table = FrequencyTable.from_counts({"b": 2, "a": 2, "c": 5})
        path = tmp_path / "t.tsv"
        save_table(table, path)
        rows = [line.split("\t")[0] for line in path.read_text().splitlines()[1:]]
        assert rows == ["c", "a", "b"]

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("a\t1\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_table(path)

    def test_total_mismatch_rejected(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("#total 5\na\t1\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_table(path)

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("#total 1\nno-tab-here\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_table(path)

    @given(
        st.dictionaries(
            st.text(alphabet="abcxyz", min_size=1, max_size=4),
            st.integers(min_value=1, max_value=10**6),
            max_size=20,
        )
    )
    @settings(max_examples=50)
    def test_roundtrip_property(self, tmp_path_factory, counts):
        table = FrequencyTable.from_counts(counts)
        path = tmp_path_factory.mktemp("tables") / "t.tsv"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.counts == table.counts
        assert loaded.total == table.total
