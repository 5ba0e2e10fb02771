"""Command-line pipeline driver.

Typical flow against a synthetic corpus:

    divlens --out-dir run synth --users 500
    divlens --out-dir run ingest --archive run/community.ndjson
    divlens --out-dir run --remove-top 500 vocab --method jsd \\
        --community run/community.ndjson --baseline run/baseline.ndjson
    divlens --out-dir run cohorts --community run/community.ndjson
    divlens --out-dir run shifts --users run/users.ndjson \\
        --vocab run/vocab_jsd.csv --cohorts run/cohorts.csv --ban-time 1600000000
    divlens --out-dir run stats --shifts synthcomm=run/shifts.csv
    divlens --out-dir run summarize --shifts synthcomm=run/shifts.csv \\
        --tests run/tests.csv --omissions synthcomm=run/shift_omissions.csv

Every subcommand appends a step to run_manifest.json in the output
directory (versions, seeds, parameters; no timestamps), so identical
invocations rebuild identical trees.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, cohort, corpus, deobfuscate, divergence, ingest, report, sage, shift, stats, synth

log = logging.getLogger("divlens")


def _parse_id(text: str) -> int:
    return ingest.decode_base36(text.lower())


def _parse_named(pairs: list[str]) -> list[tuple[str, str]]:
    """NAME=PATH arguments; a bare PATH uses its stem as the name."""
    out = []
    for item in pairs:
        name, sep, path = item.partition("=")
        if sep:
            out.append((name, path))
        else:
            out.append((Path(item).stem, item))
    return out


def _out_path(args, name: str) -> Path:
    path = Path(name)
    return path if path.is_absolute() else Path(args.out_dir) / name


def _window(args, ban_time: int) -> ingest.TimeWindow:
    return ingest.TimeWindow(
        ban_time=ban_time,
        days_before=args.window_days,
        days_after=args.window_days,
        corpus_days_before=args.corpus_days,
    )


def _manifest(args, command: str, parameters: dict) -> None:
    report.update_run_manifest(args.out_dir, command, args.seed, parameters)


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        shared_vocab_size=args.shared_vocab,
        planted_vocab_size=args.planted,
        planted_rate=args.planted_rate,
        n_users=args.users,
        user_activity_distribution=args.activity_exponent,
        ban_response={
            "top": synth.BanResponse(args.top_activity_mult, args.top_vocab_mult),
            "random": synth.BanResponse(args.random_activity_mult, args.random_vocab_mult),
        },
        seed=args.seed,
        community_name=args.name,
        mean_words_per_comment=args.mean_words,
        activity_floor=args.activity_floor,
        activity_cap=args.activity_cap,
        n_top=args.n_top,
        n_bots=args.bots,
        baseline_tokens=args.baseline_tokens,
        ban_time=args.ban_time,
        days_before=args.window_days,
        days_after=args.window_days,
        corpus_days=args.corpus_days,
    )
    result = synth.generate(spec, args.out_dir)
    print(f"community archive: {result.community_archive}")
    print(f"baseline archive:  {result.baseline_archive}")
    print(f"platform archive:  {result.users_archive}")
    print(f"ground truth:      {result.truth_path}")
    _manifest(
        args,
        "synth",
        {
            "shared_vocab": args.shared_vocab,
            "planted": args.planted,
            "planted_rate": args.planted_rate,
            "users": args.users,
            "activity_exponent": args.activity_exponent,
            "activity_floor": args.activity_floor,
            "mean_words": args.mean_words,
            "baseline_tokens": args.baseline_tokens,
            "ban_time": args.ban_time,
            "name": args.name,
            "top_activity_mult": args.top_activity_mult,
            "top_vocab_mult": args.top_vocab_mult,
            "random_activity_mult": args.random_activity_mult,
            "random_vocab_mult": args.random_vocab_mult,
            "bots": args.bots,
        },
    )
    return 0


def cmd_ingest(args) -> int:
    comments, parser = ingest.read_archive(args.archive)
    stem = Path(args.archive).stem
    payload = {
        "archive": Path(args.archive).name,
        "parsed": parser.parsed,
        "malformed": parser.malformed,
        "submissions": parser.submissions,
    }
    print(f"parsed {parser.parsed} comments "
          f"({parser.malformed} malformed, {parser.submissions} submissions skipped)")
    if args.ban_time is not None:
        window = _window(args, args.ban_time)
        pre, post = ingest.window_split(comments, window)
        pre_path = _out_path(args, f"{stem}.pre.ndjson")
        post_path = _out_path(args, f"{stem}.post.ndjson")
        ingest.write_archive(pre, pre_path)
        ingest.write_archive(post, post_path)
        payload["pre_window"] = len(pre)
        payload["post_window"] = len(post)
        print(f"window split: {len(pre)} pre, {len(post)} post")
    report_path = _out_path(args, f"{stem}.ingest.json")
    report_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _manifest(args, "ingest", {"archive": args.archive, "ban_time": args.ban_time})
    return 0


def cmd_sample_baseline(args) -> int:
    first = _parse_id(args.first_id)
    last = _parse_id(args.last_id)
    ids = ingest.sample_id_range(first, last, args.n, args.seed)
    ids_path = _out_path(args, args.ids_out)
    ids_path.write_text(
        "".join(f"{ingest.encode_base36(i)}\n" for i in ids), encoding="utf-8"
    )
    print(f"sampled {len(ids)} ids into {ids_path}")
    if args.archive:
        wanted = set(ids)
        kept = []
        comments, _ = ingest.read_archive(args.archive)
        for comment in comments:
            if comment.id_int in wanted:
                kept.append(comment)
        out = _out_path(args, args.out)
        ingest.write_archive(kept, out)
        print(f"matched {len(kept)} of {len(ids)} sampled ids into {out}")
    _manifest(
        args,
        "sample-baseline",
        {"first_id": args.first_id, "last_id": args.last_id, "n": args.n,
         "archive": args.archive or ""},
    )
    return 0


def _archive_table(path: str) -> tuple[corpus.FrequencyTable, list[ingest.Comment]]:
    comments, _ = ingest.read_archive(path)
    return corpus.table_from_comments(comments), comments


def cmd_vocab(args) -> int:
    community_table, _ = _archive_table(args.community)
    baseline_table, baseline_comments = _archive_table(args.baseline)
    name = args.name or Path(args.community).stem
    if args.method == "jsd":
        community_reduced, baseline_reduced = corpus.remove_top_k(
            community_table, baseline_table, args.remove_top
        )
        contributions = divergence.jsd_contributions(baseline_reduced, community_reduced)
        vocab = divergence.top_k_ingroup(contributions, args.top_k, community=name)
        total = divergence.total_jsd(contributions)
        print(f"total divergence {total:.6f} bits over {len(contributions)} words")
    else:
        if args.first_id and args.last_id:
            first, last = _parse_id(args.first_id), _parse_id(args.last_id)
        else:
            if not baseline_comments:
                raise ValueError("empty baseline archive")
            ids = [c.id_int for c in baseline_comments]
            first, last = min(ids), max(ids)
        population = sage.estimate_population_baseline(
            baseline_table, first, last, community_table
        )
        fit = sage.fit_sage(community_table, population, seed=args.seed)
        vocab = sage.sage_top_k(fit, args.top_k, community=name)
        print(
            f"fit converged after {fit.iterations} iterations "
            f"(lambda {fit.regularization:.3e})"
        )
        if args.fit_out:
            sage.save_fit(fit, _out_path(args, args.fit_out))
    out = _out_path(args, args.out or f"vocab_{args.method}.csv")
    divergence.save_vocabulary(vocab, out)
    print(f"wrote {len(vocab)} vocabulary words to {out}")
    _manifest(
        args,
        "vocab",
        {"method": args.method, "community": args.community, "baseline": args.baseline,
         "top_k": args.top_k, "remove_top": args.remove_top, "name": name},
    )
    return 0


def cmd_cohorts(args) -> int:
    comments, _ = ingest.read_archive(args.community)
    bots = cohort.load_bot_list(args.bots) if args.bots else set()
    ranked = cohort.rank_users(comments)
    selection = cohort.select_cohorts(
        ranked, bots, n_top=args.n_top, n_random=args.n_random, seed=args.seed
    )
    counts = {r.username: r.preban_comments for r in ranked}
    out = _out_path(args, args.out)
    cohort.write_cohorts_csv(selection, counts, out)
    omissions_path = _out_path(args, args.omissions_out)
    cohort.write_omissions_csv(selection.omitted, omissions_path)
    print(
        f"selected {len(selection.top)} top and {len(selection.random)} random users "
        f"({len(selection.omitted)} ineligible) into {out}"
    )
    _manifest(
        args,
        "cohorts",
        {"community": args.community, "bots": args.bots or "",
         "n_top": args.n_top, "n_random": args.n_random},
    )
    return 0


def cmd_shifts(args) -> int:
    rows = cohort.load_cohorts_csv(args.cohorts)
    vocab = divergence.load_vocabulary(args.vocab)
    comments, _ = ingest.read_archive(args.users)
    window = _window(args, args.ban_time)
    usernames = [row[0] for row in rows]
    stats_by_user = shift.collect_user_stats(comments, usernames, window, vocab)
    records = []
    omitted: list[tuple[str, str, str, str]] = []
    for username, cohort_name, _count in rows:
        user_stats = stats_by_user[username]
        reason = cohort.apply_omission_rules(user_stats)
        if reason is None:
            records.append(shift.build_shift_record(user_stats, cohort_name))
        else:
            secondary = cohort.secondary_omission_reason(user_stats, reason)
            omitted.append((username, cohort_name, reason, secondary))
    out = _out_path(args, args.out)
    shift.write_shifts_csv(records, out)
    omissions_path = _out_path(args, args.omissions_out)
    cohort.write_shift_omissions_csv(omitted, omissions_path)
    print(f"kept {len(records)} users, omitted {len(omitted)}, into {out}")
    _manifest(
        args,
        "shifts",
        {"users": args.users, "vocab": args.vocab, "cohorts": args.cohorts,
         "ban_time": args.ban_time},
    )
    return 0


def cmd_stats(args) -> int:
    rows: list[stats.BatteryRow] = []
    named = _parse_named(args.shifts)
    for name, path in named:
        records = shift.load_shifts_csv(path)
        rows.extend(stats.run_battery(name, records))
    results = [row.result for row in rows]
    stats.apply_fdr(results)
    out = _out_path(args, args.out)
    stats.write_battery_csv(rows, out)
    significant = sum(1 for r in results if r.q_value is not None and r.q_value <= 0.05)
    print(f"{len(rows)} tests, {significant} significant at q <= 0.05, into {out}")
    _manifest(args, "stats", {"shifts": {name: str(path) for name, path in named}})
    return 0


def cmd_summarize(args) -> int:
    config = report.load_config(args.config) if args.config else None
    tests = stats.load_battery_csv(args.tests) if args.tests else []
    omissions_by_name: dict[str, list[tuple[str, str, str, str]]] = {}
    for name, path in _parse_named(args.omissions or []):
        omissions_by_name[name] = cohort.load_shift_omissions_csv(path)
    summaries = []
    named = _parse_named(args.shifts)
    for name, path in named:
        records = shift.load_shifts_csv(path)
        category = ""
        if config is not None:
            try:
                category = config.community(name).category
            except KeyError:
                pass
        omissions = [
            (username, cohort_name, reason)
            for username, cohort_name, reason, _ in omissions_by_name.get(name, [])
        ]
        summaries.append(
            report.summarize(
                records,
                [t for t in tests if t.community == name],
                community=name,
                category=category,
                omissions=omissions,
            )
        )
    out = _out_path(args, args.out)
    report.write_summary_csv(summaries, out)
    for summary in summaries:
        zero_post, zero_vocab = summary.omission_pair()
        print(f"{summary.community}: omitted ({zero_post}, {zero_vocab})")
    print(f"wrote {len(summaries)} community summaries to {out}")
    _manifest(
        args,
        "summarize",
        {"shifts": {name: str(path) for name, path in named}, "tests": args.tests or ""},
    )
    return 0


def cmd_overlap(args) -> int:
    named = _parse_named(args.vocab)
    vocabularies = [divergence.load_vocabulary(path, community=name) for name, path in named]
    matrix = report.overlap_matrix(vocabularies)
    report.write_overlap_matrix_csv(matrix, _out_path(args, "overlap_matrix.csv"))
    report.write_overlap_pairs_csv(matrix, _out_path(args, "overlap_pairs.csv"))
    report.write_top_matches_csv(matrix, _out_path(args, "overlap_top_matches.csv"))
    print(f"overlap matrix over {len(vocabularies)} communities written")
    _manifest(args, "overlap", {"vocab": {name: str(path) for name, path in named}})
    return 0


def cmd_deobfuscate(args) -> int:
    obscured = deobfuscate.load_obscured(args.obscured)
    candidates = deobfuscate.load_candidates(args.candidates)
    matches = deobfuscate.match_obscured(obscured, candidates)
    out = _out_path(args, args.out)
    deobfuscate.write_matches_csv(obscured, matches, out)
    matched = sum(1 for m in matches if m)
    print(f"matched {matched} of {len(obscured)} obscured names into {out}")
    _manifest(args, "deobfuscate", {"obscured": args.obscured, "candidates": args.candidates})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="divlens",
        description="Community vocabulary divergence and ban-response analytics.",
    )
    parser.add_argument("--version", action="version", version=f"divlens {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--config", default=None, help="TOML run configuration")
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument("--top-k", type=int, default=100, help="vocabulary size")
    parser.add_argument(
        "--remove-top", type=int, default=10000,
        help="baseline words to strip before divergence ranking",
    )
    parser.add_argument("--window-days", type=int, default=60, help="pre/post window length")
    parser.add_argument(
        "--corpus-days", type=int, default=182,
        help="pre-ban span used for corpora and user ranking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic platform with ground truth")
    p.add_argument("--shared-vocab", type=int, default=5000)
    p.add_argument("--planted", type=int, default=50)
    p.add_argument("--planted-rate", type=float, default=0.002)
    p.add_argument("--users", type=int, default=2000)
    p.add_argument("--activity-exponent", type=float, default=2.5)
    p.add_argument("--activity-floor", type=float, default=0.9)
    p.add_argument("--activity-cap", type=float, default=400.0)
    p.add_argument("--mean-words", type=float, default=12.0)
    p.add_argument("--baseline-tokens", type=int, default=2_000_000)
    p.add_argument("--ban-time", type=int, default=1_600_000_000)
    p.add_argument("--n-top", type=int, default=100)
    p.add_argument("--bots", type=int, default=0)
    p.add_argument("--name", default="synthcomm")
    p.add_argument("--top-activity-mult", type=float, default=1.0)
    p.add_argument("--top-vocab-mult", type=float, default=1.0)
    p.add_argument("--random-activity-mult", type=float, default=1.0)
    p.add_argument("--random-vocab-mult", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse and validate an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--ban-time", type=int, default=None,
                   help="also split the archive into pre/post windows")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sample-baseline", help="uniform comment-id sample")
    p.add_argument("--first-id", required=True, help="base-36 id")
    p.add_argument("--last-id", required=True, help="base-36 id")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--archive", default=None, help="archive to filter by sampled ids")
    p.add_argument("--ids-out", default="sampled_ids.txt")
    p.add_argument("--out", default="baseline_sample.ndjson")
    p.set_defaults(func=cmd_sample_baseline)

    p = sub.add_parser("vocab", help="build the in-group vocabulary")
    p.add_argument("--method", choices=("jsd", "sage"), default="jsd")
    p.add_argument("--community", required=True, help="community archive")
    p.add_argument("--baseline", required=True, help="baseline archive")
    p.add_argument("--name", default=None, help="community label for outputs")
    p.add_argument("--first-id", default=None, help="baseline span start (base-36)")
    p.add_argument("--last-id", default=None, help="baseline span end (base-36)")
    p.add_argument("--fit-out", default=None, help="also write nonzero deviations CSV")
    p.add_argument("--out", default=None, help="vocabulary CSV name")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("cohorts", help="rank users and select cohorts")
    p.add_argument("--community", required=True, help="community archive")
    p.add_argument("--bots", default=None, help="bot username list")
    p.add_argument("--n-top", type=int, default=100)
    p.add_argument("--n-random", type=int, default=1000)
    p.add_argument("--out", default="cohorts.csv")
    p.add_argument("--omissions-out", default="cohort_omissions.csv")
    p.set_defaults(func=cmd_cohorts)

    p = sub.add_parser("shifts", help="per-user pre/post shift records")
    p.add_argument("--users", required=True, help="platform archive for cohort users")
    p.add_argument("--vocab", required=True, help="vocabulary CSV")
    p.add_argument("--cohorts", required=True, help="cohorts CSV")
    p.add_argument("--ban-time", type=int, required=True)
    p.add_argument("--out", default="shifts.csv")
    p.add_argument("--omissions-out", default="shift_omissions.csv")
    p.set_defaults(func=cmd_shifts)

    p = sub.add_parser("stats", help="test battery with FDR correction")
    p.add_argument("--shifts", action="append", required=True,
                   metavar="NAME=PATH", help="shift CSV per community (repeatable)")
    p.add_argument("--out", default="tests.csv")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("summarize", help="per-community medians and omissions")
    p.add_argument("--shifts", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--tests", default=None, help="battery CSV from the stats step")
    p.add_argument("--omissions", action="append", default=None, metavar="NAME=PATH")
    p.add_argument("--out", default="summary.csv")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("overlap", help="vocabulary overlap across communities")
    p.add_argument("--vocab", action="append", required=True, metavar="NAME=PATH")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("deobfuscate", help="resolve prefix+length obscured names")
    p.add_argument("--obscured", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", default="deobfuscated.csv")
    p.set_defaults(func=cmd_deobfuscate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, ingest.ArchiveError, sage.ConvergenceError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
