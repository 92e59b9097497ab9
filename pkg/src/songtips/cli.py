"""Command-line driver: ``songtips <command> [options]``.

Staged commands share a work directory so any stage can be rerun from the
files the previous one left behind::

    songtips segment      --config cfg.json --work W   # W/sentences.jsonl
    songtips rank         --config cfg.json --work W   # W/scores.jsonl
    songtips train-topics --config cfg.json --work W   # W/topics.json
    songtips select       --config cfg.json --work W   # W/selections.*
    songtips evaluate     --config cfg.json --work W   # W/report.*

``run`` does all of it in one go. Exit codes: 0 success, 1 usage error,
2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, content_rank, pipeline, segmenter, style_rank, toy
from .corpus import (
    CorpusError,
    IngestReport,
    load_reviews,
    read_sentences,
    write_reviews,
    write_sentences,
    write_songs,
)
from .linear import NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

NUMERICAL = (NumericalError, np.linalg.LinAlgError, FloatingPointError, OverflowError, ZeroDivisionError)

log = logging.getLogger("songtips")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _k_list(text):
    try:
        ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return ks


def _config_flags(p):
    p.add_argument("--config", help="JSON config file (relative paths resolve against its directory)")
    p.add_argument("--reviews", help="review JSONL (overrides config)")
    p.add_argument("--songs", help="song metadata JSONL")
    p.add_argument("--labeled", help="labeled sentence JSONL")
    p.add_argument("--k", type=_k_list, help="comma-separated cutoffs, e.g. 1,3,5,10")
    p.add_argument("--alpha", type=float, help="style weight in the fused score")
    p.add_argument("--base", type=float, help="log base m of the approval copy count")
    p.add_argument("--topics", type=int, help="PLSA topic count t")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="songs processed concurrently")
    p.add_argument("--scores", help="external style-score JSONL (selects the external scorer)")
    p.add_argument("--scorer", choices=pipeline.SCORERS)
    p.add_argument("--style-model", dest="style_model")
    p.add_argument("--punct-model", dest="punct_model")
    p.add_argument("--punct-labels", dest="punct_labels")
    p.add_argument("--strict", action="store_true", default=None, help="abort on any malformed record")


def _work_flag(p):
    p.add_argument("--work", required=True, help="work directory holding stage artifacts")


def build_parser():
    parser = _Parser(prog="songtips", description="Extract diverse tip sentences from song reviews.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("make-toy", help="write a synthetic corpus and a config for it")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-songs", type=int, default=12)
    p.add_argument("--reviews-per-song", type=int, default=60)

    p = sub.add_parser("preprocess", help="validate and normalize a review file")
    _config_flags(p)
    p.add_argument("--out", required=True, help="normalized review JSONL")

    p = sub.add_parser("train-punct", help="train the punctuation classifier on punctuated lines")
    p.add_argument("lines", help="text file, one punctuated line per row")
    p.add_argument("--out", required=True)
    p.add_argument("--holdout", type=float, default=0.2, help="share of lines held out for accuracy")
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-style", help="train the stylistic tip classifier")
    p.add_argument("labeled")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)

    for name, text in [("segment", "correct punctuation and split reviews into sentences"),
                       ("rank", "content and style scores per candidate sentence"),
                       ("train-topics", "per-song PLSA topic vectors of the candidates"),
                       ("select", "fuse scores and pick tips with greedy MAP"),
                       ("evaluate", "precision and diversity of the selections")]:
        p = sub.add_parser(name, help=text)
        _config_flags(p)
        _work_flag(p)

    p = sub.add_parser("run", help="all stages end to end")
    _config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-intermediates", action="store_true")

    p = sub.add_parser("sweep", help="one full run per parameter value")
    _config_flags(p)
    p.add_argument("--param", required=True, choices=sorted(set(pipeline.SWEEPABLE)))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True)
    return parser


def load_config(args):
    overrides = {key: getattr(args, key, None) for key in (
        "reviews", "songs", "labeled", "k", "alpha", "base", "topics", "seed", "jobs", "scores", "scorer",
        "style_model", "punct_model", "punct_labels", "strict")}
    if overrides["scores"] and not overrides["scorer"]:
        overrides["scorer"] = "external"
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        if args.config:
            cfg = pipeline.PipelineConfig.from_file(args.config, **overrides)
        else:
            cfg = pipeline.PipelineConfig(**overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None
    if not cfg.reviews:
        raise UsageError("no review file: pass --reviews or set it in the config")
    return cfg


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _read_jsonl(path):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"missing stage artifact {path}; run the earlier stage first")
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


# -- commands ---------------------------------------------------------------

def cmd_make_toy(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = toy.make_toy_corpus(args.seed, args.n_songs, args.reviews_per_song)
    write_reviews(out / "reviews.jsonl", corpus.reviews)
    write_songs(out / "songs.jsonl", corpus.songs)
    style_rank.write_labeled(out / "labeled.jsonl", corpus.labeled)
    (out / "punct_lines.txt").write_text("\n".join(corpus.punct_lines) + "\n", encoding="utf-8")
    per_song = min(50, args.reviews_per_song)
    _write_json(out / "config.json", {
        "reviews": "reviews.jsonl", "songs": "songs.jsonl", "labeled": "labeled.jsonl", "seed": args.seed,
        "split_test_songs": min(9, args.n_songs), "split_per_song": per_song,
    })
    print(f"wrote toy corpus ({len(corpus.reviews)} reviews, {len(corpus.labeled)} labeled) to {out}")


def cmd_preprocess(args):
    cfg = load_config(args)
    report = IngestReport()
    reviews = load_reviews(cfg.reviews, strict=cfg.strict, report=report)
    write_reviews(args.out, reviews)
    print(json.dumps(report.to_dict(), sort_keys=True))
    for problem in report.problems:
        log.warning("%s", problem)


def cmd_train_punct(args):
    lines = [ln for ln in Path(args.lines).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise CorpusError(f"no lines in {args.lines}")
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(lines))
    n_hold = int(round(args.holdout * len(lines)))
    held = [lines[i] for i in sorted(order[:n_hold])]
    train = [lines[i] for i in sorted(order[n_hold:])]
    model = segmenter.train_punct(train, window=args.window, epochs=args.epochs, seed=args.seed)
    model.save(args.out)
    if held:
        print(f"held-out accuracy {segmenter.evaluate_punct(model, held):.4f} on {len(held)} lines")


def cmd_train_style(args):
    data = style_rank.load_labeled(args.labeled)
    model = style_rank.train_style(data, l2=args.l2, epochs=args.epochs, seed=args.seed)
    model.save(args.out)
    print(f"trained on {len(data)} sentences; final loss {model.losses[-1]:.6f}")


def cmd_segment(args):
    cfg = load_config(args)
    work = Path(args.work)
    work.mkdir(parents=True, exist_ok=True)
    ingest, sentences = pipeline.ingest_and_segment(cfg)
    write_sentences(work / "sentences.jsonl", sentences)
    _write_json(work / "ingest_report.json", ingest.to_dict())
    print(f"{len(sentences)} sentences from {ingest.loaded} reviews")


def _prepared(cfg, work):
    return pipeline.prepare(cfg, read_sentences(Path(work) / "sentences.jsonl"))


def cmd_rank(args):
    cfg = load_config(args)
    work = Path(args.work)
    prep = _prepared(cfg, work)
    records = []
    for sid, sents in prep.by_song.items():
        content = pipeline._stage("rank", sid)(content_rank.content_scores)(sents, cfg.rank_config)
        cands = [s for s in sents if s.sentence_id in content]
        style = pipeline._stage("style", sid)(pipeline.style_scores_for)(cands, cfg, prep.model, prep.external)
        records.extend({"song_id": sid, "sentence_id": s.sentence_id, "content": content[s.sentence_id],
                        "style": style[s.sentence_id]} for s in cands)
    (work / "scores.jsonl").write_text(pipeline._jsonl(records), encoding="utf-8")
    if prep.model is not None:
        prep.model.save(work / "style_model.json")
    if prep.split is not None:
        _write_json(work / "split.json", prep.split.to_dict())
    print(f"scored {len(records)} candidates in {len(prep.by_song)} songs")


def cmd_train_topics(args):
    cfg = load_config(args)
    work = Path(args.work)
    by_id = {s.sentence_id: s for s in read_sentences(work / "sentences.jsonl")}
    ids = {}
    for rec in _read_jsonl(work / "scores.jsonl"):
        ids.setdefault(rec["song_id"], []).append(rec["sentence_id"])
    topics = {}
    for sid in sorted(ids):
        docs = [by_id[i].tokens for i in ids[sid]]
        vectors = pipeline._stage("topics", sid)(pipeline.song_topics)(docs, cfg)
        topics[sid] = {"ids": ids[sid], "vectors": vectors.tolist()}
    (work / "topics.json").write_text(json.dumps(topics, sort_keys=True) + "\n", encoding="utf-8")
    print(f"topic vectors for {len(topics)} songs")


def _select(cfg, work):
    return pipeline._stage("select")(pipeline.select_from_intermediates)(work, cfg)


def cmd_select(args):
    cfg = load_config(args)
    work = Path(args.work)
    result = _select(cfg, work)
    recs = pipeline.selection_records(result)
    (work / "selections.jsonl").write_text(pipeline._jsonl(recs), encoding="utf-8")
    (work / "selections.txt").write_text(pipeline.selection_text(recs), encoding="utf-8")
    print(f"selected {len(recs)} tips for {len(result.songs)} songs")


def cmd_evaluate(args):
    cfg = load_config(args)
    work = Path(args.work)
    result = _select(cfg, work)
    labeled = style_rank.load_labeled(cfg.labeled) if cfg.labeled else None
    labels = pipeline.candidate_labels(result.songs, labeled, cfg)
    report = pipeline.evaluate_results(result.songs, labels, cfg)
    split = work / "split.json"
    if split.is_file():
        report.split = json.loads(split.read_text(encoding="utf-8"))
    (work / "report.json").write_text(report.dumps(), encoding="utf-8")
    (work / "report.txt").write_text(report.table(), encoding="utf-8")
    sys.stdout.write(report.table())


def cmd_run(args):
    cfg = load_config(args)
    result = pipeline.run_pipeline(cfg, args.out, keep_intermediates=args.keep_intermediates)
    sys.stdout.write(result.report.table())


def cmd_sweep(args):
    cfg = load_config(args)
    values = [v for v in args.values.split(",") if v.strip()]
    try:
        [float(v) for v in values]
    except ValueError:
        raise UsageError(f"non-numeric sweep value in {args.values!r}") from None
    if not values:
        raise UsageError("empty value list")
    out = Path(args.out)
    reports = pipeline.sweep(cfg, args.param, values, out)
    rows = pipeline.sweep_table(args.param, reports)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.jsonl").write_text(pipeline._jsonl(rows), encoding="utf-8")
    for v, rep in reports:
        sys.stdout.write(f"# {args.param}={v}\n{rep.table()}")


COMMANDS = {
    "make-toy": cmd_make_toy, "preprocess": cmd_preprocess, "train-punct": cmd_train_punct,
    "train-style": cmd_train_style, "segment": cmd_segment, "rank": cmd_rank,
    "train-topics": cmd_train_topics, "select": cmd_select, "evaluate": cmd_evaluate,
    "run": cmd_run, "sweep": cmd_sweep,
}


def exit_code(exc):
    """Map an exception to the documented exit code."""
    if isinstance(exc, pipeline.StageError):
        exc = exc.cause
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, NUMERICAL):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"songtips: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except (UsageError, pipeline.StageError, CorpusError, ValueError, KeyError, OSError, *NUMERICAL) as exc:
        print(f"songtips: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
