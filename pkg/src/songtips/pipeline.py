"""End-to-end tip extraction: ingest, segment, rank, fuse, diversify, evaluate."""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import content_rank, diversity, evaluation, segmenter, style_rank, topic_model
from .corpus import IngestReport, attach_metadata, load_reviews, load_songs, read_sentences, write_sentences
from .text import get_tokenizer

log = logging.getLogger(__name__)

SCORERS = ("builtin", "external", "none")
SWEEPABLE = {"m": "base", "base": "base", "t": "topics", "topics": "topics", "alpha": "alpha", "k": "k"}


class StageError(RuntimeError):
    """A pipeline stage failed; ``cause`` keeps the original exception."""

    def __init__(self, stage, song, cause):
        self.stage, self.song, self.cause = stage, song, cause
        where = f" (song {song})" if song is not None else ""
        super().__init__(f"stage {stage}{where}: {cause}")


@dataclass
class PipelineConfig:
    reviews: str | None = None
    songs: str | None = None
    labeled: str | None = None
    punct_model: str | None = None
    punct_labels: str | None = None
    style_model: str | None = None
    scores: str | None = None
    scorer: str = "builtin"
    # content ranking; base m = 10 and damping d = 0.85 follow the reported setup
    base: float = 10.0
    damping: float = 0.85
    tolerance: float = 1e-6
    max_iterations: int = 100
    # fusion weight alpha = 0.8 (reported setup); min-max content normalization is our choice
    alpha: float = 0.8
    normalize_content: bool = True
    # PLSA topic count t = 8 (reported setup)
    topics: int = 8
    em_iterations: int = 50
    epsilon: float = 1e-6
    ridge: float = 1e-8
    stop_eps: float = 1e-12
    k: list = field(default_factory=lambda: list(evaluation.K_VALUES))
    seed: int = 0
    tokenizer: str = "default"
    window: int = 8
    min_tokens: int = 2
    style_l2: float = 1e-3
    style_epochs: int = 300
    split_test_songs: int = 9
    split_per_song: int = 50
    split_train_ratio: float = 0.8
    strict: bool = False
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scorer not in SCORERS:
            raise ValueError(f"scorer must be one of {SCORERS}")
        if self.scorer == "external" and not self.scores:
            raise ValueError("scorer 'external' needs a scores file")
        if not self.k or any(int(k) < 1 for k in self.k):
            raise ValueError("k values must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.topics < 1:
            raise ValueError("topics must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        content_rank.RankConfig(self.base, self.damping, self.tolerance, self.max_iterations)
        get_tokenizer(self.tokenizer)

    @property
    def rank_config(self):
        return content_rank.RankConfig(self.base, self.damping, self.tolerance, self.max_iterations)

    @classmethod
    def from_file(cls, path, **overrides):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError("unknown config key(s): " + ", ".join(sorted(unknown)))
        data.update({k: v for k, v in overrides.items() if v is not None})
        base = Path(path).parent
        for key in ("reviews", "songs", "labeled", "punct_model", "punct_labels", "style_model", "scores"):
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
        return cls(**data)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class SongResult:
    song_id: str
    candidates: list  # Sentence records, kernel order
    content: dict
    style: dict
    fused: diversity.FusedScores
    topics: np.ndarray
    selection: diversity.TipSelection
    baseline: list  # top ids by fused score alone


@dataclass
class PipelineResult:
    songs: dict
    report: evaluation.EvalReport | None
    ingest: IngestReport
    split: evaluation.SplitManifest | None = None


def _stage(name, song=None):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:  # noqa: BLE001 - re-raised with stage context
                raise StageError(name, song, exc) from exc
        return inner
    return wrap


def make_predictor(config):
    if config.punct_labels:
        return segmenter.ExternalLabels.load(config.punct_labels)
    if config.punct_model:
        return segmenter.PunctModel.load(config.punct_model)
    return segmenter.IdentityPredictor()


def segment_corpus(corpus, predictor, config):
    tok = get_tokenizer(config.tokenizer)
    out = []
    for sid in corpus.song_ids():
        for review in corpus.reviews[sid]:
            out.extend(segmenter.segment_review(predictor, review, config.window, config.min_tokens, tok))
    return out


def group_by_song(sentences):
    songs = {}
    for s in sentences:
        songs.setdefault(s.song_id, []).append(s)
    return songs


def dedupe(sentences):
    """Keep the first sentence per token sequence, carrying the largest approval count.

    Repeated identical sentences would make the kernel singular and add
    nothing to a tip list.
    """
    best = {}
    for s in sentences:
        key = s.tokens
        if key not in best:
            best[key] = s
        elif s.approvals > best[key].approvals:
            best[key] = dataclasses.replace(best[key], approvals=s.approvals)
    return list(best.values())


def style_scores_for(sentences, config, model=None, external=None):
    if config.scorer == "none":
        return {s.sentence_id: 0.0 for s in sentences}
    if config.scorer == "external":
        missing = [s.sentence_id for s in sentences if s.sentence_id not in external]
        if missing:
            raise ValueError(f"external scores missing {len(missing)} sentence(s), e.g. {missing[0]}")
        return {s.sentence_id: external[s.sentence_id] for s in sentences}
    scores = model.score_many([s.text for s in sentences])
    return dict(zip((s.sentence_id for s in sentences), scores.tolist()))


def select_for_song(song_id, sentences, style, config, topics=None):
    """Rank, fuse and diversify one song's candidates."""
    kmax = max(config.k)
    content = _stage("rank", song_id)(content_rank.content_scores)(sentences, config.rank_config)
    cands = [s for s in sentences if s.sentence_id in content]
    ids = [s.sentence_id for s in cands]
    fused = _stage("fuse", song_id)(diversity.fuse)(
        content, style, config.alpha, config.normalize_content, candidates=ids)
    if topics is None:
        topics = _stage("topics", song_id)(song_topics)([s.tokens for s in cands], config)
    kernel = _stage("kernel", song_id)(diversity.build_kernel)(fused, topics, config.ridge, ids)
    selection = _stage("select", song_id)(diversity.greedy_map)(kernel, kmax, config.stop_eps)
    baseline = diversity.score_order(fused, kmax)
    return SongResult(song_id, cands, content, {i: style[i] for i in ids}, fused, topics, selection, baseline)


def song_topics(docs, config):
    t = min(config.topics, len(docs))
    model = topic_model.train_plsa(docs, t, config.em_iterations, config.seed, config.epsilon)
    return model.topic_given_doc


def _text_key(song_id, tokens):
    return (song_id, tuple(tokens))


def label_lookup(labeled, tokenizer):
    by_id = {x.sentence_id: x.label == style_rank.Label.Tip for x in labeled}
    by_text = {_text_key(x.song_id, tokenizer(x.text)): x.label == style_rank.Label.Tip for x in labeled}
    return by_id, by_text


def sentence_labels(sentences, by_id, by_text):
    out = {}
    for s in sentences:
        if s.sentence_id in by_id:
            out[s.sentence_id] = by_id[s.sentence_id]
        elif _text_key(s.song_id, s.tokens) in by_text:
            out[s.sentence_id] = by_text[_text_key(s.song_id, s.tokens)]
    return out


def evaluate_results(results, labels, config, models=("dpp", "score")):
    report = evaluation.EvalReport()
    for sid, res in sorted(results.items()):
        text = {s.sentence_id: s.tokens for s in res.candidates}
        lists = {"dpp": res.selection.ids, "score": res.baseline}
        for model in models:
            ranked = lists[model]
            for k in config.k:
                top = ranked[:k]
                if labels is not None and all(i in labels for i in top):
                    report.add(model, sid, k, "precision", evaluation.precision_at_k(top, labels, k))
                for n in (1, 2):
                    toks = [text[i] for i in top]
                    if sum(max(len(t) - n + 1, 0) for t in toks) > 0:
                        report.add(model, sid, k, f"distinct_{n}", evaluation.distinct_n(toks, n))
    return report.finalize()


@dataclass
class Prepared:
    """Everything the per-song stages need, built once per run."""

    by_song: dict  # song -> deduplicated candidate sentences
    labeled: list | None
    split: evaluation.SplitManifest | None
    model: style_rank.StyleModel | None
    external: dict | None


def ingest_and_segment(config, report=None):
    ingest = report if report is not None else IngestReport()
    reviews = _stage("ingest")(load_reviews)(config.reviews, strict=config.strict, report=ingest)
    metas = _stage("ingest")(load_songs)(config.songs) if config.songs else {}
    corpus = _stage("ingest")(attach_metadata)(reviews, metas, strict=config.strict)
    predictor = _stage("segment")(make_predictor)(config)
    return ingest, _stage("segment")(segment_corpus)(corpus, predictor, config)


def prepare(config, sentences, style_model=None):
    """Dedupe per song, split the labeled data and obtain the style scorer.

    Test songs of the split keep only their held-out sentences as candidates,
    and the built-in style model trains on the training part only.
    """
    tok = get_tokenizer(config.tokenizer)
    by_song = {sid: dedupe(v) for sid, v in sorted(group_by_song(sentences).items())}
    labeled = _stage("labels")(style_rank.load_labeled)(config.labeled) if config.labeled else None
    split = None
    if labeled is not None:
        split = _stage("split")(evaluation.make_splits)(
            labeled, config.seed, config.split_test_songs, config.split_per_song, config.split_train_ratio)
        test_ids = set(split.test)
        test_keys = {_text_key(x.song_id, tok(x.text)) for x in labeled if x.sentence_id in test_ids}
        for sid in split.test_songs:
            pool = [s for s in by_song.get(sid, []) if _text_key(sid, s.tokens) in test_keys]
            if pool:
                by_song[sid] = pool

    model, external = style_model, None
    if config.scorer == "builtin" and model is None:
        if config.style_model:
            model = _stage("style")(style_rank.StyleModel.load)(config.style_model)
        elif labeled is not None:
            train_ids = set(split.train)
            train = [x for x in labeled if x.sentence_id in train_ids]
            model = _stage("style")(style_rank.train_style)(
                train, config.style_l2, config.style_epochs, config.seed)
        else:
            raise StageError("style", None, ValueError("builtin scorer needs a style model or a labeled dataset"))
    elif config.scorer == "external":
        external = _stage("style")(style_rank.load_external_scores)(config.scores)
    return Prepared({k: v for k, v in by_song.items() if v}, labeled, split, model, external)


def candidate_labels(results, labeled, config):
    if labeled is None:
        return None
    by_id, by_text = label_lookup(labeled, get_tokenizer(config.tokenizer))
    return sentence_labels([s for res in results.values() for s in res.candidates], by_id, by_text)


def run_pipeline(config, out_dir=None, keep_intermediates=False, style_model=None):
    """Run every stage; optionally write outputs to ``out_dir``.

    Identical config and seed give byte-identical files.
    """
    out = Path(out_dir) if out_dir is not None else None
    inter = out / "intermediate" if (out is not None and keep_intermediates) else None
    if inter is not None:
        inter.mkdir(parents=True, exist_ok=True)

    ingest, sentences = ingest_and_segment(config)
    prep = prepare(config, sentences, style_model)

    def work(item):
        sid, sents = item
        style = _stage("style", sid)(style_scores_for)(sents, config, prep.model, prep.external)
        return sid, select_for_song(sid, sents, style, config)

    items = list(prep.by_song.items())
    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as ex:
            results = dict(ex.map(work, items))
    else:
        results = dict(map(work, items))

    labels = candidate_labels(results, prep.labeled, config)
    report = _stage("evaluate")(evaluate_results)(results, labels, config)
    if prep.split is not None:
        report.split = prep.split.to_dict()

    result = PipelineResult(results, report, ingest, prep.split)
    if out is not None:
        write_outputs(result, config, out, inter, sentences, prep.model)
    return result


def selection_records(result):
    recs = []
    for sid in sorted(result.songs):
        res = result.songs[sid]
        index = {s.sentence_id: i for i, s in enumerate(res.candidates)}
        n_greedy = len(res.selection.gains)
        for rank, cid in enumerate(res.selection.ids):
            i = index[cid]
            recs.append({
                "song_id": sid,
                "rank": rank + 1,
                "sentence_id": cid,
                "text": res.candidates[i].text,
                "content": res.content[cid],
                "content_norm": res.fused.normalized_content[cid],
                "style": res.style[cid],
                "fused": res.fused.scores[cid],
                "gain": res.selection.gains[rank] if rank < n_greedy else None,
                "topics": res.topics[i].tolist(),
            })
    return recs


def _jsonl(records):
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def selection_text(records):
    lines = []
    for r in records:
        gain = "pad" if r["gain"] is None else f"{r['gain']:.4f}"
        lines.append(f"{r['song_id']}\t{r['rank']}\t{r['fused']:.4f}\t{r['content']:.4f}\t{r['style']:.4f}"
                     f"\t{gain}\t{r['text']}")
    return "song_id\trank\tfused\tcontent\tstyle\tgain\ttext\n" + "\n".join(lines) + "\n"


def score_records(result):
    recs = []
    for sid in sorted(result.songs):
        res = result.songs[sid]
        for s in res.candidates:
            recs.append({"song_id": sid, "sentence_id": s.sentence_id, "content": res.content[s.sentence_id],
                         "style": res.style[s.sentence_id]})
    return recs


def write_outputs(result, config, out, inter, sentences, model):
    out.mkdir(parents=True, exist_ok=True)
    recs = selection_records(result)
    (out / "selections.jsonl").write_text(_jsonl(recs), encoding="utf-8")
    (out / "selections.txt").write_text(selection_text(recs), encoding="utf-8")
    if result.report is not None:
        (out / "report.json").write_text(result.report.dumps(), encoding="utf-8")
        (out / "report.txt").write_text(result.report.table(), encoding="utf-8")
    (out / "ingest_report.json").write_text(json.dumps(result.ingest.to_dict(), sort_keys=True) + "\n",
                                            encoding="utf-8")
    if inter is None:
        return
    write_sentences(inter / "sentences.jsonl", sentences)
    (inter / "scores.jsonl").write_text(_jsonl(score_records(result)), encoding="utf-8")
    (inter / "config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=1) + "\n",
                                       encoding="utf-8")
    if model is not None:
        model.save(inter / "style_model.json")
    if result.split is not None:
        (inter / "split.json").write_text(json.dumps(result.split.to_dict(), sort_keys=True) + "\n",
                                          encoding="utf-8")
    topics = {sid: {"ids": [s.sentence_id for s in res.candidates], "vectors": res.topics.tolist()}
              for sid, res in sorted(result.songs.items())}
    (inter / "topics.json").write_text(json.dumps(topics, sort_keys=True) + "\n", encoding="utf-8")


def select_from_intermediates(inter, config):
    """Recompute selections from a ``keep_intermediates`` directory."""
    inter = Path(inter)
    sentences = read_sentences(inter / "sentences.jsonl")
    scores = [json.loads(line) for line in (inter / "scores.jsonl").read_text(encoding="utf-8").splitlines()]
    topics = json.loads((inter / "topics.json").read_text(encoding="utf-8"))
    sent_by_id = {s.sentence_id: s for s in sentences}
    results = {}
    for sid in sorted(topics):
        ids = topics[sid]["ids"]
        rows = {r["sentence_id"]: r for r in scores if r["song_id"] == sid}
        cands = [sent_by_id[i] for i in ids]
        content = {i: rows[i]["content"] for i in ids}
        style = {i: rows[i]["style"] for i in ids}
        fused = diversity.fuse(content, style, config.alpha, config.normalize_content, candidates=ids)
        F = np.asarray(topics[sid]["vectors"], dtype=float)
        kernel = diversity.build_kernel(fused, F, config.ridge, ids)
        selection = diversity.greedy_map(kernel, max(config.k), config.stop_eps)
        results[sid] = SongResult(sid, cands, content, style, fused, F, selection,
                                  diversity.score_order(fused, max(config.k)))
    return PipelineResult(results, None, IngestReport())


def sweep(config, parameter, values, out_dir=None):
    """One full run per value with everything else (seed included) fixed."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {sorted(set(SWEEPABLE))}")
    values = list(values)
    if not values:
        raise ValueError("empty value list")
    attr = SWEEPABLE[parameter]
    reports = []
    for v in values:
        change = {attr: [int(v)] if attr == "k" else (int(v) if attr == "topics" else float(v))}
        cfg = config.replace(**change)
        sub = None if out_dir is None else Path(out_dir) / f"{parameter}={v}"
        res = run_pipeline(cfg, sub)
        reports.append((v, res.report))
    return reports


def sweep_table(parameter, reports):
    rows = []
    for v, rep in reports:
        for (model, k, metric), value in sorted(rep.summary.items()):
            rows.append({"parameter": parameter, "value": v, "model": model, "k": k, "metric": metric,
                         "score": value})
    return rows
