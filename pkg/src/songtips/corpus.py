"""Review ingestion, text normalization and the canonical data model."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import asdict, dataclass, field
from pathlib import Path

GENRES = ("absolute", "rock", "film_tv", "chinese_pop", "eajk_pop")

# Regex character-class body: zero-width marks, BOM, emoji and pictograph blocks.
DEFAULT_SPECIAL_SYMBOLS = (
    r"\u200b-\u200f\u2028-\u202e\u2060-\u206f\ufeff"
    r"\U0001f000-\U0001faff\u2600-\u27bf\ufe0f\u20e3"
)

_WS = re.compile(r"\s+")


class CorpusError(ValueError):
    """Raised for unreadable or invalid corpus input."""

    def __init__(self, message, problems=()):
        self.problems = list(problems)
        if self.problems:
            message += "\n" + "\n".join(self.problems)
        super().__init__(message)


@dataclass(frozen=True)
class RawReview:
    song_id: str
    review_id: str
    text: str
    approvals: int


@dataclass(frozen=True)
class SongMeta:
    song_id: str
    title: str = ""
    artist: str = ""
    lyrics: str | None = None
    genre: str | None = None


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    song_id: str
    review_id: str
    text: str
    tokens: tuple[str, ...]
    approvals: int

    def to_dict(self):
        d = asdict(self)
        d["tokens"] = list(self.tokens)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            sentence_id=d["sentence_id"],
            song_id=d["song_id"],
            review_id=d["review_id"],
            text=d["text"],
            tokens=tuple(d["tokens"]),
            approvals=int(d["approvals"]),
        )


@dataclass
class IngestReport:
    loaded: int = 0
    dropped: int = 0
    malformed: int = 0
    problems: list[str] = field(default_factory=list)

    def to_dict(self):
        return {"loaded": self.loaded, "dropped": self.dropped, "malformed": self.malformed}


@dataclass(frozen=True)
class Corpus:
    """Reviews grouped by song. Immutable once built."""

    songs: dict[str, SongMeta]
    reviews: dict[str, tuple[RawReview, ...]]

    def song_ids(self):
        return sorted(self.reviews)

    def __len__(self):
        return sum(len(v) for v in self.reviews.values())


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def normalize_text(text, special_symbols=DEFAULT_SPECIAL_SYMBOLS):
    """Clean one review: strip control and special symbols, squeeze runs.

    Runs of four or more identical non-punctuation characters shrink to three;
    any whitespace run becomes a single space. Punctuation is left alone
    because segmentation depends on it.
    """
    out = []
    for ch in text:
        cat = unicodedata.category(ch)
        if cat == "Cc" and not ch.isspace():
            continue
        if cat in ("Cf", "Co", "Cs"):
            continue
        out.append(ch)
    text = "".join(out)
    if special_symbols:
        text = re.sub(f"[{special_symbols}]", "", text)
    text = _WS.sub(" ", text).strip()

    squeezed = []
    run_char, run_len = None, 0
    for ch in text:
        if ch == run_char:
            run_len += 1
        else:
            run_char, run_len = ch, 1
        if run_len <= 3 or _is_punct(ch):
            squeezed.append(ch)
    return "".join(squeezed)


def _parse_review(obj):
    missing = [k for k in ("song_id", "review_id", "text", "approvals") if k not in obj]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")
    approvals = obj["approvals"]
    if isinstance(approvals, bool):
        raise ValueError("approvals must be an integer")
    try:
        approvals_int = int(approvals)
    except (TypeError, ValueError):
        raise ValueError(f"approvals {approvals!r} is not an integer") from None
    if isinstance(approvals, float) and approvals != approvals_int:
        raise ValueError(f"approvals {approvals!r} is not an integer")
    if approvals_int < 0:
        raise ValueError(f"negative approvals {approvals_int}")
    if not isinstance(obj["text"], str):
        raise ValueError("text must be a string")
    return RawReview(str(obj["song_id"]), str(obj["review_id"]), obj["text"], approvals_int)


def load_reviews(path, normalize=True, strict=True, report=None):
    """Read newline-delimited JSON review records.

    With ``strict`` (the default) any malformed line aborts the load with a
    :class:`CorpusError` listing every offending line number. Otherwise bad
    lines are skipped and counted in ``report``.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"reviews file not found: {path}")
    report = report if report is not None else IngestReport()
    reviews, seen, problems = [], set(), []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                review = _parse_review(obj)
            except ValueError as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            key = (review.song_id, review.review_id)
            if key in seen:
                problems.append(f"line {lineno}: duplicate review {review.song_id}/{review.review_id}")
                continue
            seen.add(key)
            if normalize:
                text = normalize_text(review.text)
                if not text:
                    report.dropped += 1
                    continue
                review = RawReview(review.song_id, review.review_id, text, review.approvals)
            reviews.append(review)
    report.malformed += len(problems)
    report.problems.extend(problems)
    if problems and strict:
        raise CorpusError(f"{len(problems)} malformed record(s) in {path}", problems)
    report.loaded += len(reviews)
    return reviews


def load_songs(path):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"song metadata file not found: {path}")
    metas, problems = {}, []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sid = str(obj["song_id"])
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if sid in metas:
                problems.append(f"line {lineno}: duplicate song_id {sid}")
                continue
            genre = obj.get("genre")
            if genre is not None and genre not in GENRES:
                problems.append(f"line {lineno}: unknown genre {genre!r}")
                continue
            metas[sid] = SongMeta(sid, obj.get("title", ""), obj.get("artist", ""), obj.get("lyrics"), genre)
    if problems:
        raise CorpusError(f"{len(problems)} malformed song record(s) in {path}", problems)
    return metas


def attach_metadata(reviews, metas, strict=False):
    """Group reviews by song, pairing each group with its metadata.

    In lenient mode songs without metadata get a placeholder :class:`SongMeta`.
    """
    unknown = sorted({r.song_id for r in reviews} - set(metas))
    if unknown and strict:
        raise CorpusError("reviews reference unknown song_id(s): " + ", ".join(unknown))
    grouped = {}
    for r in reviews:
        grouped.setdefault(r.song_id, []).append(r)
    songs = {sid: metas.get(sid) or SongMeta(sid, title=sid) for sid in grouped}
    return Corpus(songs=songs, reviews={sid: tuple(v) for sid, v in grouped.items()})


def write_reviews(path, reviews):
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in reviews:
            fh.write(json.dumps(asdict(r), ensure_ascii=False, sort_keys=True) + "\n")


def write_songs(path, metas):
    with Path(path).open("w", encoding="utf-8") as fh:
        for sid in sorted(metas):
            fh.write(json.dumps(asdict(metas[sid]), ensure_ascii=False, sort_keys=True) + "\n")


def write_sentences(path, sentences):
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_sentences(path):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"sentence file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return [Sentence.from_dict(json.loads(line)) for line in fh if line.strip()]
