"""Song-independent tip-likeness scoring.

A sentence is encoded into a fixed-size vector, and a 2-class softmax layer
on top gives the probability that it reads like a tip. The built-in encoder
hashes character n-grams; scores from any other model can be injected
through :func:`load_external_scores`.
"""

from __future__ import annotations

import enum
import json
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import CorpusError
from .linear import TrainingError, fit_softmax, softmax

MODEL_FORMAT = "songtips.style/1"

# Tip characteristic codes: four content, four stylistic.
CHARACTERISTICS = (
    "singer_lyricist", "lyrics_title", "songwriting", "background",
    "sensory", "scene", "humor", "philosophy",
)


class Label(enum.IntEnum):
    NonTip = 0
    Tip = 1

    @classmethod
    def parse(cls, value):
        v = str(value).strip().lower().replace("-", "_")
        if v in ("tip", "1", "true"):
            return cls.Tip
        if v in ("non_tip", "nontip", "0", "false"):
            return cls.NonTip
        raise ValueError(f"unknown label {value!r}")


@dataclass(frozen=True)
class LabeledSentence:
    sentence_id: str
    song_id: str
    text: str
    label: Label
    characteristics: tuple[str, ...] = ()

    def __post_init__(self):
        bad = [c for c in self.characteristics if c not in CHARACTERISTICS]
        if bad:
            raise ValueError(f"{self.sentence_id}: unknown characteristic code(s) {bad}")

    def to_dict(self):
        return {
            "sentence_id": self.sentence_id,
            "song_id": self.song_id,
            "text": self.text,
            "label": "tip" if self.label == Label.Tip else "non_tip",
            "characteristics": list(self.characteristics),
        }


class HashedNgramEncoder:
    """Hashed character n-gram counts, L2-normalized.

    CRC32 keeps the hashing stable across processes (``hash()`` is salted).
    """

    def __init__(self, dim=4096, orders=(1, 2, 3)):
        self.dim = int(dim)
        self.orders = tuple(int(o) for o in orders)

    def counts(self, text):
        c = Counter()
        for n in self.orders:
            for i in range(len(text) - n + 1):
                gram = f"{n}:{text[i:i + n]}"
                c[zlib.crc32(gram.encode("utf-8")) % self.dim] += 1
        return c

    def __call__(self, text):
        v = np.zeros(self.dim)
        for k, n in self.counts(text).items():
            v[k] = n
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    def matrix(self, texts):
        rows, cols, vals = [], [], []
        for r, t in enumerate(texts):
            c = self.counts(t)
            norm = np.sqrt(sum(n * n for n in c.values())) or 1.0
            for k, n in c.items():
                rows.append(r)
                cols.append(k)
                vals.append(n / norm)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(texts), self.dim))

    def config(self):
        return {"dim": self.dim, "orders": list(self.orders)}


def featurize(text, dim=4096, orders=(1, 2, 3)):
    return HashedNgramEncoder(dim, orders)(text)


class StyleModel:
    def __init__(self, encoder, weights, bias, l2=1e-3, seed=0, class_weighted=False, losses=()):
        self.encoder = encoder
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.l2 = float(l2)
        self.seed = int(seed)
        self.class_weighted = bool(class_weighted)
        self.losses = list(losses)
        if self.weights.shape != (encoder.dim, 2):
            raise ValueError("weights must be (encoder dim x 2)")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite weights")

    def logits(self, texts):
        return self.encoder.matrix(list(texts)) @ self.weights + self.bias

    def probabilities(self, texts):
        return softmax(self.logits(texts))

    def score(self, text):
        return float(self.probabilities([text])[0, Label.Tip])

    def score_many(self, texts):
        texts = list(texts)
        if not texts:
            return np.zeros(0)
        return self.probabilities(texts)[:, Label.Tip]

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "encoder": {"kind": "hashed_ngram", **self.encoder.config()},
            "l2": self.l2,
            "seed": self.seed,
            "class_weighted": self.class_weighted,
            "bias": self.bias.tolist(),
            "weights": self.weights.tolist(),
            "losses": list(self.losses),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a style model file (format={d.get('format')!r})")
        enc = d["encoder"]
        if enc.get("kind") != "hashed_ngram":
            raise ValueError(f"unsupported encoder {enc.get('kind')!r}")
        encoder = HashedNgramEncoder(enc["dim"], enc["orders"])
        return cls(encoder, d["weights"], d["bias"], d["l2"], d["seed"], d["class_weighted"], d.get("losses", ()))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def style_score(model, sentence):
    """Tip-class probability for a sentence (object with ``.text``) or a string."""
    return model.score(getattr(sentence, "text", sentence))


def train_style(data, l2=1e-3, epochs=300, seed=0, dim=4096, orders=(1, 2, 3), class_weighted=False):
    """Fit the tip classifier on :class:`LabeledSentence` records.

    Song identity is never read; only text and label enter training.
    """
    data = list(data)
    seen, conflicts = {}, set()
    for item in data:
        prev = seen.setdefault(item.sentence_id, item.label)
        if prev != item.label:
            conflicts.add(item.sentence_id)
    if conflicts:
        raise TrainingError("conflicting labels for sentence_id(s): " + ", ".join(sorted(conflicts)))
    y = np.array([int(item.label) for item in data])
    present = set(y.tolist())
    if present != {0, 1}:
        missing = [c.name for c in Label if int(c) not in present]
        raise TrainingError("training data lacks class(es): " + ", ".join(missing))

    encoder = HashedNgramEncoder(dim, orders)
    X = encoder.matrix([item.text for item in data])
    weights = None
    if class_weighted:
        freq = np.bincount(y, minlength=2).astype(float)
        weights = (len(y) / (2 * freq))[y]
    fit = fit_softmax(X, y, 2, l2=l2, epochs=epochs, seed=seed, sample_weight=weights)
    return StyleModel(encoder, fit.weights, fit.bias, l2, seed, class_weighted, fit.losses)


def load_labeled(path):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"labeled dataset not found: {path}")
    out, problems = [], []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(LabeledSentence(
                    str(obj["sentence_id"]), str(obj["song_id"]), obj["text"], Label.parse(obj["label"]),
                    tuple(obj.get("characteristics") or ()),
                ))
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"line {lineno}: {exc}")
    if problems:
        raise CorpusError(f"{len(problems)} malformed labeled record(s) in {path}", problems)
    return out


def write_labeled(path, data):
    with Path(path).open("w", encoding="utf-8") as fh:
        for item in data:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_external_scores(path, known_ids=None, strict=False):
    """Read ``{"sentence_id": ..., "score": ...}`` lines into a score map.

    Scores must lie in [0, 1]. With ``strict`` and ``known_ids`` given,
    ids outside ``known_ids`` are rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"score file not found: {path}")
    scores, problems = {}, []
    known = set(known_ids) if known_ids is not None else None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sid, value = str(obj["sentence_id"]), float(obj["score"])
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if not 0.0 <= value <= 1.0:
                problems.append(f"line {lineno}: score {value} outside [0, 1]")
            elif sid in scores:
                problems.append(f"line {lineno}: duplicate sentence_id {sid}")
            elif strict and known is not None and sid not in known:
                problems.append(f"line {lineno}: unknown sentence_id {sid}")
            else:
                scores[sid] = value
    if problems:
        raise CorpusError(f"{len(problems)} invalid score record(s) in {path}", problems)
    return scores
