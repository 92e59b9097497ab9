"""Punctuation correction and sentence splitting.

Users routinely end sentences with commas. Every comma/full-stop character in
a review is treated as a masked site whose true label (full stop, comma or
nothing) is predicted from the surrounding characters; the corrected review
is then cut at full stops.

Predictors implement ``predict(review_id, text, sites) -> list[PunctLabel]``.
Two ship here: :class:`PunctModel`, a character n-gram softmax classifier,
and :class:`ExternalLabels`, which replays labels computed elsewhere (for
example by a large masked-language-model tagger).
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import CorpusError, Sentence
from .linear import TrainingError, fit_softmax, l2_normalize_rows, softmax
from .text import tokenize as default_tokenize

MODEL_FORMAT = "songtips.punct/1"

FULL_STOP_SITES = "。．."
COMMA_SITES = "，,"
# Characters that end a sentence when splitting. ! and ? terminate in both
# Chinese and Western orthography; semicolons close independent clauses.
SENTENCE_TERMINATORS = "。．.！!？?；;"

_WIDE = {"FullStop": "。", "Comma": "，"}
_NARROW = {"FullStop": ".", "Comma": ","}


class PunctLabel(enum.IntEnum):
    """Output classes; the integer order is the argmax tie-break order."""

    FullStop = 0
    Comma = 1
    Empty = 2


@dataclass(frozen=True)
class PunctSite:
    review_id: str
    char_index: int
    original: PunctLabel
    context_left: str
    context_right: str


def _site_class(ch):
    if ch in FULL_STOP_SITES:
        return PunctLabel.FullStop
    if ch in COMMA_SITES:
        return PunctLabel.Comma
    return None


def extract_sites(review_id, text, window=8):
    """One site per comma / full-stop character, in text order."""
    if window < 1:
        raise ValueError("window must be positive")
    sites = []
    for i, ch in enumerate(text):
        label = _site_class(ch)
        if label is not None:
            sites.append(PunctSite(review_id, i, label, text[max(0, i - window) : i], text[i + 1 : i + 1 + window]))
    return sites


def site_features(left, right, orders=(1, 2, 3)):
    """Feature strings for a masked position.

    Anchored n-grams touching the mask (``L2:了`` style) carry most of the
    signal; bag-of-n-gram features over each window add the rest.
    """
    feats = []
    for k in orders:
        if len(left) >= k:
            feats.append(f"L{k}:{left[-k:]}")
        if len(right) >= k:
            feats.append(f"R{k}:{right[:k]}")
        feats.extend(f"l:{left[i:i + k]}" for i in range(len(left) - k + 1))
        feats.extend(f"r:{right[i:i + k]}" for i in range(len(right) - k + 1))
    return feats


@dataclass(frozen=True)
class Prediction:
    label: PunctLabel
    probabilities: tuple[float, float, float]


class PunctModel:
    """Multinomial logistic classifier over character n-gram context features."""

    def __init__(self, vocabulary, weights, bias, class_prior, window=8, orders=(1, 2, 3), l2=1e-3, seed=0,
                 losses=()):
        self.vocabulary = dict(vocabulary)
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.class_prior = np.asarray(class_prior, dtype=float)
        self.window = int(window)
        self.orders = tuple(int(o) for o in orders)
        self.l2 = float(l2)
        self.seed = int(seed)
        self.losses = list(losses)
        if self.weights.shape != (len(self.vocabulary), len(PunctLabel)):
            raise ValueError("weight matrix does not match vocabulary x 3 classes")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite weights")

    def _vector(self, left, right):
        idx = [self.vocabulary[f] for f in site_features(left, right, self.orders) if f in self.vocabulary]
        return Counter(idx)

    def _matrix(self, contexts):
        rows, cols, vals = [], [], []
        for r, (left, right) in enumerate(contexts):
            for c, v in self._vector(left, right).items():
                rows.append(r)
                cols.append(c)
                vals.append(v)
        X = sp.csr_matrix((vals, (rows, cols)), shape=(len(contexts), len(self.vocabulary)))
        return l2_normalize_rows(X)

    def probabilities(self, left, right):
        if not left and not right:
            return self.class_prior.copy()
        x = self._matrix([(left, right)])
        return softmax(x @ self.weights + self.bias)[0]

    def classify(self, site):
        p = self.probabilities(site.context_left, site.context_right)
        return Prediction(PunctLabel(int(np.argmax(p))), tuple(float(v) for v in p))

    def predict(self, review_id, text, sites):
        return [self.classify(s).label for s in sites]

    def to_dict(self):
        inv = sorted(self.vocabulary, key=self.vocabulary.get)
        return {
            "format": MODEL_FORMAT,
            "window": self.window,
            "orders": list(self.orders),
            "l2": self.l2,
            "seed": self.seed,
            "classes": [c.name for c in PunctLabel],
            "class_prior": self.class_prior.tolist(),
            "features": inv,
            "bias": self.bias.tolist(),
            "weights": self.weights.tolist(),
            "losses": list(self.losses),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a punctuation model file (format={d.get('format')!r})")
        vocab = {f: i for i, f in enumerate(d["features"])}
        weights = np.asarray(d["weights"], dtype=float).reshape(len(vocab), len(PunctLabel))
        return cls(vocab, weights, d["bias"], d["class_prior"], d["window"], d["orders"], d["l2"], d["seed"],
                   d.get("losses", ()))

    def save(self, path):
        Path(path).write_text(dumps_model(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def dumps_model(d):
    return json.dumps(d, ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def classify_site(model, site):
    return model.classify(site)


def training_examples(lines, window=8, empty_rate=0.15, seed=0):
    """Contexts and gold labels from correctly punctuated text.

    Every comma / full-stop character is a positive site. Empty-class
    examples come from gaps between two adjacent non-punctuation characters,
    each kept with probability ``empty_rate``.
    """
    rng = np.random.default_rng(seed)
    contexts, labels = [], []
    for line in lines:
        line = line.strip()
        for i, ch in enumerate(line):
            label = _site_class(ch)
            if label is not None:
                contexts.append((line[max(0, i - window) : i], line[i + 1 : i + 1 + window]))
                labels.append(label)
        gaps = [
            i for i in range(1, len(line))
            if _is_plain(line[i - 1]) and _is_plain(line[i])
        ]
        keep = rng.random(len(gaps)) < empty_rate
        for i, k in zip(gaps, keep):
            if k:
                contexts.append((line[max(0, i - window) : i], line[i : i + window]))
                labels.append(PunctLabel.Empty)
    return contexts, labels


def _is_plain(ch):
    return not ch.isspace() and _site_class(ch) is None and ch not in SENTENCE_TERMINATORS


def train_punct(lines, window=8, orders=(1, 2, 3), l2=1e-4, epochs=300, seed=0, empty_rate=0.15):
    """Train a :class:`PunctModel` on punctuated sentences (one per line)."""
    contexts, labels = training_examples(lines, window, empty_rate, seed)
    counts = Counter(labels)
    missing = [c.name for c in PunctLabel if counts[c] == 0]
    if missing:
        raise TrainingError("training corpus has no examples of class(es): " + ", ".join(missing))

    vocab = {}
    for left, right in contexts:
        for f in site_features(left, right, orders):
            if f not in vocab:
                vocab[f] = len(vocab)
    prior = np.array([counts[c] for c in PunctLabel], dtype=float)
    prior /= prior.sum()
    model = PunctModel(vocab, np.zeros((len(vocab), 3)), np.zeros(3), prior, window, orders, l2, seed)
    X = model._matrix(contexts)
    fit = fit_softmax(X, [int(c) for c in labels], 3, l2=l2, epochs=epochs, seed=seed)
    model.weights, model.bias, model.losses = fit.weights, fit.bias, fit.losses
    return model


def evaluate_punct(model, lines, empty_rate=0.15, seed=1):
    """Accuracy of ``model`` on held-out punctuated lines."""
    contexts, labels = training_examples(lines, model.window, empty_rate, seed)
    if not labels:
        raise ValueError("no evaluation sites")
    hits = sum(int(np.argmax(model.probabilities(l, r))) == int(y) for (l, r), y in zip(contexts, labels))
    return hits / len(labels)


class ExternalLabels:
    """Replays labels from a ``review_id, char_index, label`` file.

    Sites absent from the file keep their original punctuation.
    """

    def __init__(self, labels):
        self.labels = dict(labels)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise CorpusError(f"label file not found: {path}")
        labels, problems = {}, []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    key = (str(obj["review_id"]), int(obj["char_index"]))
                    labels[key] = PunctLabel[obj["label"]]
                except (ValueError, KeyError, TypeError) as exc:
                    problems.append(f"line {lineno}: {exc!r}")
        if problems:
            raise CorpusError(f"{len(problems)} malformed label record(s) in {path}", problems)
        return cls(labels)

    def predict(self, review_id, text, sites):
        return [self.labels.get((review_id, s.char_index), s.original) for s in sites]


class IdentityPredictor:
    """Keeps every punctuation mark as written."""

    def predict(self, review_id, text, sites):
        return [s.original for s in sites]


def correct_review(predictor, review_id, text, window=8):
    """Rewrite each site per the predicted label; Empty deletes the character."""
    sites = extract_sites(review_id, text, window)
    labels = predictor.predict(review_id, text, sites)
    chars = list(text)
    for site, label in zip(sites, labels):
        label = PunctLabel(label)
        if label == site.original:
            continue
        if label == PunctLabel.Empty:
            chars[site.char_index] = ""
        else:
            table = _NARROW if text[site.char_index] in ".," else _WIDE
            chars[site.char_index] = table[label.name]
    return "".join(chars)


def split_sentences(corrected, song_id, review_id, approvals, min_tokens=2, tokenizer=default_tokenize,
                    terminators=SENTENCE_TERMINATORS):
    """Cut at terminators (kept on the sentence) and build :class:`Sentence` records."""
    fragments, start = [], 0
    for i, ch in enumerate(corrected):
        if ch in terminators:
            fragments.append(corrected[start : i + 1])
            start = i + 1
    fragments.append(corrected[start:])

    out = []
    for idx, frag in enumerate(fragments):
        frag = frag.strip()
        tokens = tuple(tokenizer(frag))
        if not tokens or len(tokens) < min_tokens:
            continue
        out.append(Sentence(f"{song_id}/{review_id}/{idx}", song_id, review_id, frag, tokens, approvals))
    return out


def segment_review(predictor, review, window=8, min_tokens=2, tokenizer=default_tokenize):
    corrected = correct_review(predictor, review.review_id, review.text, window)
    return split_sentences(corrected, review.song_id, review.review_id, review.approvals, min_tokens, tokenizer)
