"""PLSA topic model trained by EM over one song's candidate sentences.

E-step: ``P(z|d,w) ∝ P(z|d) P(w|z)``. M-step: expected counts
``n(d,w) P(z|d,w)`` are summed per topic/word and per document/topic, an
additive ``epsilon`` is added, and rows are normalized.

With ``epsilon > 0`` the M-step is a MAP update under a symmetric Dirichlet
prior, so the quantity EM increases monotonically is the log-likelihood plus
``epsilon * (sum log P(z|d) + sum log P(w|z))``. Both are recorded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .linear import NumericalError

MODEL_FORMAT = "songtips.plsa/1"
DEFAULT_EPSILON = 1e-6


class TopicModelError(ValueError):
    pass


def smooth(counts, epsilon=DEFAULT_EPSILON):
    """Row-normalize ``counts + epsilon``; all-zero rows become uniform."""
    counts = np.asarray(counts, dtype=float) + epsilon
    totals = counts.sum(axis=-1, keepdims=True)
    width = counts.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / width)
    return out


@dataclass
class TopicModel:
    vocabulary: dict
    word_given_topic: np.ndarray  # (t, V)
    topic_given_doc: np.ndarray  # (D, t)
    iterations: int = 50
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    log_likelihood: list = field(default_factory=list)
    objective: list = field(default_factory=list)

    @property
    def topic_count(self):
        return self.word_given_topic.shape[0]

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "topics": self.topic_count,
            "iterations": self.iterations,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "vocabulary": sorted(self.vocabulary, key=self.vocabulary.get),
            "word_given_topic": self.word_given_topic.tolist(),
            "topic_given_doc": self.topic_given_doc.tolist(),
            "log_likelihood": list(self.log_likelihood),
            "objective": list(self.objective),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a topic model file (format={d.get('format')!r})")
        t = int(d["topics"])
        vocab = {w: i for i, w in enumerate(d["vocabulary"])}
        return cls(
            vocab,
            np.asarray(d["word_given_topic"], dtype=float).reshape(t, len(vocab)),
            np.asarray(d["topic_given_doc"], dtype=float).reshape(-1, t),
            d["iterations"], d["seed"], d["epsilon"], list(d["log_likelihood"]),
            list(d.get("objective", ())),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _triples(docs, vocab):
    doc, word, count = [], [], []
    for d, toks in enumerate(docs):
        c = {}
        for tok in toks:
            if tok in vocab:
                c[vocab[tok]] = c.get(vocab[tok], 0) + 1
        for w in sorted(c):
            doc.append(d)
            word.append(w)
            count.append(float(c[w]))
    return np.asarray(doc, dtype=np.int64), np.asarray(word, dtype=np.int64), np.asarray(count, dtype=float)


def _random_simplex(rng, shape):
    x = rng.random(shape) + 0.1
    return x / x.sum(axis=-1, keepdims=True)


def train_plsa(docs, topics=8, iterations=50, seed=0, epsilon=DEFAULT_EPSILON, backend=None):
    """Fit PLSA on token lists. Returns a :class:`TopicModel`.

    ``log_likelihood[i]`` is the corpus log-likelihood of the parameters
    entering iteration ``i``; the last entry scores the final parameters.
    """
    docs = [list(d) for d in docs]
    if topics < 1:
        raise TopicModelError("topic count must be positive")
    if len(docs) < topics:
        raise TopicModelError(f"{len(docs)} documents is fewer than {topics} topics")
    vocab = {}
    for toks in docs:
        for tok in toks:
            vocab.setdefault(tok, len(vocab))
    if not vocab:
        raise TopicModelError("empty vocabulary")
    doc, word, count = _triples(docs, vocab)

    rng = np.random.default_rng(seed)
    theta = _random_simplex(rng, (len(docs), topics))
    phi = _random_simplex(rng, (topics, len(vocab)))
    if topics == 1:
        theta = np.ones((len(docs), 1))

    k = kernels.get(backend)
    history, objective = [], []

    def record(ll):
        if not np.isfinite(ll):
            raise NumericalError("non-finite log-likelihood")
        history.append(float(ll))
        prior = epsilon * (np.sum(np.log(theta)) + np.sum(np.log(phi))) if epsilon > 0 else 0.0
        objective.append(float(ll + prior))

    for _ in range(iterations):
        acc_theta, acc_phi, ll = k.plsa_accumulate(doc, word, count, theta, phi)
        record(ll)
        theta = smooth(acc_theta, epsilon)
        phi = smooth(acc_phi, epsilon)
    record(k.plsa_accumulate(doc, word, count, theta, phi)[2])
    return TopicModel(vocab, phi, theta, iterations, seed, epsilon, history, objective)


def infer_topics(model, tokens, iterations=20, backend=None):
    """Fold a new sentence in: EM on ``P(z|d)`` only, ``P(w|z)`` frozen.

    Out-of-vocabulary tokens are ignored; an all-OOV sentence gets the
    uniform distribution.
    """
    t = model.topic_count
    doc, word, count = _triples([tokens], model.vocabulary)
    theta = np.full((1, t), 1.0 / t)
    if len(word) == 0:
        return theta[0]
    k = kernels.get(backend)
    for _ in range(iterations):
        acc_theta, _, _ = k.plsa_accumulate(doc, word, count, theta, model.word_given_topic)
        theta = smooth(acc_theta, model.epsilon)
    return theta[0]


def topic_vectors(model, docs=None, backend=None):
    """Per-document topic vectors: trained rows, or fold-in for new docs."""
    if docs is None:
        return model.topic_given_doc.copy()
    return np.vstack([infer_topics(model, d, backend=backend) for d in docs])
