"""Precision@k, Distinct-n, Fleiss' kappa and dataset splitting."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .text import tokenize

K_VALUES = (1, 3, 5, 10)


class EvalError(ValueError):
    pass


def precision_at_k(selection, labels, k, strict=True):
    """Share of true tips among the first ``k`` ids, always divided by ``k``.

    ``labels`` maps id -> bool (or anything truthy for a tip). Unlabeled ids
    raise in strict mode and count as non-tips otherwise.
    """
    if k < 1:
        raise EvalError("k must be >= 1")
    top = list(selection)[:k]
    unknown = [i for i in top if i not in labels]
    if unknown and strict:
        raise EvalError("unlabeled id(s) in selection: " + ", ".join(map(str, unknown)))
    hits = sum(1 for i in top if labels.get(i, False))
    return hits / k


def mean_precision(selections, labels, k, strict=True):
    """Macro average over songs: ``selections`` maps song -> ordered ids."""
    if not selections:
        raise EvalError("no selections to average")
    return float(np.mean([precision_at_k(sel, labels, k, strict) for sel in selections.values()]))


def ngrams(tokens, n):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(tips, n, tokenizer=tokenize):
    """Distinct n-grams over total n-gram occurrences across all ``tips``.

    ``tips`` holds token lists or raw strings (tokenized with ``tokenizer``).
    """
    if n < 1:
        raise EvalError("n must be >= 1")
    grams = []
    for tip in tips:
        toks = tokenizer(tip) if isinstance(tip, str) else list(tip)
        grams.extend(ngrams(toks, n))
    if not grams:
        raise EvalError(f"no {n}-grams in tip list")
    return len(set(grams)) / len(grams)


def fleiss_kappa(ratings):
    """Fleiss' kappa for an items x raters table of categorical labels."""
    rows = [list(r) for r in ratings]
    if not rows:
        raise EvalError("no items")
    raters = len(rows[0])
    if raters < 2 or any(len(r) != raters for r in rows):
        raise EvalError("every item needs the same number (>= 2) of ratings")
    cats = sorted({c for r in rows for c in r}, key=repr)
    counts = np.array([[Counter(r)[c] for c in cats] for r in rows], dtype=float)
    N, n = counts.shape[0], raters
    P_i = (np.sum(counts**2, axis=1) - n) / (n * (n - 1))
    P_bar = P_i.mean()
    p_j = counts.sum(axis=0) / (N * n)
    P_e = float(np.sum(p_j**2))
    if P_e >= 1.0:
        return 1.0 if P_bar >= 1.0 else 0.0
    return float((P_bar - P_e) / (1.0 - P_e))


@dataclass
class SplitManifest:
    seed: int
    test_songs: list
    test: list
    train: list
    validation: list
    per_song: int
    train_ratio: float

    def counts(self):
        return {"test": len(self.test), "train": len(self.train), "validation": len(self.validation),
                "test_songs": len(self.test_songs)}

    def to_dict(self):
        return {
            "seed": self.seed, "per_song": self.per_song, "train_ratio": self.train_ratio,
            "test_songs": self.test_songs, "test": self.test, "train": self.train,
            "validation": self.validation, "counts": self.counts(),
        }


def make_splits(dataset, seed=0, test_songs=9, per_song=50, train_ratio=0.8):
    """Hold out ``per_song`` sentences from each of ``test_songs`` random songs.

    The rest is shuffled and split with ``floor(train_ratio * rest)`` items
    going to training and the remainder to validation. ``dataset`` holds
    records with ``sentence_id`` and ``song_id``.
    """
    by_song = {}
    for item in dataset:
        by_song.setdefault(item.song_id, []).append(item.sentence_id)
    all_ids = [i for ids in by_song.values() for i in ids]
    if len(set(all_ids)) != len(all_ids):
        raise EvalError("duplicate sentence ids in dataset")
    eligible = sorted(s for s, ids in by_song.items() if len(ids) >= per_song)
    if len(eligible) < test_songs:
        raise EvalError(f"need {test_songs} songs with >= {per_song} sentences, found {len(eligible)}")

    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(eligible, size=test_songs, replace=False).tolist())
    test = []
    for song in chosen:
        ids = sorted(by_song[song])
        test.extend(sorted(rng.choice(ids, size=per_song, replace=False).tolist()))
    held = set(test)
    rest = sorted(i for i in all_ids if i not in held)
    rest = [rest[i] for i in rng.permutation(len(rest))]
    n_train = int(np.floor(train_ratio * len(rest)))
    return SplitManifest(seed, chosen, test, sorted(rest[:n_train]), sorted(rest[n_train:]), per_song, train_ratio)


@dataclass
class EvalReport:
    """Metrics keyed by (model, k, metric)."""

    per_song: dict = field(default_factory=dict)  # (model, song, k, metric) -> value
    summary: dict = field(default_factory=dict)  # (model, k, metric) -> value
    kappa: float | None = None
    split: dict | None = None

    def add(self, model, song, k, metric, value):
        if not 0.0 <= value <= 1.0:
            raise EvalError(f"{metric}@{k} = {value} outside [0, 1]")
        self.per_song[(model, song, k, metric)] = float(value)

    def finalize(self):
        groups = {}
        for (model, _song, k, metric), v in self.per_song.items():
            groups.setdefault((model, k, metric), []).append(v)
        self.summary = {key: float(np.mean(v)) for key, v in sorted(groups.items())}
        return self

    def to_dict(self):
        return {
            "summary": [{"model": m, "k": k, "metric": met, "value": v}
                        for (m, k, met), v in sorted(self.summary.items())],
            "per_song": [{"model": m, "song_id": s, "k": k, "metric": met, "value": v}
                         for (m, s, k, met), v in sorted(self.per_song.items())],
            "kappa": self.kappa,
            "split": self.split,
        }

    def dumps(self):
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=1) + "\n"

    def table(self):
        metrics = sorted({met for (_, _, met) in self.summary})
        models = sorted({m for (m, _, _) in self.summary})
        ks = sorted({k for (_, k, _) in self.summary})
        head = ["model", "metric"] + [f"@{k}" for k in ks]
        lines = ["\t".join(head)]
        for m in models:
            for met in metrics:
                cells = [self.summary.get((m, k, met)) for k in ks]
                if all(c is None for c in cells):
                    continue
                lines.append("\t".join([m, met] + ["-" if c is None else f"{100 * c:.2f}" for c in cells]))
        if self.kappa is not None:
            lines.append(f"fleiss_kappa\t{self.kappa:.4f}")
        return "\n".join(lines) + "\n"
