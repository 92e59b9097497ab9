"""Synthetic review corpora for tests, demos and benchmarks.

Each toy song has a few topic clusters with private vocabularies. One "hot"
cluster is written as near-duplicate paraphrases with high approval counts,
so pure score ordering stacks redundant sentences at the top. Tip sentences
carry stylistic marker words; non-tips carry chatter markers. Sentences
start with a capital letter, and a share of reviews glue sentences together
with commas instead of full stops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import RawReview, SongMeta
from .style_rank import Label, LabeledSentence
from .text import tokenize

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]

TIP_MARKERS = ("truly", "memories", "heart", "gentle", "soul", "dream")
CHATTER_MARKERS = ("lol", "first", "anyone", "here", "again", "whatever")


@dataclass
class ToyCorpus:
    songs: dict
    reviews: list
    labeled: list
    punct_lines: list


def _word_factory(rng):
    used = set(TIP_MARKERS) | set(CHATTER_MARKERS)

    def word():
        while True:
            w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                        for _ in range(int(rng.integers(2, 4))))
            if w not in used:
                used.add(w)
                return w

    return word


def _sentence_words(rng, song, topic):
    """Word list (with style marker) and tip flag for one sentence."""
    if topic == 0:
        words = list(song["hot"])
        # near-duplicate: one substitution from the hot cluster, maybe a generic word
        pos = int(rng.integers(len(words)))
        words[pos] = song["topics"][0][int(rng.integers(len(song["topics"][0])))]
        if rng.random() < 0.5:
            words.insert(int(rng.integers(len(words) + 1)), song["generic"][int(rng.integers(len(song["generic"])))])
    else:
        vocab = song["topics"][topic]
        n = int(rng.integers(4, 8))
        words = [vocab[i] for i in rng.choice(len(vocab), size=n, replace=False)]
        if rng.random() < 0.5:
            words.insert(int(rng.integers(len(words) + 1)), song["generic"][int(rng.integers(len(song["generic"])))])
    is_tip = bool(rng.random() < 0.5)
    markers = TIP_MARKERS if is_tip else CHATTER_MARKERS
    words.insert(int(rng.integers(len(words) + 1)), markers[int(rng.integers(len(markers)))])
    return words, is_tip


def _render(words, rng, comma_rate=0.3):
    """Capitalized clause text, optionally with an internal comma."""
    words = list(words)
    if len(words) >= 5 and rng.random() < comma_rate:
        cut = int(rng.integers(2, len(words) - 2))
        words[cut] = words[cut] + ","
    words[0] = words[0][0].upper() + words[0][1:]
    return " ".join(words)


def make_toy_corpus(seed=0, n_songs=12, reviews_per_song=60, n_topics=4, topic_size=10, misuse_rate=0.3):
    rng = np.random.default_rng(seed)
    word = _word_factory(rng)
    generic = [word() for _ in range(12)]

    songs, reviews, labeled, punct_lines = {}, [], [], []
    for s in range(n_songs):
        sid = f"song{s:03d}"
        topics = [[word() for _ in range(topic_size)] for _ in range(n_topics)]
        song = {"topics": topics, "generic": generic, "hot": topics[0][:6]}
        songs[sid] = SongMeta(sid, title=f"Toy song {s}", artist=f"Toy artist {s % 5}")
        seen = {}
        for r in range(reviews_per_song):
            n_sent = int(rng.integers(1, 4))
            parts, hot = [], False
            for _ in range(n_sent):
                topic = 0 if rng.random() < 0.4 else int(rng.integers(1, n_topics))
                hot = hot or topic == 0
                words, is_tip = _sentence_words(rng, song, topic)
                text = _render(words, rng)
                parts.append(text)
                key = tuple(tokenize(text))
                if key not in seen:
                    seen[key] = (text + ".", is_tip)
            glue = [", " if rng.random() < misuse_rate else ". " for _ in parts[1:]]
            body = parts[0] + "".join(g + p for g, p in zip(glue, parts[1:])) + "."
            approvals = int(10 ** rng.uniform(1.0, 3.5)) if hot else int(10 ** rng.uniform(0.0, 1.5))
            reviews.append(RawReview(sid, f"r{r:04d}", body, approvals))
            punct_lines.append(". ".join(parts) + ".")
        for i, (text, is_tip) in enumerate(seen.values()):
            labeled.append(LabeledSentence(f"{sid}/L{i:04d}", sid, text, Label.Tip if is_tip else Label.NonTip))
    return ToyCorpus(songs, reviews, labeled, punct_lines)


def synthetic_punct_corpus(n=2000, seed=0):
    """Lines where the word END always precedes a full stop.

    Clauses end either with ``END。`` or with a different word and ``，``.
    """
    rng = np.random.default_rng(seed)
    word = _word_factory(rng)
    vocab = [word() for _ in range(60)]
    lines = []
    for _ in range(n):
        parts = []
        for c in range(int(rng.integers(1, 4))):
            body = " ".join(vocab[i] for i in rng.integers(len(vocab), size=int(rng.integers(2, 6))))
            parts.append(body)
        text = ""
        for j, body in enumerate(parts):
            if j == len(parts) - 1 or rng.random() < 0.4:
                text += body + " END。"
            else:
                text += body + "，"
        lines.append(text)
    return lines
