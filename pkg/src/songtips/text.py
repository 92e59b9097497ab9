"""Tokenization shared by graph ranking, topic modeling and the metrics."""

import re

# Han, Kana, Hangul and CJK compatibility blocks: one token per character.
_CJK = (
    r"\u1100-\u11ff\u3040-\u30ff\u3130-\u318f\u3400-\u4dbf\u4e00-\u9fff"
    r"\uac00-\ud7af\uf900-\ufaff\U00020000-\U0002ffff"
)
_TOKEN = re.compile(rf"[{_CJK}]|(?:(?![{_CJK}])[^\W_])+")


def tokenize(text):
    """Split ``text`` into word tokens.

    Alphabetic scripts split on Unicode word boundaries (lower-cased); every
    Han/Kana/Hangul character is a token of its own. Punctuation is dropped.

    >>> tokenize("listen到了")
    ['listen', '到', '了']
    """
    return [m.group(0).lower() for m in _TOKEN.finditer(text)]


def whitespace_tokenize(text):
    return text.split()


TOKENIZERS = {"default": tokenize, "whitespace": whitespace_tokenize}


def get_tokenizer(name_or_fn="default"):
    if callable(name_or_fn):
        return name_or_fn
    try:
        return TOKENIZERS[name_or_fn]
    except KeyError:
        raise ValueError(f"unknown tokenizer {name_or_fn!r}; choose from {sorted(TOKENIZERS)}") from None
