"""Extract short, diverse tips from song reviews.

Pipeline: normalize reviews, correct misused punctuation and split into
sentences, rank sentences by an approval-weighted word-overlap graph and a
tip-likeness classifier, fuse the two scores, and pick a diverse top-k with
greedy MAP inference on a topic-similarity determinantal point process.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
