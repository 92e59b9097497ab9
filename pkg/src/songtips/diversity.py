"""Score fusion, the quality/diversity kernel and greedy MAP selection.

The kernel is ``L = Diag(q) F F^T Diag(q) + ridge I`` where ``q`` holds the
fused per-sentence quality scores and the rows of ``F`` are topic vectors.
Selection greedily adds the candidate with the largest log-determinant gain,
using the incremental Cholesky update of Chen, Zhang & Zhou (2018) so each
step costs O(n k) instead of a fresh factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linear import NumericalError

SCORE_FLOOR = 1e-9


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class FusedScores:
    scores: dict
    alpha: float = 0.8
    normalized_content: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DppKernel:
    ids: tuple
    L: np.ndarray
    quality: np.ndarray
    ridge: float = 0.0


@dataclass
class TipSelection:
    ids: list
    gains: list  # log-det increments of the greedy steps; padded picks have none
    k: int
    padded: int = 0


def minmax(values):
    """Scale to [0, 1]; a constant vector maps to all ones."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.ones_like(v)
    return (v - lo) / (hi - lo)


def fuse(content, style, alpha=0.8, normalize=True, candidates=None):
    """Fused quality ``norm(Score_a) + alpha * Score_e`` per candidate.

    ``content`` is min-max normalized within the candidate set (one song)
    unless ``normalize`` is False. Non-positive results are lifted to
    ``SCORE_FLOOR`` so every candidate can enter the kernel.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    ids = list(candidates) if candidates is not None else list(content)
    missing = [i for i in ids if i not in content or i not in style]
    if missing:
        raise SelectionError("candidate(s) missing a score: " + ", ".join(map(str, missing)))
    a = np.array([content[i] for i in ids], dtype=float)
    a = minmax(a) if normalize else a
    e = np.array([style[i] for i in ids], dtype=float)
    fused = np.maximum(a + alpha * e, SCORE_FLOOR)
    return FusedScores(dict(zip(ids, fused.tolist())), alpha, dict(zip(ids, a.tolist())))


def build_kernel(scores, features, ridge=1e-8, ids=None):
    """``L_ij = q_i <f_i, f_j> q_j`` plus ``ridge`` on the diagonal.

    ``scores`` is a :class:`FusedScores`, a mapping or a sequence aligned
    with ``features`` rows.
    """
    if isinstance(scores, FusedScores):
        scores = scores.scores
    if isinstance(scores, dict):
        ids = list(scores) if ids is None else list(ids)
        q = np.array([scores[i] for i in ids], dtype=float)
    else:
        q = np.asarray(scores, dtype=float)
        ids = list(range(len(q))) if ids is None else list(ids)
    F = np.atleast_2d(np.asarray(features, dtype=float))
    if F.shape[0] != len(q) or len(ids) != len(q):
        raise SelectionError(f"{len(q)} scores vs {F.shape[0]} feature rows")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(F))):
        raise NumericalError("non-finite quality score or feature")
    A = q[:, None] * F
    L = A @ A.T
    L = 0.5 * (L + L.T)
    if ridge:
        L[np.diag_indices_from(L)] += ridge
    return DppKernel(tuple(ids), np.ascontiguousarray(L), q, float(ridge))


def greedy_map(kernel, k, stop_eps=1e-12, backend=None):
    """Greedy MAP selection of up to ``k`` items.

    Each step picks the candidate with the largest marginal ``d_i^2`` (the
    log-det gain is ``log d_i^2``), lowest index on ties. Once the best
    ``d^2`` drops to ``stop_eps`` the remaining slots are filled by
    descending quality among unselected candidates.
    """
    if k < 1:
        raise SelectionError("k must be >= 1")
    L = np.ascontiguousarray(kernel.L, dtype=float)
    n = L.shape[0]
    if n == 0:
        raise SelectionError("empty kernel")
    picked, gains = kernels.get(backend).greedy_map(L, int(k), float(stop_eps))
    picked = [int(i) for i in picked]
    want = min(k, n)
    padded = 0
    if len(picked) < want:
        chosen = set(picked)
        rest = sorted((i for i in range(n) if i not in chosen), key=lambda i: (-kernel.quality[i], i))
        extra = rest[: want - len(picked)]
        padded = len(extra)
        picked += extra
    return TipSelection([kernel.ids[i] for i in picked], [float(g) for g in gains], int(k), padded)


def greedy_indices(L, k, stop_eps=1e-12, backend=None):
    """Raw greedy pick order and gains for a bare matrix (no padding)."""
    picked, gains = kernels.get(backend).greedy_map(np.ascontiguousarray(L, dtype=float), int(k), float(stop_eps))
    return [int(i) for i in picked], [float(g) for g in gains]


def logdet_oracle(L, subset):
    """log det of the principal submatrix via a dense Cholesky factorization."""
    idx = list(subset)
    if not idx:
        return 0.0
    L = np.asarray(L, dtype=float)
    if min(idx) < 0 or max(idx) >= L.shape[0]:
        raise IndexError("subset index out of range")
    sub = L[np.ix_(idx, idx)]
    try:
        C = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        raise SelectionError("principal submatrix is not positive definite") from None
    return float(2.0 * np.sum(np.log(np.diag(C))))


def score_order(fused, k):
    """Top-``k`` ids by fused score alone (the no-diversity baseline)."""
    scores = fused.scores if isinstance(fused, FusedScores) else fused
    ids = list(scores)
    order = sorted(range(len(ids)), key=lambda i: (-scores[ids[i]], i))
    return [ids[i] for i in order[:k]]
