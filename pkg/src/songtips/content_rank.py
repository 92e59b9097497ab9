"""Approval-weighted sentence graph ranking within one song.

Each sentence becomes ``copy_count(b)`` graph nodes so heavily approved
sentences hold more rank mass. Nodes of different sentences are linked when
they share a word, weighted by shared word types over summed log lengths.
A damped iteration ranks the nodes and a sentence's score is the sum over
its copies.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .linear import NumericalError

log = logging.getLogger(__name__)


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class RankConfig:
    base: float = 10.0
    damping: float = 0.85
    tolerance: float = 1e-6
    max_iterations: int = 100

    def __post_init__(self):
        if not self.base > 1:
            raise ValueError("base must be > 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class SentenceGraph:
    sentence_ids: tuple[str, ...]
    origin: np.ndarray  # node -> sentence index
    copy_index: np.ndarray  # node -> copy number within its sentence
    sentence_weights: sp.csr_matrix  # symmetric sentence-level edge weights, zero diagonal

    @property
    def size(self):
        return len(self.origin)

    def node_adjacency(self):
        """Node-level weighted adjacency (M x M), copies of one sentence unlinked."""
        S = sp.csr_matrix(self.sentence_weights)
        onehot = sp.csr_matrix(
            (np.ones(self.size), (np.arange(self.size), self.origin)), shape=(self.size, len(self.sentence_ids))
        )
        return sp.csr_matrix(onehot @ S @ onehot.T)


@dataclass
class RankResult:
    weights: np.ndarray
    iterations: int
    residual: float
    converged: bool


def copy_count(b, base=10.0):
    """Node copies for a sentence with ``b`` approvals: ``1 + floor(log_base(max(b, 1)))``."""
    if b < 0:
        raise ValueError("approvals must be non-negative")
    if b <= 1:
        return 1
    k = int(math.floor(math.log(b) / math.log(base)))
    # guard against log rounding at exact powers of the base
    while base ** (k + 1) <= b:
        k += 1
    while k > 0 and base**k > b:
        k -= 1
    return 1 + k


def edge_weight(tokens_i, tokens_j):
    a, b = len(tokens_i), len(tokens_j)
    if a < 2 or b < 2:
        raise GraphError("edge weight needs sentences of at least 2 tokens")
    shared = len(set(tokens_i) & set(tokens_j))
    if shared == 0:
        return 0.0
    return shared / (math.log(a) + math.log(b))


def sentence_weight_matrix(token_lists):
    """Edge weights between all sentence pairs in one sparse product."""
    vocab = {}
    rows, cols = [], []
    for r, toks in enumerate(token_lists):
        for tok in set(toks):
            rows.append(r)
            cols.append(vocab.setdefault(tok, len(vocab)))
    n = len(token_lists)
    B = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, len(vocab)))
    shared = sp.csr_matrix(B @ B.T).tocoo()
    loglen = np.log(np.array([len(t) for t in token_lists], dtype=float))
    keep = shared.row != shared.col
    r, c, v = shared.row[keep], shared.col[keep], shared.data[keep]
    w = v / (loglen[r] + loglen[c])
    return sp.csr_matrix((w, (r, c)), shape=(n, n))


def build_graph(sentences, config=RankConfig()):
    """Expand sentences into approval-weighted node copies.

    Sentences shorter than two tokens are skipped; the caller's segmenter
    normally filters them already.
    """
    eligible = [s for s in sentences if len(s.tokens) >= 2]
    if not eligible:
        raise GraphError("no sentences with at least 2 tokens")
    copies = [copy_count(s.approvals, config.base) for s in eligible]
    origin = np.repeat(np.arange(len(eligible)), copies)
    copy_index = np.concatenate([np.arange(c) for c in copies])
    S = sentence_weight_matrix([s.tokens for s in eligible])
    return SentenceGraph(tuple(s.sentence_id for s in eligible), origin, copy_index, S)


def transition_csr(adjacency):
    """CSR of the incoming-transfer matrix T with T[i, j] = e(j, i) / sum_k e(j, k)."""
    A = sp.csr_matrix(adjacency, dtype=float)
    out = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros_like(out)
    inv[out > 0] = 1.0 / out[out > 0]
    T = sp.csr_matrix((sp.diags(inv) @ A).T)
    T.sort_indices()
    return T


def collapsed_transition(graph):
    """Sentence-level incoming-transfer matrix equivalent to the node graph.

    All copies of a sentence have the same neighbours, so they hold equal
    weight at every iterate. Node j's out-weight is ``sum_k c_k e(j, k)`` and
    sentence i receives ``c_j e(j, i) / out_j`` per unit weight of each of
    the ``c_j`` copies of sentence j.
    """
    S = sp.csr_matrix(graph.sentence_weights, dtype=float)
    copies = np.bincount(graph.origin, minlength=S.shape[0]).astype(float)
    out = np.asarray(S @ copies).ravel()
    scale = np.zeros_like(out)
    scale[out > 0] = copies[out > 0] / out[out > 0]
    T = sp.csr_matrix((sp.diags(scale) @ S).T)
    T.sort_indices()
    return T


def rank_graph(graph, config=RankConfig(), backend=None):
    """Damped fixed-point iteration from the uniform vector ``1/M``.

    ``graph`` is a :class:`SentenceGraph` or a raw symmetric node adjacency
    matrix. Returns one weight per node. Stops when the largest per-node
    change drops below ``config.tolerance``; hitting ``max_iterations``
    first logs a warning and returns the last iterate.
    """
    if isinstance(graph, SentenceGraph):
        M = graph.size
        T = collapsed_transition(graph)
    else:
        M = graph.shape[0]
        T = transition_csr(graph)
    if M == 0:
        raise GraphError("empty graph")
    w, it, resid = kernels.get(backend).rank_iterate(
        T.indptr.astype(np.int64), T.indices.astype(np.int64), T.data.astype(float),
        (1.0 - config.damping) / M, 1.0 / M, config.damping, config.tolerance, config.max_iterations,
    )
    w = np.asarray(w)
    if not np.all(np.isfinite(w)):
        raise NumericalError("graph rank produced non-finite weights")
    if isinstance(graph, SentenceGraph):
        w = w[graph.origin]
    converged = resid < config.tolerance
    if not converged:
        log.warning("graph rank did not converge in %d iterations (residual %.3g)", it, resid)
    return RankResult(w, int(it), float(resid), bool(converged))


def aggregate(weights, graph):
    """Sum node weights over each sentence's copies."""
    totals = np.bincount(graph.origin, weights=np.asarray(weights), minlength=len(graph.sentence_ids))
    return dict(zip(graph.sentence_ids, totals.tolist()))


def content_scores(sentences, config=RankConfig(), backend=None):
    graph = build_graph(sentences, config)
    result = rank_graph(graph, config, backend)
    return aggregate(result.weights, graph)


def dump_graph(graph, weights=None):
    """Line-oriented debug listing of nodes and edges."""
    lines = [f"# nodes {graph.size} sentences {len(graph.sentence_ids)}"]
    for node, (s, c) in enumerate(zip(graph.origin, graph.copy_index)):
        extra = "" if weights is None else f"\t{weights[node]!r}"
        lines.append(f"node\t{node}\t{graph.sentence_ids[s]}\t{c}{extra}")
    A = sp.triu(graph.node_adjacency(), k=1).tocoo()
    for i, j, v in sorted(zip(A.row.tolist(), A.col.tolist(), A.data.tolist())):
        lines.append(f"edge\t{i}\t{j}\t{v!r}")
    return "\n".join(lines) + "\n"
