"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python3 -m tests.test_acceptance``.
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from songtips import kernels, toy
from songtips.content_rank import RankConfig, build_graph, copy_count, rank_graph
from songtips.corpus import Sentence, write_reviews, write_songs
from songtips.diversity import build_kernel, greedy_indices, greedy_map, logdet_oracle
from songtips.evaluation import distinct_n, fleiss_kappa
from songtips.pipeline import PipelineConfig, run_pipeline
from songtips.segmenter import PunctLabel, correct_review, evaluate_punct, split_sentences, train_punct
from songtips.style_rank import write_labeled
from songtips.text import tokenize
from songtips.topic_model import train_plsa

from .oracles import rank_linear_solve

RESULTS = {}


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"
    RESULTS[number] = (ok, line)
    print(line, flush=True)
    return ok


def oracle_step(L, chosen):
    """Best next item by explicit log-det differences, lowest index on ties."""
    base = logdet_oracle(L, chosen)
    best, pick = -math.inf, None
    for i in range(L.shape[0]):
        if i in chosen:
            continue
        g = logdet_oracle(L, chosen + [i]) - base
        if g > best:
            best, pick = g, i
    return pick, best


def random_pd(rng, n):
    A = rng.normal(size=(n, n + 3))
    return A @ A.T


def write_toy(directory, seed, n_songs=12, reviews_per_song=60):
    c = toy.make_toy_corpus(seed=seed, n_songs=n_songs, reviews_per_song=reviews_per_song)
    directory.mkdir(parents=True, exist_ok=True)
    write_reviews(directory / "reviews.jsonl", c.reviews)
    write_songs(directory / "songs.jsonl", c.songs)
    write_labeled(directory / "labeled.jsonl", c.labeled)
    (directory / "config.json").write_text(json.dumps(
        {"reviews": "reviews.jsonl", "songs": "songs.jsonl", "labeled": "labeled.jsonl", "seed": seed}))
    return PipelineConfig.from_file(directory / "config.json")


# 1 ---------------------------------------------------------------------------

def check_greedy_exactness():
    rng = np.random.default_rng(101)
    instances = []
    for i in range(100):
        n = int(rng.integers(1, 13))
        if i % 10 == 9:
            # exact ties: repeated diagonal values
            L = np.diag(np.repeat(rng.integers(1, 4, size=(n + 1) // 2).astype(float), 2)[:n])
        else:
            L = random_pd(rng, n)
        instances.append(L)
    mismatches, steps = 0, 0
    start = time.perf_counter()
    for backend in sorted(kernels.BACKENDS):
        for L in instances:
            picked, _ = greedy_indices(L, L.shape[0], backend=backend)
            chosen = []
            for p in picked:
                ref, _ = oracle_step(L, chosen)
                mismatches += p != ref
                steps += 1
                chosen.append(p)
            mismatches += len(picked) != L.shape[0]
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 5.0
    return report(1, "greedy MAP exactness", ok,
                  f"{steps} steps over 100 kernels x {len(kernels.BACKENDS)} backends, "
                  f"{mismatches} mismatches, {elapsed:.2f}s (< 5s)")


# 2 ---------------------------------------------------------------------------

def check_gain_fidelity():
    rng = np.random.default_rng(202)
    worst, steps = 0.0, 0
    for backend in sorted(kernels.BACKENDS):
        for _ in range(5):
            L = random_pd(rng, 50)
            picked, gains = greedy_indices(L, 50, backend=backend)
            chosen = []
            for p, g in zip(picked, gains):
                ref = logdet_oracle(L, chosen + [p]) - logdet_oracle(L, chosen)
                worst = max(worst, abs(ref - g))
                chosen.append(p)
                steps += 1
    return report(2, "incremental gain fidelity", worst <= 1e-8, f"max |gain - oracle| = {worst:.2e} over {steps} steps")


# 3 ---------------------------------------------------------------------------

def check_graph_rank():
    rng = np.random.default_rng(303)
    tight = RankConfig(tolerance=1e-14, max_iterations=10000)
    worst = 0.0
    for backend in sorted(kernels.BACKENDS):
        for _ in range(30):
            M = int(rng.integers(2, 21))
            A = rng.random((M, M)) * (rng.random((M, M)) < 0.4)
            A = np.triu(A, 1)
            A = A + A.T
            w = rank_graph(A, tight, backend).weights
            worst = max(worst, float(np.max(np.abs(w - rank_linear_solve(A, 0.85)))))
        for _ in range(10):
            sents = []
            for i in range(int(rng.integers(2, 8))):
                toks = tuple(f"w{x}" for x in rng.integers(8, size=int(rng.integers(2, 6))))
                sents.append(Sentence(f"s{i}", "song", f"r{i}", " ".join(toks), toks, int(10 ** rng.uniform(0, 2.5))))
            graph = build_graph(sents, tight)
            if graph.size > 20:
                continue
            w = rank_graph(graph, tight, backend).weights
            worst = max(worst, float(np.max(np.abs(w - rank_linear_solve(graph.node_adjacency().toarray(), 0.85)))))
    tri = rank_graph(np.ones((3, 3)) - np.eye(3)).weights
    tri_err = float(np.max(np.abs(tri - 1 / 3)))
    iso = np.zeros((4, 4))
    iso[0, 1] = iso[1, 0] = iso[1, 2] = iso[2, 1] = 1.0
    iso_w = float(rank_graph(iso).weights[3])
    iso_ok = iso_w == (1 - 0.85) / 4
    ok = worst <= 1e-8 and tri_err <= 1e-9 and iso_ok
    return report(3, "graph-rank correctness", ok,
                  f"max |w - linear solve| = {worst:.2e}; triangle err {tri_err:.1e}; "
                  f"isolated node {iso_w!r} {'==' if iso_ok else '!='} (1-d)/M")


# 4 ---------------------------------------------------------------------------

def check_copy_count():
    low = all(copy_count(b, 10) == 1 for b in range(10))
    steps = all(copy_count(t, 10) - copy_count(t - 1, 10) == 1 for t in (10, 100, 1000))
    flat = all(copy_count(b, 10) == copy_count(b - 1, 10) for b in range(1, 5000) if b not in (10, 100, 1000))
    return report(4, "copy-count law", low and steps and flat,
                  f"1 on 0..9: {low}; +1 at 10/100/1000: {steps}; flat elsewhere below 5000: {flat}")


# 5 ---------------------------------------------------------------------------

def check_plsa():
    worst_ll, worst_obj, worst_simplex, iters = math.inf, math.inf, 0.0, 0
    for seed in range(50):
        c = toy.make_toy_corpus(seed=seed, n_songs=2, reviews_per_song=40)
        docs = [tokenize(r.text) for r in c.reviews]
        m = train_plsa(docs, topics=8, iterations=50, seed=seed)
        worst_ll = min(worst_ll, float(np.min(np.diff(m.log_likelihood))))
        worst_obj = min(worst_obj, float(np.min(np.diff(m.objective))))
        iters += len(m.log_likelihood) - 1
        for P in (m.topic_given_doc, m.word_given_topic):
            worst_simplex = max(worst_simplex, float(np.max(np.abs(P.sum(axis=1) - 1))), float(-P.min()))
    ok = worst_ll >= -1e-9 and worst_simplex <= 1e-9
    return report(5, "PLSA monotonicity", ok,
                  f"{iters} EM steps on 50 corpora; min log-lik change {worst_ll:.2e} (>= -1e-9); "
                  f"min smoothed-objective change {worst_obj:.2e}; simplex err {worst_simplex:.1e}")


# 6 ---------------------------------------------------------------------------

def check_distinct():
    fixtures = [
        (["a b", "a b"], 1, Fraction(1, 2)), (["a b", "a b"], 2, Fraction(1, 2)),
        (["a b c d", "a b e f", "a b g h", "c e i j", "k l m n"], 1, Fraction(14, 20)),
        (["a b c d", "a b e f", "a b g h", "c e i j", "k l m n"], 2, Fraction(13, 15)),
    ]
    exact = all(distinct_n(t, n) == float(v) for t, n, v in fixtures)
    rng = np.random.default_rng(606)
    tips = fixtures[2][0]
    invariant = True
    for _ in range(20):
        perm = [tips[i] for i in rng.permutation(len(tips))]
        invariant &= distinct_n(perm, 1) == 0.7 and distinct_n(perm, 2) == float(Fraction(13, 15))
    return report(6, "Distinct metrics", exact and invariant,
                  f"hand-counted fixtures exact: {exact}; invariant over 20 shuffles: {invariant}")


# 7 ---------------------------------------------------------------------------

def check_diversity_direction(tmp_path):
    rows, wins = [], 0
    for seed in range(10):
        cfg = write_toy(tmp_path / f"toy{seed}", seed)
        res = run_pipeline(cfg)
        dpp = res.report.summary[("dpp", 5, "distinct_1")]
        score = res.report.summary[("score", 5, "distinct_1")]
        wins += dpp >= score
        rows.append(f"{100 * dpp:.1f}/{100 * score:.1f}")
    return report(7, "diversity direction", wins == 10,
                  f"Distinct-1@5 DPP >= score order on {wins}/10 corpora (dpp/score: {', '.join(rows)})")


# 8 ---------------------------------------------------------------------------

GLUED_REVIEW = "听着听着，就哭了，这首歌的MV我看过，男主角不帅，女主角不错，故事的最后令人感动。"
GLUED_REVIEW_SENTENCES = ["听着听着，就哭了。", "这首歌的MV我看过，男主角不帅，女主角不错。", "故事的最后令人感动。"]


class _GluedReviewLabels:
    def predict(self, review_id, text, sites):
        return [PunctLabel.FullStop if s.context_left[-1:] in ("了", "错") else s.original for s in sites]


def check_punctuation():
    lines = toy.synthetic_punct_corpus(2000, seed=0)
    cut = int(0.8 * len(lines))
    model = train_punct(lines[:cut], seed=0)
    acc = evaluate_punct(model, lines[cut:])
    corrected = correct_review(_GluedReviewLabels(), "t1", GLUED_REVIEW)
    split = [s.text for s in split_sentences(corrected, "song", "t1", 0)]
    ok = acc >= 0.95 and split == GLUED_REVIEW_SENTENCES
    return report(8, "punctuation baseline", ok,
                  f"held-out accuracy {100 * acc:.2f}% (>= 95%); worked example -> {len(split)} sentences, "
                  f"exact match: {split == GLUED_REVIEW_SENTENCES}")


# 9 ---------------------------------------------------------------------------

def check_scaling():
    rng = np.random.default_rng(909)
    same = 0
    for _ in range(20):
        n = int(rng.integers(5, 40))
        q = rng.random(n) * 1.8 + 1e-3
        F = rng.dirichlet(np.ones(8), size=n)
        k = min(10, n)
        a = greedy_map(build_kernel(q, F), k).ids
        b = greedy_map(build_kernel(7.3 * q, F), k).ids
        same += a == b
    return report(9, "argmax invariance under x7.3", same == 20, f"{same}/20 selection sequences unchanged")


# 10 --------------------------------------------------------------------------

def check_determinism(tmp_path):
    cfg = write_toy(tmp_path / "toy", 0)
    trees = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        run_pipeline(cfg, out, keep_intermediates=True)
        trees.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    identical = trees[0] == trees[1] and len(trees[0]) >= 10
    split = json.loads(trees[0]["intermediate/split.json"])
    c = split["counts"]
    rest = c["train"] + c["validation"]
    counts_ok = (c["test_songs"] == 9 and c["test"] == 450 and c["train"] == math.floor(0.8 * rest))
    per_song = all(sum(1 for t in split["test"] if t.startswith(s + "/")) == 50 for s in split["test_songs"])
    ok = identical and counts_ok and per_song
    return report(10, "end-to-end determinism", ok,
                  f"{len(trees[0])} output files byte-identical: {identical}; split {c['test_songs']} songs x 50 = "
                  f"{c['test']}, train/validation {c['train']}/{c['validation']} = floor(0.8*{rest}): {counts_ok}")


# 11 --------------------------------------------------------------------------

def fleiss_closed_form(table):
    """Fleiss' kappa in exact rational arithmetic from a category-count table."""
    N, n = len(table), sum(table[0])
    P_bar = sum(Fraction(sum(c * c for c in row) - n, n * (n - 1)) for row in table) / N
    p = [Fraction(sum(row[j] for row in table), N * n) for j in range(len(table[0]))]
    P_e = sum(x * x for x in p)
    return (P_bar - P_e) / (1 - P_e)


def check_fleiss():
    perfect = fleiss_kappa([["tip"] * 3, ["non"] * 3, ["tip"] * 3, ["tip"] * 3])
    split_vote = [["tip", "tip", "non", "non"], ["tip", "tip", "non", "non"]]
    mixed = [["tip", "tip", "tip"], ["tip", "tip", "non"], ["tip", "non", "non"], ["non", "non", "non"],
             ["tip", "tip", "non"]]
    errs = []
    for ratings in (split_vote, mixed):
        table = [[r.count("non"), r.count("tip")] for r in ratings]
        errs.append(abs(fleiss_kappa(ratings) - float(fleiss_closed_form(table))))
    ok = perfect == 1.0 and max(errs) <= 1e-12 and fleiss_kappa(split_vote) == pytest.approx(-1 / 3, abs=1e-12)
    return report(11, "Fleiss' kappa", ok,
                  f"perfect agreement -> {perfect}; split-vote -> {fleiss_kappa(split_vote):.12f} (-1/3); "
                  f"max |err| vs exact formula {max(errs):.1e}")


# pytest entry points ---------------------------------------------------------

def _emit(capsys, fn, *args):
    with capsys.disabled():
        ok = fn(*args)
    assert ok, RESULTS[max(RESULTS)][1]


class TestAcceptance:
    def test_01_greedy_exactness(self, capsys):
        _emit(capsys, check_greedy_exactness)

    def test_02_gain_fidelity(self, capsys):
        _emit(capsys, check_gain_fidelity)

    def test_03_graph_rank(self, capsys):
        _emit(capsys, check_graph_rank)

    def test_04_copy_count(self, capsys):
        _emit(capsys, check_copy_count)

    def test_05_plsa(self, capsys):
        _emit(capsys, check_plsa)

    def test_06_distinct(self, capsys):
        _emit(capsys, check_distinct)

    def test_07_diversity_direction(self, capsys, tmp_path):
        _emit(capsys, check_diversity_direction, tmp_path)

    def test_08_punctuation(self, capsys):
        _emit(capsys, check_punctuation)

    def test_09_scaling(self, capsys):
        _emit(capsys, check_scaling)

    def test_10_determinism(self, capsys, tmp_path):
        _emit(capsys, check_determinism, tmp_path)

    def test_11_fleiss(self, capsys):
        _emit(capsys, check_fleiss)


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        results = [
            check_greedy_exactness(), check_gain_fidelity(), check_graph_rank(), check_copy_count(),
            check_plsa(), check_distinct(), check_diversity_direction(Path(d) / "c7"), check_punctuation(),
            check_scaling(), check_determinism(Path(d) / "c10"), check_fleiss(),
        ]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
