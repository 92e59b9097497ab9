import numpy as np
import pytest

from songtips.topic_model import (
    TopicModel,
    TopicModelError,
    infer_topics,
    smooth,
    topic_vectors,
    train_plsa,
)


def random_docs(rng, n_docs, vocab):
    return [[f"w{x}" for x in rng.integers(vocab, size=int(rng.integers(1, 12)))] for _ in range(n_docs)]


def disjoint_docs(n=10):
    a = ["apple", "pear", "plum", "fig"]
    b = ["drum", "bass", "horn", "flute"]
    return [[a[i % 4], a[(i + 1) % 4], a[(i + 2) % 4]] for i in range(n)] + \
           [[b[i % 4], b[(i + 1) % 4], b[(i + 2) % 4]] for i in range(n)]


class TestSmooth:
    def test_zero_row_uniform(self):
        out = smooth(np.zeros((2, 4)))
        np.testing.assert_allclose(out, 0.25)

    def test_large_counts_barely_move(self):
        row = np.array([[1e6, 3e5, 0.0, 2e4]])
        raw = row / row.sum()
        out = smooth(row)
        nz = raw > 0
        assert np.max(np.abs(out[nz] - raw[nz]) / raw[nz]) < 1e-4

    def test_epsilon_zero_is_plain_normalization(self):
        row = np.array([[3.0, 1.0, 0.0]])
        np.testing.assert_array_equal(smooth(row, 0.0), row / 4.0)

    def test_rows_on_simplex(self, rng):
        out = smooth(rng.random((5, 7)) * 10)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(out > 0)


class TestTraining:
    def test_loglik_monotone_default(self, rng, backend):
        for _ in range(10):
            m = train_plsa(random_docs(rng, 20, 30), topics=4, iterations=40, seed=int(rng.integers(1000)),
                           backend=backend)
            assert np.diff(m.objective).min() >= -1e-9

    def test_loglik_monotone_unsmoothed(self, rng):
        for _ in range(10):
            m = train_plsa(random_docs(rng, 20, 30), topics=4, iterations=40, epsilon=0.0)
            assert np.diff(m.log_likelihood).min() >= -1e-9
            assert m.objective == m.log_likelihood

    def test_history_length(self, rng):
        m = train_plsa(random_docs(rng, 10, 10), topics=3, iterations=7)
        assert len(m.log_likelihood) == 8 and len(m.objective) == 8

    def test_simplex(self, rng):
        m = train_plsa(random_docs(rng, 25, 40), topics=5, iterations=30)
        assert m.topic_given_doc.shape == (25, 5)
        assert m.word_given_topic.shape == (5, len(m.vocabulary))
        np.testing.assert_allclose(m.topic_given_doc.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(m.word_given_topic.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(m.topic_given_doc >= 0) and np.all(m.word_given_topic >= 0)

    def test_disjoint_vocabularies_separate(self):
        docs = disjoint_docs()
        m = train_plsa(docs, topics=2, iterations=100, seed=3)
        dominant = m.topic_given_doc.argmax(axis=1)
        assert len(set(dominant[:10])) == 1 and len(set(dominant[10:])) == 1
        assert dominant[0] != dominant[10]
        assert m.topic_given_doc.max(axis=1).min() > 0.99

    def test_single_topic(self, rng):
        m = train_plsa(random_docs(rng, 6, 8), topics=1, iterations=5)
        np.testing.assert_array_equal(m.topic_given_doc, 1.0)

    def test_deterministic(self, rng):
        docs = random_docs(rng, 15, 20)
        a = train_plsa(docs, topics=3, iterations=20, seed=9)
        b = train_plsa(docs, topics=3, iterations=20, seed=9)
        np.testing.assert_array_equal(a.topic_given_doc, b.topic_given_doc)
        np.testing.assert_array_equal(a.word_given_topic, b.word_given_topic)

    def test_backends_agree(self, rng):
        docs = random_docs(rng, 15, 20)
        a = train_plsa(docs, topics=3, iterations=20, backend="python")
        b = train_plsa(docs, topics=3, iterations=20)
        np.testing.assert_allclose(a.topic_given_doc, b.topic_given_doc, atol=1e-10)
        np.testing.assert_allclose(a.log_likelihood, b.log_likelihood, rtol=1e-12)

    def test_fewer_docs_than_topics(self):
        with pytest.raises(TopicModelError):
            train_plsa([["a"], ["b"]], topics=3)

    def test_empty_vocabulary(self):
        with pytest.raises(TopicModelError):
            train_plsa([[], []], topics=1)

    def test_bad_topic_count(self):
        with pytest.raises(TopicModelError):
            train_plsa([["a"]], topics=0)


class TestFoldIn:
    def test_matches_trained_row(self):
        docs = disjoint_docs()
        m = train_plsa(docs, topics=2, iterations=100, seed=3)
        for i in (0, 4, 12, 17):
            folded = infer_topics(m, docs[i])
            assert 0.5 * np.abs(folded - m.topic_given_doc[i]).sum() < 0.05

    def test_all_oov_uniform(self, rng):
        m = train_plsa(random_docs(rng, 10, 10), topics=4, iterations=10)
        np.testing.assert_array_equal(infer_topics(m, ["zzz", "qqq"]), 0.25)
        np.testing.assert_array_equal(infer_topics(m, []), 0.25)

    def test_topic_vectors(self, rng):
        docs = random_docs(rng, 10, 10)
        m = train_plsa(docs, topics=2, iterations=10)
        np.testing.assert_array_equal(topic_vectors(m), m.topic_given_doc)
        v = topic_vectors(m, [["w1", "w2"], ["nope"]])
        assert v.shape == (2, 2)
        np.testing.assert_allclose(v.sum(axis=1), 1.0, atol=1e-12)


class TestPersistence:
    def test_round_trip(self, rng, tmp_path):
        m = train_plsa(random_docs(rng, 12, 15), topics=3, iterations=10)
        path = tmp_path / "topics.json"
        m.save(path)
        back = TopicModel.load(path)
        np.testing.assert_array_equal(back.word_given_topic, m.word_given_topic)
        np.testing.assert_array_equal(back.topic_given_doc, m.topic_given_doc)
        assert back.vocabulary == m.vocabulary
        assert back.log_likelihood == m.log_likelihood and back.objective == m.objective

    def test_wrong_format(self):
        with pytest.raises(ValueError):
            TopicModel.from_dict({"format": "other"})
