import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from songtips import toy
from songtips.corpus import RawReview
from songtips.linear import TrainingError
from songtips.segmenter import (
    ExternalLabels,
    IdentityPredictor,
    PunctLabel,
    PunctModel,
    classify_site,
    correct_review,
    dumps_model,
    evaluate_punct,
    extract_sites,
    segment_review,
    split_sentences,
    train_punct,
)

GLUED_REVIEW = "听着听着，就哭了，这首歌的MV我看过，男主角不帅，女主角不错，故事的最后令人感动。"
GLUED_REVIEW_FIXED = "听着听着，就哭了。这首歌的MV我看过，男主角不帅，女主角不错。故事的最后令人感动。"
GLUED_REVIEW_SENTENCES = ["听着听着，就哭了。", "这首歌的MV我看过，男主角不帅，女主角不错。", "故事的最后令人感动。"]


class StubPredictor:
    """Turns the commas after 了 and 错 into full stops, as in the worked example."""

    def predict(self, review_id, text, sites):
        return [PunctLabel.FullStop if s.context_left[-1:] in ("了", "错") else s.original for s in sites]


@pytest.fixture(scope="module")
def synthetic():
    lines = toy.synthetic_punct_corpus(2000, seed=0)
    cut = int(0.8 * len(lines))
    return lines[:cut], lines[cut:], train_punct(lines[:cut], seed=0)


class TestSites:
    def test_scan(self):
        sites = extract_sites("r", "听着，就哭了。")
        assert [(s.char_index, s.original) for s in sites] == [(2, PunctLabel.Comma), (6, PunctLabel.FullStop)]

    def test_none(self):
        assert extract_sites("r", "没有标点") == []

    def test_leading_site_clipped(self):
        s = extract_sites("r", "，好听", window=8)[0]
        assert s.context_left == "" and s.context_right == "好听"

    def test_window_clipping(self):
        s = extract_sites("r", "abcdefghij,klm", window=3)[0]
        assert s.context_left == "hij" and s.context_right == "klm"


class TestCorrection:
    def test_table1(self):
        assert correct_review(StubPredictor(), "r", GLUED_REVIEW) == GLUED_REVIEW_FIXED

    def test_table1_split(self):
        sents = split_sentences(GLUED_REVIEW_FIXED, "song", "r", 5)
        assert [s.text for s in sents] == GLUED_REVIEW_SENTENCES
        assert all(s.approvals == 5 for s in sents)

    def test_identity(self):
        assert correct_review(IdentityPredictor(), "r", GLUED_REVIEW) == GLUED_REVIEW

    def test_empty_deletes(self):
        class Drop:
            def predict(self, review_id, text, sites):
                return [PunctLabel.Empty for _ in sites]

        assert correct_review(Drop(), "r", "好，听") == "好听"

    def test_ascii_punctuation_stays_narrow(self):
        class Stop:
            def predict(self, review_id, text, sites):
                return [PunctLabel.FullStop for _ in sites]

        assert correct_review(Stop(), "r", "nice, song") == "nice. song"

    @settings(max_examples=50, deadline=None)
    @given(st.text(alphabet="ab好，。,. ", max_size=40), st.randoms(use_true_random=False))
    def test_non_punct_preserved(self, text, rnd):
        class Random:
            def predict(self, review_id, text, sites):
                return [PunctLabel(rnd.randrange(3)) for _ in sites]

        strip = lambda s: [c for c in s if c not in "，。,."]  # noqa: E731
        assert strip(correct_review(Random(), "r", text)) == strip(text)

    def test_external_labels(self, tmp_path):
        p = tmp_path / "labels.jsonl"
        p.write_text(
            json.dumps({"review_id": "r", "char_index": 8, "label": "FullStop"}) + "\n"
            + json.dumps({"review_id": "r", "char_index": 30, "label": "FullStop"}) + "\n",
            encoding="utf-8",
        )
        assert correct_review(ExternalLabels.load(p), "r", GLUED_REVIEW) == GLUED_REVIEW_FIXED


class TestSplit:
    def test_trailing_fragment_kept(self):
        sents = split_sentences("abc", "s", "r", 0, min_tokens=1)
        assert [s.text for s in sents] == ["abc"]

    def test_only_terminators(self):
        assert split_sentences("。。。", "s", "r", 0) == []

    def test_min_tokens_drops_short(self):
        assert [s.text for s in split_sentences("好。很好听。", "s", "r", 0)] == ["很好听。"]

    def test_bang_and_question_terminate(self):
        assert len(split_sentences("太好听了！谁在听？", "s", "r", 0)) == 2

    @given(st.lists(st.text(alphabet="abc好听 ", min_size=1, max_size=8), min_size=1, max_size=6))
    def test_reconstruction(self, parts):
        text = "。".join(parts) + "。"
        sents = split_sentences(text, "s", "r", 0, min_tokens=1)
        kept = [(p + "。").strip() for p in parts if p.strip()]
        assert [s.text for s in sents] == kept

    def test_segment_review(self):
        review = RawReview("song", "r1", GLUED_REVIEW, 42)
        sents = segment_review(StubPredictor(), review)
        assert [s.sentence_id for s in sents] == ["song/r1/0", "song/r1/1", "song/r1/2"]


class TestPunctModel:
    def test_synthetic_accuracy(self, synthetic):
        _, held, model = synthetic
        assert evaluate_punct(model, held) >= 0.95

    def test_loss_non_increasing(self, synthetic):
        assert np.all(np.diff(synthetic[2].losses) <= 1e-9)

    def test_probabilities_on_simplex(self, synthetic):
        model = synthetic[2]
        for site in extract_sites("r", synthetic[1][0]):
            p = classify_site(model, site).probabilities
            assert sum(p) == pytest.approx(1.0, abs=1e-9)
            assert min(p) >= 0

    def test_end_context_is_full_stop(self, synthetic):
        model = synthetic[2]
        site = extract_sites("r", "motou pera END，zeni")[0]
        assert classify_site(model, site).label == PunctLabel.FullStop

    def test_empty_context_gives_prior(self, synthetic):
        model = synthetic[2]
        pred = classify_site(model, extract_sites("r", "，")[0])
        assert pred.label == PunctLabel(int(np.argmax(model.class_prior)))
        np.testing.assert_allclose(pred.probabilities, model.class_prior)

    def test_deterministic(self):
        lines = toy.synthetic_punct_corpus(200, seed=3)
        a, b = train_punct(lines, seed=7), train_punct(lines, seed=7)
        assert a.vocabulary == b.vocabulary
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_missing_class(self):
        with pytest.raises(TrainingError, match="Comma"):
            train_punct(["好听。", "真好听。"], seed=0)

    def test_roundtrip_byte_identical(self, synthetic, tmp_path):
        model = synthetic[2]
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        model.save(p1)
        PunctModel.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert dumps_model(PunctModel.load(p2).to_dict()) == p1.read_text(encoding="utf-8")

    def test_tie_break_order(self):
        model = PunctModel({}, np.zeros((0, 3)), np.zeros(3), np.array([0.2, 0.4, 0.4]))
        assert model.classify(extract_sites("r", "好，听")[0]).label == PunctLabel.FullStop
        assert model.classify(extract_sites("r", "，")[0]).label == PunctLabel.Comma
