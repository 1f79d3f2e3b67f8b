"""Classifier tests.

The separable fixture's feasibility is proven inside the test by
exhibiting an explicit separating weight vector; the gradient oracle is a
finite difference of an independently written loss.
"""

import io
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disclosure_qa.classifier import (
    ClassifierConfig,
    NoPositives,
    PairClassifier,
    ProtocolError,
    ScorerUnavailable,
    SingleClassData,
    best_f1_threshold,
    calibrate_threshold,
    external_scorer_roundtrip,
    feature_dim_for,
    featurize,
    featurize_pairs,
    load_classifier,
    logistic_loss_and_grad,
    predict,
    save_classifier,
    score_features,
    score_pairs,
    train_classifier,
)
from disclosure_qa.dataset import NEGATIVE, POSITIVE, QAPair
from disclosure_qa.embeddings import DimensionMismatch, EmbeddingModel, Vocab
from disclosure_qa.pdf_extract import Sector


def toy_model(token_vectors: dict[str, list[float]]) -> EmbeddingModel:
    tokens = {t: i for i, t in enumerate(token_vectors)}
    mat = np.array(list(token_vectors.values()), dtype=np.float32)
    vocab = Vocab(token_to_id=tokens, counts=tuple([10] * len(tokens)), min_count=1,
                  total_tokens=10 * len(tokens))
    return EmbeddingModel(dim=mat.shape[1], vocab=vocab, input_vectors=mat,
                          output_vectors=np.zeros_like(mat))


def make_pair(text, label, qid=1, sent_id=0):
    return QAPair(qid=qid, doc_id="d", sent_id=sent_id, sentence_text=text,
                  label=label, company="c", sector=Sector.OTHER)


def build_separable():
    """Embedding model and pairs separable on the first sentence axis."""
    rng = np.random.default_rng(5)
    dim = 8
    token_vectors = {}
    for i in range(5):
        v = rng.normal(size=dim)
        v[0] = abs(v[0]) + 1.0
        token_vectors[f"pos{i}"] = v.tolist()
    for i in range(5):
        v = rng.normal(size=dim)
        v[0] = -abs(v[0]) - 1.0
        token_vectors[f"neg{i}"] = v.tolist()
    model = toy_model(token_vectors)
    pairs = []
    draw = np.random.default_rng(17)
    for k in range(60):
        positive = k % 3 == 0
        pool = [f"pos{i}" for i in range(5)] if positive else [f"neg{i}" for i in range(5)]
        text = " ".join(draw.choice(pool, size=3))
        pairs.append(make_pair(text, POSITIVE if positive else NEGATIVE,
                               qid=int(draw.integers(1, 15)), sent_id=k))
    return model, pairs


@pytest.fixture(scope="module")
def separable():
    return build_separable()


def manual_f1(scores, labels, threshold):
    dec = scores >= threshold
    tp = int(np.sum(dec & (labels == 1.0)))
    fp = int(np.sum(dec & (labels == 0.0)))
    fn = int(np.sum(~dec & (labels == 1.0)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


class TestFeaturize:
    def test_identical_texts(self):
        model = toy_model({"risk": [1.0, 2.0]})
        f = featurize(model, "risk", "risk")
        dim = 2
        assert np.array_equal(f[2 * dim: 3 * dim], [0.0, 0.0])  # |q-s| block
        assert f[-1] == pytest.approx(1.0)

    def test_fully_oov(self):
        model = toy_model({"risk": [1.0, 2.0]})
        f = featurize(model, "unseen words", "other unseen")
        assert not f.any()

    def test_orthogonal_example(self):
        model = toy_model({"q": [1.0, 0.0], "s": [0.0, 1.0]})
        f = featurize(model, "q", "s")
        assert f.tolist() == [1, 0, 0, 1, 1, 1, 0, 0, 0]

    def test_length(self):
        model = toy_model({"a": [0.5] * 7})
        assert featurize(model, "a", "a").shape == (feature_dim_for(model),)
        assert feature_dim_for(model) == 4 * 7 + 1


def ref_logistic_loss(w, b, X, y, sw, l2):
    """Independent reimplementation used only for the FD oracle."""
    z = X @ w + b
    p = 1.0 / (1.0 + np.exp(-z))
    return float(np.sum(sw * -(y * np.log(p) + (1 - y) * np.log(1 - p))) + 0.5 * l2 * w @ w)


class TestGradient:
    def test_matches_finite_differences_100_draws(self):
        rng = np.random.default_rng(8)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            n, d = 20, 5
            X = rng.normal(size=(n, d))
            y = (rng.random(n) < 0.3).astype(float)
            if not y.any() or y.all():
                y[0], y[1] = 1.0, 0.0
            sw = np.where(y == 1.0, 7.0, 1.0)
            w = rng.normal(size=d) * 0.5
            b = float(rng.normal() * 0.5)
            l2 = 0.01
            _, grad_w, grad_b = logistic_loss_and_grad(w, b, X, y, sw, l2)
            fd_w = np.zeros(d)
            for j in range(d):
                bump = np.zeros(d)
                bump[j] = h
                fd_w[j] = (ref_logistic_loss(w + bump, b, X, y, sw, l2)
                           - ref_logistic_loss(w - bump, b, X, y, sw, l2)) / (2 * h)
            fd_b = (ref_logistic_loss(w, b + h, X, y, sw, l2)
                    - ref_logistic_loss(w, b - h, X, y, sw, l2)) / (2 * h)
            scale = np.maximum(1.0, np.maximum(np.abs(grad_w), np.abs(fd_w)))
            worst = max(worst, float(np.max(np.abs(grad_w - fd_w) / scale)))
            worst = max(worst, abs(grad_b - fd_b) / max(1.0, abs(grad_b), abs(fd_b)))
        assert worst < 1e-5

    def test_loss_value_matches_reference(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(10, 3))
        y = (rng.random(10) < 0.5).astype(float)
        sw = np.ones(10)
        w, b = rng.normal(size=3), 0.1
        loss, _, _ = logistic_loss_and_grad(w, b, X, y, sw, 0.5)
        assert loss == pytest.approx(ref_logistic_loss(w, b, X, y, sw, 0.5), rel=1e-12)


class TestTraining:
    def test_separable_fixture_perfect_f1(self, separable):
        model, pairs = separable
        # the fixture really is separable: axis 0 of the sentence block
        X, y = featurize_pairs(model, pairs)
        w = np.zeros(feature_dim_for(model))
        w[model.dim] = 1.0
        assert np.all(((X @ w) > 0) == (y == 1.0))

        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        assert clf.threshold == 0.5
        scores = score_pairs(clf, model, pairs)
        assert manual_f1(scores, y, 0.5) == 1.0

    def test_default_class_weight_is_imbalance(self, separable):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        n_pos = sum(1 for p in pairs if p.label == POSITIVE)
        assert clf.class_weight_pos == pytest.approx((len(pairs) - n_pos) / n_pos)

    def test_single_class_raises(self, separable):
        model, pairs = separable
        only_neg = [p for p in pairs if p.label == NEGATIVE]
        with pytest.raises(SingleClassData):
            train_classifier(only_neg, model, ClassifierConfig(seed=1))

    def test_deterministic_bytes(self, separable):
        model, pairs = separable
        blobs = []
        for _ in range(2):
            clf = train_classifier(pairs, model, ClassifierConfig(seed=12))
            buf = io.BytesIO()
            save_classifier(clf, buf)
            blobs.append(buf.getvalue())
        assert blobs[0] == blobs[1]


class TestPredict:
    def test_zero_parameters_give_half(self):
        model = toy_model({"a": [1.0, 0.0]})
        clf = PairClassifier(
            feature_dim=feature_dim_for(model), weights=np.zeros(feature_dim_for(model)),
            bias=0.0, threshold=0.5, class_weight_pos=1.0, train_config={}, embedding_ref="x",
        )
        assert predict(clf, model, "a", "a") == 0.5

    def test_trained_scores_follow_labels(self, separable):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        assert predict(clf, model, "question text", "pos0 pos1 pos2") > 0.5
        assert predict(clf, model, "question text", "neg0 neg1 neg2") < 0.5

    def test_dimension_mismatch(self, separable):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        other = toy_model({"a": [1.0, 0.0, 0.0]})
        with pytest.raises(DimensionMismatch):
            predict(clf, other, "a", "a")

    @given(st.floats(-5, 5), st.floats(0.01, 5))
    @settings(max_examples=100)
    def test_score_strictly_monotone_in_margin(self, z, delta):
        clf = PairClassifier(
            feature_dim=1, weights=np.array([1.0]), bias=0.0, threshold=0.5,
            class_weight_pos=1.0, train_config={}, embedding_ref="x",
        )
        low = score_features(clf, np.array([z]))
        high = score_features(clf, np.array([z + delta]))
        assert high > low


class TestThresholdCalibration:
    def test_separable_midpoint(self):
        assert best_f1_threshold(np.array([0.1, 0.9]), np.array([0.0, 1.0])) == 0.5

    def test_inverted_scores_prefer_recall(self):
        scores = np.array([0.4, 0.6])
        labels = np.array([1.0, 0.0])
        threshold = best_f1_threshold(scores, labels)
        assert threshold < 0.4
        assert manual_f1(scores, labels, threshold) == pytest.approx(2 / 3)

    def test_no_positives_raises(self, separable):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        only_neg = [p for p in pairs if p.label == NEGATIVE]
        with pytest.raises(NoPositives):
            calibrate_threshold(clf, only_neg, model)
        with pytest.raises(NoPositives):
            calibrate_threshold(clf, [], model)

    def test_matches_brute_force_sweep(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            n = int(rng.integers(2, 21))
            scores = np.round(rng.random(n), 3)
            labels = (rng.random(n) < 0.4).astype(float)
            if not labels.any():
                labels[0] = 1.0
            threshold = best_f1_threshold(scores, labels)
            got = manual_f1(scores, labels, threshold)
            sweep = [manual_f1(scores, labels, t) for t in
                     np.concatenate([[0.0], np.sort(scores), [1.0 + 1e-9]])]
            assert got == pytest.approx(max(sweep))

    def test_threshold_within_extended_interval(self):
        rng = np.random.default_rng(33)
        for _ in range(50):
            scores = rng.random(int(rng.integers(2, 15)))
            labels = (rng.random(scores.size) < 0.5).astype(float)
            if not labels.any():
                labels[0] = 1.0
            threshold = best_f1_threshold(scores, labels)
            uniq = np.unique(scores)
            assert uniq[0] / 2 - 1e-12 <= threshold <= (uniq[-1] + 1) / 2 + 1e-12

    def test_calibrate_updates_only_threshold(self, separable):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        updated = calibrate_threshold(clf, pairs, model)
        assert np.array_equal(updated.weights, clf.weights)
        assert updated.bias == clf.bias
        assert 0.0 < updated.threshold < 1.0


ECHO_HALF = [sys.executable, "-c", "import sys\nfor _ in sys.stdin: print(0.5)"]
DROP_ONE = [sys.executable, "-c",
            "import sys\nlines = sys.stdin.readlines()\nfor l in lines[1:]: print(0.5)"]
NON_NUMERIC = [sys.executable, "-c", "import sys\nfor _ in sys.stdin: print('abc')"]
OUT_OF_RANGE = [sys.executable, "-c", "import sys\nfor _ in sys.stdin: print(1.5)"]

BATCH = [(1, "Does the org disclose?", "Yes it does."), (2, "Another?", "Maybe.")]


class TestExternalScorer:
    def test_echo_stub(self):
        assert external_scorer_roundtrip(ECHO_HALF, BATCH) == [0.5, 0.5]

    def test_count_mismatch(self):
        with pytest.raises(ProtocolError, match="got 1 scores"):
            external_scorer_roundtrip(DROP_ONE, BATCH)

    def test_scorer_absent(self):
        with pytest.raises(ScorerUnavailable):
            external_scorer_roundtrip(["/no/such/binary"], BATCH)

    def test_non_numeric(self):
        with pytest.raises(ProtocolError, match="non-numeric"):
            external_scorer_roundtrip(NON_NUMERIC, BATCH)

    def test_out_of_range(self):
        with pytest.raises(ProtocolError, match="outside"):
            external_scorer_roundtrip(OUT_OF_RANGE, BATCH)

    def test_tabs_in_text_sanitized(self):
        batch = [(1, "tab\there", "line\nbreak")]
        assert external_scorer_roundtrip(ECHO_HALF, batch) == [0.5]


class TestSerialization:
    def test_round_trip(self, separable):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        buf = io.BytesIO()
        save_classifier(clf, buf)
        assert buf.getvalue().startswith(b"PCLS1")
        loaded = load_classifier(io.BytesIO(buf.getvalue()))
        assert np.array_equal(loaded.weights, clf.weights)
        assert loaded.bias == clf.bias
        assert loaded.threshold == clf.threshold
        assert loaded.class_weight_pos == clf.class_weight_pos
        assert loaded.train_config == clf.train_config
        assert loaded.embedding_ref == clf.embedding_ref

    def test_path_round_trip(self, separable, tmp_path):
        model, pairs = separable
        clf = train_classifier(pairs, model, ClassifierConfig(seed=3))
        path = tmp_path / "clf.pcls"
        save_classifier(clf, path)
        assert np.array_equal(load_classifier(path).weights, clf.weights)
