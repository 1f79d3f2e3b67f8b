"""Question-sentence pair scoring.

A weighted logistic regression over embedding pair features stands in for
a fine-tuned transformer at desk scale: features are
[q, s, |q - s|, q * s, cosine(q, s)] built from mean sentence embeddings.
Positives carry a class weight (default: the negative:positive ratio) to
counter the heavy label imbalance, and the decision threshold is
calibrated on dev scores for maximum F1. An external scorer hook lets a
stronger model served as a child process replace the built-in scoring.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import struct
import subprocess
from dataclasses import dataclass, replace

import numpy as np

from .dataset import POSITIVE, QAPair, TcfdQuestion, load_questions
from .embeddings import DimensionMismatch, EmbeddingModel, NonFiniteLoss, cosine, embed_sentence

logger = logging.getLogger(__name__)

CLASSIFIER_MAGIC = b"PCLS1"


class ClassifierError(Exception):
    pass


class SingleClassData(ClassifierError):
    """Training data contains only one label."""


class NoPositives(ClassifierError):
    """Threshold calibration needs at least one positive dev pair."""


class ScorerUnavailable(ClassifierError):
    """External scorer process could not be started or died early."""


class ProtocolError(ClassifierError):
    """External scorer broke the line protocol."""


@dataclass(frozen=True, kw_only=True)
class ClassifierConfig:
    seed: int
    learning_rate: float = 0.05
    epochs: int = 20
    l2: float = 1e-4
    class_weight_pos: float | None = None  # default #neg/#pos at fit time

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs <= 0 or self.l2 < 0:
            raise ValueError("bad classifier config")
        if self.class_weight_pos is not None and self.class_weight_pos <= 0:
            raise ValueError("class_weight_pos must be positive")


@dataclass(frozen=True)
class PairClassifier:
    feature_dim: int
    weights: np.ndarray  # (feature_dim,) float64
    bias: float
    threshold: float
    class_weight_pos: float
    train_config: dict
    embedding_ref: str

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0,1), got {self.threshold}")
        if self.weights.shape != (self.feature_dim,):
            raise ValueError("weights length != feature_dim")
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("non-finite classifier parameters")


def feature_dim_for(model: EmbeddingModel) -> int:
    return 4 * model.dim + 1


def embedding_fingerprint(model: EmbeddingModel) -> str:
    """Content hash tying a classifier to the embeddings it was trained on."""
    h = hashlib.sha1()
    h.update(struct.pack("<I", model.dim))
    h.update(np.ascontiguousarray(model.input_vectors, dtype="<f4").tobytes())
    return h.hexdigest()[:16]


def _pair_features(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.concatenate([q, s, np.abs(q - s), q * s, [cosine(q, s)]])


def featurize(model: EmbeddingModel, question_text: str, sentence_text: str) -> np.ndarray:
    """Deterministic pair feature vector of length 4*dim + 1."""
    q = embed_sentence(model, question_text).astype(np.float64)
    s = embed_sentence(model, sentence_text).astype(np.float64)
    return _pair_features(q, s)


def featurize_pairs(
    model: EmbeddingModel,
    pairs: list[QAPair],
    questions: list[TcfdQuestion] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and 0/1 label vector for a list of pairs."""
    questions = questions or load_questions()
    q_text = {q.qid: q.text for q in questions}
    q_vecs = {qid: embed_sentence(model, text).astype(np.float64) for qid, text in q_text.items()}
    rows = []
    labels = []
    for p in pairs:
        q = q_vecs[p.qid]
        s = embed_sentence(model, p.sentence_text).astype(np.float64)
        rows.append(_pair_features(q, s))
        labels.append(1.0 if p.label == POSITIVE else 0.0)
    dim = feature_dim_for(model)
    X = np.vstack(rows) if rows else np.empty((0, dim))
    return X, np.asarray(labels)


def _sigmoid(z):
    e = np.exp(-np.abs(z))
    pos = 1.0 / (1.0 + e)
    return np.where(z >= 0, pos, 1.0 - pos)


def logistic_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    l2: float,
):
    """Weighted logistic loss with L2 on the weights (not the bias).

    loss = sum_i w_i [ y_i softplus(-z_i) + (1-y_i) softplus(z_i) ]
           + (l2/2) ||weights||^2,  z_i = weights.x_i + bias
    """
    z = X @ weights + bias
    loss = float(
        np.sum(sample_weight * (y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)))
        + 0.5 * l2 * float(weights @ weights)
    )
    residual = sample_weight * (_sigmoid(z) - y)
    grad_w = X.T @ residual + l2 * weights
    grad_b = float(np.sum(residual))
    return loss, grad_w, grad_b


def train_classifier(
    train_pairs: list[QAPair],
    embedding_model: EmbeddingModel,
    config: ClassifierConfig,
    questions: list[TcfdQuestion] | None = None,
) -> PairClassifier:
    """Fit by seeded per-sample SGD on the weighted logistic loss."""
    X, y = featurize_pairs(embedding_model, train_pairs, questions)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassData(f"need both labels, got {n_pos} positives / {n_neg} negatives")
    cw = config.class_weight_pos if config.class_weight_pos is not None else n_neg / n_pos
    sample_weight = np.where(y == 1.0, cw, 1.0)

    n, d = X.shape
    weights = np.zeros(d)
    bias = 0.0
    rng = np.random.default_rng(config.seed)
    reg_scale = config.l2 / n
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for i in order:
            z = float(X[i] @ weights + bias)
            residual = sample_weight[i] * (float(_sigmoid(z)) - y[i])
            weights -= config.learning_rate * (residual * X[i] + reg_scale * weights)
            bias -= config.learning_rate * residual
        loss, _, _ = logistic_loss_and_grad(weights, bias, X, y, sample_weight, config.l2)
        if not loss < 1e30:
            raise NonFiniteLoss(f"epoch {epoch}: loss {loss}; lower the learning rate")
        logger.debug("classifier epoch %d: loss %.5f", epoch, loss)

    return PairClassifier(
        feature_dim=d,
        weights=weights,
        bias=bias,
        threshold=0.5,
        class_weight_pos=float(cw),
        train_config={
            "seed": config.seed, "learning_rate": config.learning_rate,
            "epochs": config.epochs, "l2": config.l2,
            "class_weight_pos": config.class_weight_pos,
        },
        embedding_ref=embedding_fingerprint(embedding_model),
    )


def score_features(classifier: PairClassifier, features: np.ndarray) -> float:
    if features.shape != (classifier.feature_dim,):
        raise DimensionMismatch(
            f"features of length {features.shape} vs classifier dim {classifier.feature_dim}"
        )
    return float(_sigmoid(float(features @ classifier.weights + classifier.bias)))


def predict(
    classifier: PairClassifier,
    embedding_model: EmbeddingModel,
    question_text: str,
    sentence_text: str,
) -> float:
    """Answer probability for one (question, sentence) pair."""
    if feature_dim_for(embedding_model) != classifier.feature_dim:
        raise DimensionMismatch(
            f"embedding dim {embedding_model.dim} gives {feature_dim_for(embedding_model)} "
            f"features but classifier expects {classifier.feature_dim}"
        )
    return score_features(classifier, featurize(embedding_model, question_text, sentence_text))


def is_answer(classifier: PairClassifier, score: float) -> bool:
    return score >= classifier.threshold


def score_pairs(
    classifier: PairClassifier,
    embedding_model: EmbeddingModel,
    pairs: list[QAPair],
    questions: list[TcfdQuestion] | None = None,
) -> np.ndarray:
    if feature_dim_for(embedding_model) != classifier.feature_dim:
        raise DimensionMismatch("embedding model does not match classifier")
    X, _ = featurize_pairs(embedding_model, pairs, questions)
    if not len(X):
        return np.empty(0)
    return _sigmoid(X @ classifier.weights + classifier.bias)


def score_question_sentences(
    classifier: PairClassifier,
    embedding_model: EmbeddingModel,
    question_text: str,
    sentence_texts: list[str],
) -> np.ndarray:
    """Scores for one question against many sentences (question embedded once)."""
    if feature_dim_for(embedding_model) != classifier.feature_dim:
        raise DimensionMismatch("embedding model does not match classifier")
    if not sentence_texts:
        return np.empty(0)
    q = embed_sentence(embedding_model, question_text).astype(np.float64)
    X = np.vstack([
        _pair_features(q, embed_sentence(embedding_model, s).astype(np.float64))
        for s in sentence_texts
    ])
    return _sigmoid(X @ classifier.weights + classifier.bias)


def _f1_at(scores: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    decisions = scores >= threshold
    tp = int(np.sum(decisions & (labels == 1.0)))
    fp = int(np.sum(decisions & (labels == 0.0)))
    fn = int(np.sum(~decisions & (labels == 1.0)))
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def calibrate_threshold(
    classifier: PairClassifier,
    dev_pairs: list[QAPair],
    embedding_model: EmbeddingModel,
    questions: list[TcfdQuestion] | None = None,
) -> PairClassifier:
    """Pick the midpoint threshold maximizing dev F1 (ties -> lower cut)."""
    if not dev_pairs:
        raise NoPositives("empty dev set")
    labels = np.asarray([1.0 if p.label == POSITIVE else 0.0 for p in dev_pairs])
    if not labels.any():
        raise NoPositives("dev set has no positive pairs")
    scores = score_pairs(classifier, embedding_model, dev_pairs, questions)
    threshold = best_f1_threshold(scores, labels)
    return replace(classifier, threshold=threshold)


def best_f1_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Candidate cuts are midpoints between consecutive sorted scores, plus
    one extension below the minimum and above the maximum."""
    uniq = np.unique(scores)
    candidates = [uniq[0] / 2.0]
    candidates.extend((uniq[i] + uniq[i + 1]) / 2.0 for i in range(len(uniq) - 1))
    candidates.append((uniq[-1] + 1.0) / 2.0)
    best_threshold = candidates[0]
    best_f1 = -1.0
    for cand in candidates:  # ascending; strict improvement keeps lowest cut
        f1 = _f1_at(scores, labels, cand)
        if f1 > best_f1:
            best_f1 = f1
            best_threshold = cand
    return float(min(max(best_threshold, 1e-9), 1.0 - 1e-9))


# --------------------------------------------------------------------------
# External scorer: one request line per pair on stdin, one score per line
# back on stdout, in order.
# --------------------------------------------------------------------------

def external_scorer_roundtrip(
    command: list[str],
    batch: list[tuple[int, str, str]],
    timeout: float = 60.0,
) -> list[float]:
    """Send ``qid<TAB>question<TAB>sentence`` lines to the child process and
    collect one decimal score in [0,1] per line, order-preserving."""
    def clean(s: str) -> str:
        return s.replace("\t", " ").replace("\n", " ").replace("\r", " ")

    payload = "".join(f"{qid}\t{clean(q)}\t{clean(s)}\n" for qid, q, s in batch)
    try:
        proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )
    except (OSError, ValueError) as exc:
        raise ScorerUnavailable(f"cannot start scorer {command!r}: {exc}") from exc
    try:
        out, _ = proc.communicate(payload, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        proc.kill()
        raise ScorerUnavailable(f"scorer timed out after {timeout}s") from exc
    lines = out.splitlines()
    if len(lines) != len(batch):
        raise ProtocolError(f"sent {len(batch)} pairs, got {len(lines)} scores")
    scores = []
    for i, line in enumerate(lines):
        try:
            value = float(line.strip())
        except ValueError as exc:
            raise ProtocolError(f"line {i + 1}: non-numeric score {line!r}") from exc
        if not 0.0 <= value <= 1.0 or not math.isfinite(value):
            raise ProtocolError(f"line {i + 1}: score {value} outside [0,1]")
        scores.append(value)
    return scores


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def save_classifier(classifier: PairClassifier, sink) -> None:
    close = False
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        sink = open(sink, "wb")
        close = True
    try:
        sink.write(CLASSIFIER_MAGIC)
        sink.write(struct.pack(
            "<Iddd", classifier.feature_dim, classifier.bias,
            classifier.threshold, classifier.class_weight_pos,
        ))
        ref = classifier.embedding_ref.encode("utf-8")
        sink.write(struct.pack("<I", len(ref)))
        sink.write(ref)
        cfg = json.dumps(classifier.train_config, sort_keys=True).encode("utf-8")
        sink.write(struct.pack("<I", len(cfg)))
        sink.write(cfg)
        sink.write(np.ascontiguousarray(classifier.weights, dtype="<f8").tobytes())
    finally:
        if close:
            sink.close()


def load_classifier(source) -> PairClassifier:
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            data = fh.read()
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = bytes(source)
    buf = io.BytesIO(data)
    if buf.read(len(CLASSIFIER_MAGIC)) != CLASSIFIER_MAGIC:
        raise ClassifierError("not a classifier file (bad magic)")
    feature_dim, bias, threshold, cw = struct.unpack("<Iddd", buf.read(28))
    (rlen,) = struct.unpack("<I", buf.read(4))
    ref = buf.read(rlen).decode("utf-8")
    (clen,) = struct.unpack("<I", buf.read(4))
    cfg = json.loads(buf.read(clen).decode("utf-8")) if clen else {}
    weights = np.frombuffer(buf.read(8 * feature_dim), dtype="<f8").copy()
    return PairClassifier(
        feature_dim=feature_dim, weights=weights, bias=bias, threshold=threshold,
        class_weight_pos=cw, train_config=cfg, embedding_ref=ref,
    )
