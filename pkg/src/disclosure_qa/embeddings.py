"""Skip-gram negative-sampling word embeddings for the report corpus.

Per (center c, context o) pair the training loss is

    L = -log sigmoid(u_o . v_c) - sum_n log sigmoid(-u_n . v_c)

with k negatives drawn from the unigram distribution raised to 0.75.
Frequent tokens are subsampled with the usual keep probability
``(sqrt(f/t) + 1) * t/f`` and the learning rate decays linearly over the
run. Single-threaded training is bit-reproducible for a fixed seed; the
multi-worker mode updates shared rows without locks and trades that
reproducibility for throughput.
"""

from __future__ import annotations

import io
import json
import logging
import re
import struct
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"SGNS1"


class EmbeddingError(Exception):
    pass


class EmptyVocab(EmbeddingError):
    """No token survived the min_count filter."""


class NonFiniteLoss(EmbeddingError):
    """Training loss became NaN/Inf (learning rate too high)."""


class OutOfVocab(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


_TOKEN_RE = re.compile(r"\d+(?:\.\d+)+|[^\W_]+(?:-[^\W_]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics, keeping internal hyphens
    ("scope-3") and periods inside numbers ("1.5")."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict[str, int]
    counts: tuple[int, ...]  # indexed by token id
    min_count: int
    total_tokens: int

    def __len__(self) -> int:
        return len(self.token_to_id)

    @property
    def id_to_token(self) -> list[str]:
        out = [""] * len(self.token_to_id)
        for token, idx in self.token_to_id.items():
            out[idx] = token
        return out


def build_vocab(token_stream: Iterable[str], min_count: int) -> Vocab:
    """Count lowercased tokens, drop the rare ones, and assign dense ids by
    descending frequency (ties broken lexicographically)."""
    counts: dict[str, int] = {}
    total = 0
    for token in token_stream:
        token = token.lower()
        counts[token] = counts.get(token, 0) + 1
        total += 1
    kept = sorted(
        ((t, c) for t, c in counts.items() if c >= min_count),
        key=lambda tc: (-tc[1], tc[0]),
    )
    if not kept:
        raise EmptyVocab(f"no token reached min_count={min_count} (saw {total} tokens)")
    return Vocab(
        token_to_id={t: i for i, (t, _) in enumerate(kept)},
        counts=tuple(c for _, c in kept),
        min_count=min_count,
        total_tokens=total,
    )


@dataclass(frozen=True, kw_only=True)
class TrainConfig:
    seed: int
    dim: int = 100
    window: int = 5
    negatives: int = 5
    learning_rate: float = 0.025
    epochs: int = 5
    subsample_t: float = 1e-4
    min_count: int = 5

    def __post_init__(self) -> None:
        positive = {
            "dim": self.dim, "window": self.window, "negatives": self.negatives,
            "learning_rate": self.learning_rate, "epochs": self.epochs,
            "subsample_t": self.subsample_t, "min_count": self.min_count,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(eq=False)
class EmbeddingModel:
    dim: int
    vocab: Vocab
    input_vectors: np.ndarray   # (V, dim) float32; center-word vectors
    output_vectors: np.ndarray  # (V, dim) float32; context vectors
    train_config: TrainConfig | None = None
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        v = len(self.vocab)
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for name, m in (("input", self.input_vectors), ("output", self.output_vectors)):
            if m.shape != (v, self.dim):
                raise ValueError(f"{name} matrix shape {m.shape} != ({v}, {self.dim})")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} matrix contains non-finite values")


def _sigmoid(x):
    # Overflow-safe for large |x|: exp of a non-positive argument only.
    e = np.exp(-np.abs(x))
    pos = 1.0 / (1.0 + e)
    return np.where(x >= 0, pos, 1.0 - pos)


def sgns_pair_gradients(v_c: np.ndarray, u_o: np.ndarray, u_neg: np.ndarray):
    """Loss and analytic gradients for one pair; dtype follows the inputs.

    Returns (loss, grad_v_c, grad_u_o, grad_u_neg) for
    L = -log sigmoid(u_o.v_c) - sum_n log sigmoid(-u_n.v_c).
    """
    pos_dot = u_o @ v_c
    neg_dots = u_neg @ v_c
    loss = float(np.logaddexp(0.0, -pos_dot) + np.logaddexp(0.0, neg_dots).sum())
    g_pos = _sigmoid(pos_dot) - 1.0
    g_neg = _sigmoid(neg_dots)
    grad_v = g_pos * u_o + g_neg @ u_neg
    grad_u_o = g_pos * v_c
    grad_u_neg = np.outer(g_neg, v_c)
    return loss, grad_v, grad_u_o, grad_u_neg


class _Sampler:
    """Seeded draws for subsampling, window shrink, and negative sampling."""

    def __init__(self, vocab: Vocab, config: TrainConfig, seed: int):
        self.rng = np.random.default_rng(seed)
        counts = np.asarray(vocab.counts, dtype=np.float64)
        noise = counts ** 0.75
        self.noise_cdf = np.cumsum(noise / noise.sum())
        freq = counts / max(1, vocab.total_tokens)
        t = config.subsample_t
        self.keep_prob = np.minimum(1.0, (np.sqrt(freq / t) + 1.0) * (t / freq))
        self.window = config.window
        self.negatives = config.negatives

    def subsample(self, ids: np.ndarray) -> np.ndarray:
        if ids.size == 0:
            return ids
        return ids[self.rng.random(ids.size) < self.keep_prob[ids]]

    def window_size(self) -> int:
        return int(self.rng.integers(1, self.window + 1))

    def draw_negatives(self, exclude: int) -> np.ndarray:
        ids = np.searchsorted(self.noise_cdf, self.rng.random(self.negatives))
        return ids[ids != exclude]


def _encode_corpus(corpus: Sequence[Sequence[str]], vocab: Vocab) -> list[np.ndarray]:
    t2i = vocab.token_to_id
    out = []
    for sent in corpus:
        ids = [t2i[t] for t in (w.lower() for w in sent) if t in t2i]
        if ids:
            out.append(np.asarray(ids, dtype=np.int64))
    return out


def _train_sentences(
    sentences: list[np.ndarray],
    input_vectors: np.ndarray,
    output_vectors: np.ndarray,
    sampler: _Sampler,
    lr0: float,
    progress: list[int],
    total_positions: int,
) -> tuple[float, int]:
    """One pass over ``sentences``; returns (loss sum, pair count).

    ``progress`` is a shared single-element counter driving linear LR decay
    across epochs (and workers, in throughput mode).
    """
    loss_sum = 0.0
    pairs = 0
    min_lr = lr0 * 1e-4
    guard = 1e30  # a pair loss this large (or NaN) means training diverged
    for ids in sentences:
        kept = sampler.subsample(ids)
        n = kept.size
        progress[0] += int(ids.size)
        if n < 2:
            continue
        lr = max(min_lr, lr0 * (1.0 - progress[0] / max(1, total_positions)))
        flr = np.float32(lr)
        for pos in range(n):
            center = int(kept[pos])
            w = sampler.window_size()
            lo = max(0, pos - w)
            hi = min(n, pos + w + 1)
            for ctx_pos in range(lo, hi):
                if ctx_pos == pos:
                    continue
                context = int(kept[ctx_pos])
                neg_ids = sampler.draw_negatives(context)
                v_c = input_vectors[center]
                loss, grad_v, grad_u_o, grad_u_neg = sgns_pair_gradients(
                    v_c, output_vectors[context], output_vectors[neg_ids]
                )
                if not loss < guard:  # catches NaN as well
                    raise NonFiniteLoss(f"pair loss {loss}; lower the learning rate")
                loss_sum += loss
                pairs += 1
                input_vectors[center] = v_c - flr * grad_v
                output_vectors[context] -= flr * grad_u_o
                np.add.at(output_vectors, neg_ids, -flr * grad_u_neg)
    return loss_sum, pairs


def train_sgns(
    corpus: Sequence[Sequence[str]],
    config: TrainConfig,
    *,
    workers: int = 1,
) -> EmbeddingModel:
    """Train an embedding model on pre-tokenized sentences.

    workers=1 is the deterministic reference mode: identical corpus, config
    and seed give bit-identical matrices. workers>1 shards sentences across
    threads that update the shared matrices lock-free; faster on large
    corpora but not bit-reproducible.
    """
    sentences_raw = list(corpus)
    vocab = build_vocab((t for s in sentences_raw for t in s), config.min_count)
    sentences = _encode_corpus(sentences_raw, vocab)
    rng = np.random.default_rng(config.seed)
    v = len(vocab)
    input_vectors = ((rng.random((v, config.dim)) - 0.5) / config.dim).astype(np.float32)
    output_vectors = np.zeros((v, config.dim), dtype=np.float32)

    total_positions = config.epochs * sum(int(s.size) for s in sentences)
    progress = [0]
    epoch_losses: list[float] = []

    if workers <= 1:
        sampler = _Sampler(vocab, config, config.seed)
        for epoch in range(config.epochs):
            loss_sum, pairs = _train_sentences(
                sentences, input_vectors, output_vectors, sampler,
                config.learning_rate, progress, total_positions,
            )
            mean_loss = loss_sum / pairs if pairs else 0.0
            if not np.isfinite(mean_loss):
                raise NonFiniteLoss(f"epoch {epoch}: mean loss {mean_loss}")
            epoch_losses.append(mean_loss)
            logger.debug("epoch %d: %d pairs, mean loss %.4f", epoch, pairs, mean_loss)
    else:
        shards = [sentences[i::workers] for i in range(workers)]
        for epoch in range(config.epochs):
            results: list[tuple[float, int]] = [(0.0, 0)] * workers
            threads = []
            for widx, shard in enumerate(shards):
                sampler = _Sampler(vocab, config, config.seed + 1000003 * (widx + 1) + epoch)

                def run(i=widx, sh=shard, sa=sampler):
                    results[i] = _train_sentences(
                        sh, input_vectors, output_vectors, sa,
                        config.learning_rate, progress, total_positions,
                    )

                thread = threading.Thread(target=run, name=f"sgns-worker-{widx}")
                threads.append(thread)
                thread.start()
            for thread in threads:
                thread.join()
            loss_sum = sum(r[0] for r in results)
            pairs = sum(r[1] for r in results)
            mean_loss = loss_sum / pairs if pairs else 0.0
            if not np.isfinite(mean_loss):
                raise NonFiniteLoss(f"epoch {epoch}: mean loss {mean_loss}")
            epoch_losses.append(mean_loss)

    if not (np.all(np.isfinite(input_vectors)) and np.all(np.isfinite(output_vectors))):
        raise NonFiniteLoss("non-finite vectors after training")
    return EmbeddingModel(
        dim=config.dim,
        vocab=vocab,
        input_vectors=input_vectors,
        output_vectors=output_vectors,
        train_config=config,
        epoch_losses=epoch_losses,
    )


def embed_sentence(model: EmbeddingModel, sentence_text: str) -> np.ndarray:
    """Mean of input vectors over in-vocab tokens; zeros if none match."""
    t2i = model.vocab.token_to_id
    ids = [t2i[t] for t in tokenize(sentence_text) if t in t2i]
    if not ids:
        return np.zeros(model.dim, dtype=np.float32)
    return model.input_vectors[ids].mean(axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def nearest_neighbors(model: EmbeddingModel, token: str, k: int) -> list[tuple[str, float]]:
    """Top-k in-vocab tokens by cosine against ``token``'s input vector;
    ties broken by token id."""
    token = token.lower()
    idx = model.vocab.token_to_id.get(token)
    if idx is None:
        raise OutOfVocab(token)
    if k <= 0:
        return []
    mat = model.input_vectors.astype(np.float64)
    norms = np.linalg.norm(mat, axis=1)
    query, qnorm = mat[idx], norms[idx]
    if qnorm == 0.0:
        sims = np.zeros(len(norms))
    else:
        denom = np.where(norms > 0.0, norms * qnorm, 1.0)
        sims = np.clip(np.where(norms > 0.0, mat @ query / denom, 0.0), -1.0, 1.0)
    order = np.lexsort((np.arange(sims.size), -sims))
    id_to_token = model.vocab.id_to_token
    return [(id_to_token[i], float(sims[i])) for i in order if i != idx][:k]


# --------------------------------------------------------------------------
# Serialization: SGNS1 | dim | V | min_count | total | vocab | config | mats
# --------------------------------------------------------------------------

def save_model(model: EmbeddingModel, sink) -> None:
    close = False
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        sink = open(sink, "wb")
        close = True
    try:
        v = len(model.vocab)
        sink.write(MODEL_MAGIC)
        sink.write(struct.pack("<IIIQ", model.dim, v, model.vocab.min_count, model.vocab.total_tokens))
        id_to_token = model.vocab.id_to_token
        for idx in range(v):
            raw = id_to_token[idx].encode("utf-8")
            sink.write(struct.pack("<I", len(raw)))
            sink.write(raw)
            sink.write(struct.pack("<Q", model.vocab.counts[idx]))
        cfg = b""
        if model.train_config is not None:
            cfg = json.dumps(model.train_config.__dict__, sort_keys=True).encode("utf-8")
        sink.write(struct.pack("<I", len(cfg)))
        sink.write(cfg)
        sink.write(np.ascontiguousarray(model.input_vectors, dtype="<f4").tobytes())
        sink.write(np.ascontiguousarray(model.output_vectors, dtype="<f4").tobytes())
    finally:
        if close:
            sink.close()


def load_model(source) -> EmbeddingModel:
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            data = fh.read()
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = bytes(source)
    buf = io.BytesIO(data)
    if buf.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise EmbeddingError("not an embedding model file (bad magic)")
    dim, v, min_count, total = struct.unpack("<IIIQ", buf.read(20))
    token_to_id: dict[str, int] = {}
    counts = []
    for idx in range(v):
        (tlen,) = struct.unpack("<I", buf.read(4))
        token = buf.read(tlen).decode("utf-8")
        (count,) = struct.unpack("<Q", buf.read(8))
        token_to_id[token] = idx
        counts.append(count)
    (clen,) = struct.unpack("<I", buf.read(4))
    config = None
    if clen:
        config = TrainConfig(**json.loads(buf.read(clen).decode("utf-8")))
    mat_bytes = 4 * v * dim
    inp = np.frombuffer(buf.read(mat_bytes), dtype="<f4").reshape(v, dim).copy()
    out = np.frombuffer(buf.read(mat_bytes), dtype="<f4").reshape(v, dim).copy()
    vocab = Vocab(token_to_id=token_to_id, counts=tuple(counts), min_count=min_count, total_tokens=total)
    return EmbeddingModel(dim=dim, vocab=vocab, input_vectors=inp, output_vectors=out, train_config=config)
