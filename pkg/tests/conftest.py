import json
import random

import pytest

from disclosure_qa.embeddings import TrainConfig, save_model, tokenize, train_sgns


def make_pair_corpus(copies: int = 2000):
    return [["alpha", "beta"]] * copies


@pytest.fixture(scope="session")
def pair_model():
    """Model trained on the two-token co-occurrence corpus; reused across tests."""
    config = TrainConfig(
        seed=7, dim=16, window=2, negatives=5, epochs=5, subsample_t=1.0, min_count=1
    )
    return train_sgns(make_pair_corpus(), config)


@pytest.fixture(scope="session")
def mixed_corpus():
    """Small random corpus over six words with conflicting contexts."""
    words = [f"w{i}" for i in range(6)]
    rng = random.Random(3)
    return [[rng.choice(words) for _ in range(8)] for _ in range(100)]


REPORT_SENTENCES = [
    "The board oversees climate-related risks and opportunities every quarter.",
    "Management assesses climate risk exposure across all business units.",
    "Scope 1 and scope 2 emissions fell by twelve percent against the baseline.",
    "Physical risks include flooding at coastal facilities and heat stress.",
    "The company discloses targets to cut greenhouse gas emissions by 2030.",
    "Transition risks arise from carbon pricing and changing regulation.",
    "Our performance against emission targets is reviewed by the audit committee.",
    "Revenue from renewable segments grew while thermal volumes declined.",
]


@pytest.fixture(scope="session")
def report_model():
    """Small embedding model trained on report-like sentences."""
    corpus = [tokenize(s) for s in REPORT_SENTENCES] * 25
    config = TrainConfig(seed=13, dim=12, window=3, negatives=3, epochs=2,
                         subsample_t=1.0, min_count=2)
    return train_sgns(corpus, config)


@pytest.fixture(scope="session")
def trained_models(report_model, tmp_path_factory):
    """Embedding + classifier model files trained on the report fixture.

    Returns (embeddings_path, classifier_path, embedding_model, classifier).
    """
    from disclosure_qa.classifier import ClassifierConfig, save_classifier, train_classifier
    from disclosure_qa.dataset import build_pairs, load_labels, load_questions, subsample_negatives

    root = tmp_path_factory.mktemp("models")
    text = " ".join(REPORT_SENTENCES)
    (root / "fixture.txt").write_text(text, encoding="utf-8")
    annotations = [{
        "doc_id": "fixture", "company": "Acme", "sector": "Energy", "year": 2022,
        "text_file": "fixture.txt",
        "answers": [
            {"qid": 1, "sent_id": 0}, {"qid": 2, "sent_id": 1},
            {"qid": 12, "sent_id": 2}, {"qid": 13, "sent_id": 4},
            {"qid": 14, "sent_id": 6},
        ],
    }]
    ann = root / "labels.json"
    ann.write_text(json.dumps(annotations), encoding="utf-8")
    docs = load_labels(ann)
    pairs = subsample_negatives(build_pairs(docs, load_questions()), 4.0, seed=2)

    clf = train_classifier(pairs, report_model, ClassifierConfig(seed=21, epochs=10))
    emb_path = root / "embeddings.sgns"
    clf_path = root / "classifier.pcls"
    save_model(report_model, emb_path)
    save_classifier(clf, clf_path)
    return emb_path, clf_path, report_model, clf
