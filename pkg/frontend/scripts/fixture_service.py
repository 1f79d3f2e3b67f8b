"""Boot a disclosure-qa service instance with freshly trained tiny models,
for the frontend's live contract tests. Prints "READY <port>" once
serving. Deterministic seeds keep scores stable across runs."""

import dataclasses
import json
import socket
import sys
import tempfile
from pathlib import Path

from disclosure_qa.classifier import ClassifierConfig, save_classifier, train_classifier
from disclosure_qa.config import ServiceConfig, load_config
from disclosure_qa.dataset import build_pairs, load_labels, load_questions, subsample_negatives
from disclosure_qa.embeddings import TrainConfig, save_model, tokenize, train_sgns
from disclosure_qa.service import create_app

SENTENCES = [
    "The board oversees climate-related risks and opportunities every quarter.",
    "Management assesses climate risk exposure across all business units.",
    "Scope 1 and scope 2 emissions fell by twelve percent against the baseline.",
    "Physical risks include flooding at coastal facilities and heat stress.",
    "The company discloses targets to cut greenhouse gas emissions by 2030.",
    "Transition risks arise from carbon pricing and changing regulation.",
    "Our performance against emission targets is reviewed by the audit committee.",
    "Revenue from renewable segments grew while thermal volumes declined.",
]


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="qa-frontend-fixture-"))
    corpus = [tokenize(s) for s in SENTENCES] * 25
    embeddings = train_sgns(corpus, TrainConfig(
        seed=13, dim=12, window=3, negatives=3, epochs=2, subsample_t=1.0, min_count=2,
    ))
    (tmp / "fixture.txt").write_text(" ".join(SENTENCES), encoding="utf-8")
    annotations = tmp / "labels.json"
    annotations.write_text(json.dumps([{
        "doc_id": "fixture", "company": "Acme", "sector": "Energy", "year": 2022,
        "text_file": "fixture.txt",
        "answers": [
            {"qid": 1, "sent_id": 0}, {"qid": 2, "sent_id": 1},
            {"qid": 12, "sent_id": 2}, {"qid": 13, "sent_id": 4},
            {"qid": 14, "sent_id": 6},
        ],
    }]), encoding="utf-8")
    pairs = subsample_negatives(build_pairs(load_labels(annotations), load_questions()), 4.0, seed=2)
    classifier = train_classifier(pairs, embeddings, ClassifierConfig(seed=21, epochs=10))
    # mid-range threshold so fixture batches produce both decisions
    classifier = dataclasses.replace(classifier, threshold=0.512)
    save_model(embeddings, tmp / "embeddings.sgns")
    save_classifier(classifier, tmp / "classifier.pcls")

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    config = dataclasses.replace(load_config(None, env={}), service=ServiceConfig(
        port=port,
        store_root=str(tmp / "store"),
        embeddings_path=str(tmp / "embeddings.sgns"),
        classifier_path=str(tmp / "classifier.pcls"),
        workers=1,
    ))
    app = create_app(config)

    import uvicorn

    server_config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    print(f"READY {port}", flush=True)
    uvicorn.Server(server_config).run()


if __name__ == "__main__":
    sys.exit(main())
