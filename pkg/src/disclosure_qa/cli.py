"""disclosure-qa command line: the offline pipeline plus the HTTP service.

Subcommands are thin wrappers over the library; the same inputs through
the CLI and through direct calls produce byte-identical outputs. Exit
codes: 0 success, 1 operational failure, 2 usage error. Stochastic
subcommands (train-embeddings, build-dataset, train) require an explicit
--seed.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

from . import classifier as clf_mod
from . import dataset as ds_mod
from . import embeddings as emb_mod
from .config import ConfigError, RunConfig, load_config
from .evaluator import (
    predictions_from_pairs,
    render_text_report,
    report,
    report_json,
    val_test_diff,
)
from .pdf_extract import (
    DecodeError,
    MalformedPdf,
    PdfError,
    RawDocument,
    UnsupportedPdf,
    extract_pdf_text,
    extract_plain_text,
)
from .segmenter import normalize_text, split_sentences, write_sentences_tsv

logger = logging.getLogger(__name__)


class OperationalError(Exception):
    """Wraps failures that should exit 1 with a clean message."""


def _read_doc(path: Path, kern_threshold: float) -> RawDocument:
    data = path.read_bytes()
    doc_id = path.stem
    if data.startswith(b"%PDF-"):
        return extract_pdf_text(data, doc_id=doc_id, source_name=path.name,
                                kern_space_threshold=kern_threshold)
    return extract_plain_text(data, doc_id=doc_id, source_name=path.name)


def _require_seed(args, parser: argparse.ArgumentParser) -> int:
    if args.seed is None:
        parser.error(f"{args.command}: --seed is required (no hidden nondeterminism)")
    return args.seed


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_extract(args, config: RunConfig, parser) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    written: set[str] = set()
    for name in args.inputs:
        path = Path(name)
        try:
            doc = _read_doc(path, config.kern_space_threshold)
        except (MalformedPdf, UnsupportedPdf, DecodeError) as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
            if not args.skip_bad:
                return 1
            continue
        stem, n = doc.doc_id, 1
        while f"{stem}.txt" in written:
            n += 1
            stem = f"{doc.doc_id}-{n}"
        written.add(f"{stem}.txt")
        out_path = out_dir / f"{stem}.txt"
        out_path.write_text(doc.text, encoding="utf-8")
        print(f"{path} -> {out_path} ({len(doc.page_breaks)} pages, {len(doc.text)} chars)")
    if failures and args.skip_bad:
        print(f"warning: skipped {failures} unreadable file(s)", file=sys.stderr)
    return 0


def cmd_segment(args, config: RunConfig, parser) -> int:
    sentences = []
    for name in args.inputs:
        path = Path(name)
        doc = _read_doc(path, config.kern_space_threshold)
        normalized = RawDocument(
            doc_id=doc.doc_id, source_name=doc.source_name,
            text=normalize_text(doc.text),
            page_breaks=[0] if doc.text else [], meta=doc.meta,
        )
        sentences.extend(split_sentences(normalized, config.segmenter))
    sink = io.BytesIO()
    rows = write_sentences_tsv(sentences, sink)
    Path(args.out).write_bytes(sink.getvalue())
    print(f"wrote {rows} sentences to {args.out}")
    return 0


def cmd_train_embeddings(args, config: RunConfig, parser) -> int:
    seed = _require_seed(args, parser)
    corpus_dir = Path(args.corpus_dir)
    texts = sorted(corpus_dir.glob("**/*.txt"))
    corpus: list[list[str]] = []
    for path in texts:
        doc = extract_plain_text(path.read_bytes(), doc_id=path.stem, source_name=path.name)
        normalized = RawDocument(
            doc_id=doc.doc_id, source_name=doc.source_name,
            text=normalize_text(doc.text), page_breaks=[0] if doc.text else [],
        )
        for sentence in split_sentences(normalized, config.segmenter):
            corpus.append(emb_mod.tokenize(sentence.text))
    defaults = config.embeddings
    train_config = emb_mod.TrainConfig(
        seed=seed,
        dim=args.dim or defaults.dim,
        window=args.window or defaults.window,
        negatives=args.negatives or defaults.negatives,
        learning_rate=args.learning_rate or defaults.learning_rate,
        epochs=args.epochs or defaults.epochs,
        subsample_t=args.subsample_t or defaults.subsample_t,
        min_count=args.min_count or defaults.min_count,
    )
    model = emb_mod.train_sgns(corpus, train_config, workers=args.workers)
    emb_mod.save_model(model, args.out)
    print(
        f"trained on {len(corpus)} sentences from {len(texts)} file(s): "
        f"V={len(model.vocab)} dim={model.dim} -> {args.out}"
    )
    return 0


def cmd_build_dataset(args, config: RunConfig, parser) -> int:
    seed = _require_seed(args, parser)
    questions = ds_mod.load_questions(args.questions)
    docs = ds_mod.load_labels(args.annotations, config.segmenter)
    pairs = ds_mod.build_pairs(docs, questions)
    ratios = tuple(float(x) for x in args.ratios.split(",")) if args.ratios else config.dataset.ratios
    if len(ratios) != 3:
        parser.error("--ratios needs three comma-separated fractions")
    split = ds_mod.split_by_company(pairs, ratios, seed=seed)

    neg_per_pos = dict(config.dataset.neg_per_pos)
    if args.neg_per_pos:
        values = [float(x) for x in args.neg_per_pos.split(",")]
        if len(values) != 3:
            parser.error("--neg-per-pos needs three comma-separated ratios")
        neg_per_pos = dict(zip(("train", "dev", "test"), values))
    sampled = ds_mod.SplitDataset(
        train=tuple(ds_mod.subsample_negatives(list(split.train), neg_per_pos["train"], seed=seed)),
        dev=tuple(ds_mod.subsample_negatives(list(split.dev), neg_per_pos["dev"], seed=seed + 1)),
        test=tuple(ds_mod.subsample_negatives(list(split.test), neg_per_pos["test"], seed=seed + 2)),
        split_manifest=split.split_manifest,
        seed=seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sink = io.BytesIO()
    rows = ds_mod.write_pairs_tsv(sampled, sink)
    (out_dir / "pairs.tsv").write_bytes(sink.getvalue())
    manifest = {
        "seed": seed,
        "ratios": list(ratios),
        "neg_per_pos": neg_per_pos,
        "companies": sampled.split_manifest,
        "counts": {
            name: {
                "positive": sum(1 for p in sampled.split(name) if p.label == ds_mod.POSITIVE),
                "negative": sum(1 for p in sampled.split(name) if p.label == ds_mod.NEGATIVE),
            }
            for name in ("train", "dev", "test")
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {rows} pairs and manifest to {out_dir}")
    return 0


def cmd_train(args, config: RunConfig, parser) -> int:
    seed = _require_seed(args, parser)
    if args.self_test:
        return _self_test()
    if not (args.pairs and args.embeddings and args.out):
        parser.error("train: --pairs, --embeddings and --out are required")
    model = emb_mod.load_model(args.embeddings)
    splits = ds_mod.read_pairs_tsv(Path(args.pairs).read_bytes())
    defaults = config.classifier
    train_config = clf_mod.ClassifierConfig(
        seed=seed,
        learning_rate=args.learning_rate or defaults.learning_rate,
        epochs=args.epochs or defaults.epochs,
        l2=defaults.l2 if args.l2 is None else args.l2,
        class_weight_pos=args.class_weight_pos or defaults.class_weight_pos,
    )
    trained = clf_mod.train_classifier(splits["train"], model, train_config)
    if not args.no_calibrate and splits["dev"]:
        trained = clf_mod.calibrate_threshold(trained, splits["dev"], model)
    clf_mod.save_classifier(trained, args.out)
    print(
        f"trained on {len(splits['train'])} pairs "
        f"(threshold {trained.threshold:.4f}, class weight {trained.class_weight_pos:.2f}) "
        f"-> {args.out}"
    )
    return 0


def _self_test() -> int:
    """Quick finite-difference check of both analytic gradients."""
    import numpy as np

    rng = np.random.default_rng(0)
    worst_sgns = 0.0
    for _ in range(20):
        v_c, u_o = rng.normal(size=4), rng.normal(size=4)
        u_neg = rng.normal(size=(3, 4))
        _, gv, go, gn = emb_mod.sgns_pair_gradients(v_c, u_o, u_neg)
        h = 1e-5

        def loss_at(vc=None, uo=None, un=None):
            return emb_mod.sgns_pair_gradients(
                v_c if vc is None else vc, u_o if uo is None else uo,
                u_neg if un is None else un,
            )[0]

        for i in range(4):
            bump = np.zeros(4)
            bump[i] = h
            fd = (loss_at(vc=v_c + bump) - loss_at(vc=v_c - bump)) / (2 * h)
            worst_sgns = max(worst_sgns, abs(gv[i] - fd) / max(1.0, abs(fd)))
            fd = (loss_at(uo=u_o + bump) - loss_at(uo=u_o - bump)) / (2 * h)
            worst_sgns = max(worst_sgns, abs(go[i] - fd) / max(1.0, abs(fd)))

    worst_logistic = 0.0
    for _ in range(20):
        X = rng.normal(size=(12, 5))
        y = (rng.random(12) < 0.4).astype(float)
        y[0], y[1] = 1.0, 0.0
        sw = np.where(y == 1.0, 5.0, 1.0)
        w, b = rng.normal(size=5) * 0.3, 0.1
        _, gw, gb = clf_mod.logistic_loss_and_grad(w, b, X, y, sw, 0.01)
        h = 1e-6
        for i in range(5):
            bump = np.zeros(5)
            bump[i] = h
            fd = (clf_mod.logistic_loss_and_grad(w + bump, b, X, y, sw, 0.01)[0]
                  - clf_mod.logistic_loss_and_grad(w - bump, b, X, y, sw, 0.01)[0]) / (2 * h)
            worst_logistic = max(worst_logistic, abs(gw[i] - fd) / max(1.0, abs(fd)))

    ok = worst_sgns < 1e-4 and worst_logistic < 1e-5
    print(f"self-test: sgns gradient max rel err {worst_sgns:.2e} (< 1e-4), "
          f"logistic {worst_logistic:.2e} (< 1e-5): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_eval(args, config: RunConfig, parser) -> int:
    model = emb_mod.load_model(args.embeddings)
    trained = clf_mod.load_classifier(args.classifier)
    splits = ds_mod.read_pairs_tsv(Path(args.pairs).read_bytes())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports = []
    for name in args.splits.split(","):
        name = name.strip()
        if name not in splits:
            parser.error(f"unknown split {name!r} (have {sorted(splits)})")
        pairs = splits[name]
        if not pairs:
            raise OperationalError(f"split {name!r} is empty")
        scores = clf_mod.score_pairs(trained, model, pairs)
        preds = predictions_from_pairs(pairs, scores, trained.threshold)
        reports.append(report(preds, name))

    diff = val_test_diff(reports[0], reports[1]) if len(reports) == 2 else None
    (out_dir / "report.json").write_text(report_json(reports, diff), encoding="utf-8")
    text = render_text_report(reports, diff)
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    if not args.no_figures:
        from .figures import render_report_figures

        paths = render_report_figures(reports, out_dir / "figures")
        print(f"figures: {', '.join(str(p) for p in paths)}")
    print(text, end="")
    return 0


def cmd_infer(args, config: RunConfig, parser) -> int:
    questions = {q.qid: q.text for q in ds_mod.load_questions(args.questions)}
    qids = sorted({int(x) for x in args.qids.split(",")}) if args.qids else sorted(questions)
    unknown = [q for q in qids if q not in questions]
    if unknown:
        parser.error(f"unknown question ids: {unknown}")

    doc = _read_doc(Path(args.doc), config.kern_space_threshold)
    normalized = RawDocument(
        doc_id=doc.doc_id, source_name=doc.source_name, text=normalize_text(doc.text),
        page_breaks=[0] if doc.text else [], meta=doc.meta,
    )
    sentences = split_sentences(normalized, config.segmenter)

    lines = ["doc_id\tqid\tsent_id\tscore\tis_answer\tsentence_text"]
    if args.scorer_cmd:
        threshold = args.threshold
        for qid in qids:
            batch = [(qid, questions[qid], s.text) for s in sentences]
            scores = clf_mod.external_scorer_roundtrip(args.scorer_cmd.split(), batch)
            for s, score in zip(sentences, scores):
                lines.append(_result_row(doc.doc_id, qid, s, score, threshold))
    else:
        if not args.classifier or not args.embeddings:
            parser.error("--classifier and --embeddings are required without --scorer-cmd")
        model = emb_mod.load_model(args.embeddings)
        trained = clf_mod.load_classifier(args.classifier)
        threshold = trained.threshold if args.threshold is None else args.threshold
        texts = [s.text for s in sentences]
        for qid in qids:
            scores = clf_mod.score_question_sentences(trained, model, questions[qid], texts)
            for s, score in zip(sentences, scores):
                lines.append(_result_row(doc.doc_id, qid, s, float(score), threshold))
    payload = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"wrote {len(lines) - 1} rows to {args.out}")
    else:
        print(payload, end="")
    return 0


def _result_row(doc_id, qid, sentence, score, threshold) -> str:
    text = sentence.text.replace("\t", " ").replace("\n", " ")
    flag = "true" if score >= threshold else "false"
    return f"{doc_id}\t{qid}\t{sentence.sent_id}\t{score:.4f}\t{flag}\t{text}"


def cmd_serve(args, config: RunConfig, parser) -> int:
    import dataclasses

    import uvicorn

    from .service import create_app

    service = config.service
    overrides = {}
    if args.host:
        overrides["host"] = args.host
    if args.port is not None:
        overrides["port"] = args.port
    if args.store_root:
        overrides["store_root"] = args.store_root
    if args.embeddings:
        overrides["embeddings_path"] = args.embeddings
    if args.classifier:
        overrides["classifier_path"] = args.classifier
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        service = dataclasses.replace(service, **overrides)
        config = dataclasses.replace(config, service=service)
    app = create_app(config)
    uvicorn.run(app, host=service.host, port=service.port, log_level="info")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disclosure-qa",
        description="Climate-disclosure question answering over financial reports.",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="seed for stochastic subcommands")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract raw text from PDF/text reports")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--skip-bad", action="store_true", help="warn on unreadable files instead of failing")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("segment", help="split extracted text into a sentence TSV")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train-embeddings", help="pretrain word embeddings on a text corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--subsample-t", type=float)
    p.add_argument("--min-count", type=int)
    p.add_argument("--workers", type=int, default=1,
                   help=">1 trades bit-reproducibility for throughput")
    p.set_defaults(func=cmd_train_embeddings)

    p = sub.add_parser("build-dataset", help="build labeled pairs and company splits")
    p.add_argument("--annotations", required=True)
    p.add_argument("--questions", help="question JSON (default: packaged TCFD set)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", help="train,dev,test fractions (default 0.8,0.1,0.1)")
    p.add_argument("--neg-per-pos", help="negative ratios per split (default 10,10,3)")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train the pair classifier")
    p.add_argument("--pairs", help="pair TSV from build-dataset")
    p.add_argument("--embeddings", help="embedding model file")
    p.add_argument("--out", help="classifier output file")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--class-weight-pos", type=float)
    p.add_argument("--no-calibrate", action="store_true",
                   help="keep threshold 0.5 instead of calibrating on dev")
    p.add_argument("--self-test", action="store_true",
                   help="run gradient finite-difference checks and exit")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a classifier on pair splits")
    p.add_argument("--classifier", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--splits", default="dev,test", help="comma list, e.g. dev,test")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="run inference over one document")
    p.add_argument("--doc", required=True)
    p.add_argument("--classifier")
    p.add_argument("--embeddings")
    p.add_argument("--questions")
    p.add_argument("--qids", help="comma list of question ids (default: all 14)")
    p.add_argument("--out")
    p.add_argument("--scorer-cmd", help="external scorer command (line protocol)")
    p.add_argument("--threshold", type=float, default=None,
                   help="decision threshold (default: classifier's; 0.5 for external)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("serve", help="run the HTTP batch service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--store-root")
    p.add_argument("--embeddings")
    p.add_argument("--classifier")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "infer" and args.scorer_cmd and args.threshold is None:
        args.threshold = 0.5
    try:
        config = load_config(args.config)
        return args.func(args, config, parser)
    except (
        ConfigError,
        OperationalError,
        PdfError,
        DecodeError,
        ds_mod.DatasetError,
        clf_mod.ClassifierError,
        emb_mod.EmbeddingError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
