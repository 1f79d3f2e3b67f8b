"""The three-stage batch pipeline: extract text, segment, run inference.

A document failing extraction or segmentation marks only that document as
failed; the batch fails outright when every document fails or a stage hits
an unrecoverable error (e.g. the store disappears). Stages are idempotent
and restart from their beginning after a service interruption, using the
artifacts persisted by earlier stages.
"""

from __future__ import annotations

import io
import logging
import re

from ..classifier import PairClassifier, score_question_sentences
from ..dataset import TcfdQuestion
from ..embeddings import EmbeddingModel
from ..pdf_extract import (
    DecodeError,
    MalformedPdf,
    PdfError,
    RawDocument,
    UnsupportedPdf,
    extract_pdf_text,
    extract_plain_text,
)
from ..segmenter import (
    SegmenterConfig,
    Sentence,
    normalize_text,
    read_sentences_tsv,
    split_sentences,
    write_sentences_tsv,
)
from .jobs import BatchJob, BatchState, JobStore
from .store import LocalFsStore

logger = logging.getLogger(__name__)

RESULT_TSV_HEADER = "doc_id\tqid\tsent_id\tscore\tis_answer\tsentence_text"


def doc_id_from_name(name: str, taken: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9_-]+", "-", name.rsplit(".", 1)[0]).strip("-") or "doc"
    doc_id = base
    n = 1
    while doc_id in taken:
        n += 1
        doc_id = f"{base}-{n}"
    taken.add(doc_id)
    return doc_id


def _tsv_field(value: str) -> str:
    return value.replace("\t", " ").replace("\n", " ").replace("\r", " ")


class BatchProcessor:
    def __init__(
        self,
        store: LocalFsStore,
        jobs: JobStore,
        embeddings: EmbeddingModel,
        classifier: PairClassifier,
        questions: list[TcfdQuestion],
        segmenter_config: SegmenterConfig | None = None,
        kern_space_threshold: float = 180.0,
    ):
        self.store = store
        self.jobs = jobs
        self.embeddings = embeddings
        self.classifier = classifier
        self.question_text = {q.qid: q.text for q in questions}
        self.segmenter_config = segmenter_config or SegmenterConfig()
        self.kern_space_threshold = kern_space_threshold

    # -- stages -----------------------------------------------------------

    def run(self, batch_id: str) -> BatchState:
        """Drive the job to a terminal state, resuming mid-pipeline jobs at
        the start of their interrupted stage."""
        job = self.jobs.load_job(batch_id)
        stage_of = {
            BatchState.QUEUED: 0, BatchState.EXTRACTING: 0,
            BatchState.PARSING: 1, BatchState.INFERRING: 2,
        }
        if job.state in (BatchState.DONE, BatchState.FAILED):
            return job.state
        start = stage_of[job.state]
        stages = [self._extract_stage, self._parse_stage, self._infer_stage]
        try:
            for stage in stages[start:]:
                stage(job)
        except Exception as exc:  # noqa: BLE001 - terminal failure is the contract
            logger.exception("batch %s failed", batch_id)
            job.advance(BatchState.FAILED, error=f"{type(exc).__name__}: {exc}")
            self.jobs.publish(job)
            return job.state
        job.advance(BatchState.DONE)
        self.jobs.publish(job)
        return job.state

    def _extract_stage(self, job: BatchJob) -> None:
        job.advance(BatchState.EXTRACTING)
        self.jobs.publish(job)
        failures = []
        for doc in job.docs:
            data = self.store.get(f"{job.batch_id}/raw/{doc.name}")
            try:
                raw = self._extract_one(data, doc.doc_id, doc.name)
            except (MalformedPdf, UnsupportedPdf, DecodeError) as exc:
                doc.status = "failed"
                doc.error = f"{type(exc).__name__}: {exc}"
                failures.append(doc.name)
                continue
            self.store.put(
                f"{job.batch_id}/text/{doc.doc_id}.txt",
                normalize_text(raw.text).encode("utf-8"),
            )
            doc.status = "ok"
        self.jobs.publish(job)
        if failures and len(failures) == len(job.docs):
            raise PdfError(f"all {len(failures)} documents failed extraction")

    def _extract_one(self, data: bytes, doc_id: str, name: str) -> RawDocument:
        if data.startswith(b"%PDF-"):
            return extract_pdf_text(
                data, doc_id=doc_id, source_name=name,
                kern_space_threshold=self.kern_space_threshold,
            )
        return extract_plain_text(data, doc_id=doc_id, source_name=name)

    def _parse_stage(self, job: BatchJob) -> None:
        job.advance(BatchState.PARSING)
        self.jobs.publish(job)
        sentences: list[Sentence] = []
        for doc in job.docs:
            if doc.status != "ok":
                continue
            text = self.store.get(f"{job.batch_id}/text/{doc.doc_id}.txt").decode("utf-8")
            raw = RawDocument(
                doc_id=doc.doc_id, source_name=doc.name, text=text,
                page_breaks=[0] if text else [],
            )
            sentences.extend(split_sentences(raw, self.segmenter_config))
        sink = io.BytesIO()
        write_sentences_tsv(sentences, sink)
        self.store.put(f"{job.batch_id}/sentences.tsv", sink.getvalue())

    def _infer_stage(self, job: BatchJob) -> None:
        job.advance(BatchState.INFERRING)
        self.jobs.publish(job)
        sentences = read_sentences_tsv(self.store.get(f"{job.batch_id}/sentences.tsv"))
        by_doc: dict[str, list[Sentence]] = {}
        for s in sentences:
            by_doc.setdefault(s.doc_id, []).append(s)

        lines = [RESULT_TSV_HEADER]
        threshold = self.classifier.threshold
        for doc_id in sorted(by_doc):
            doc_sentences = sorted(by_doc[doc_id], key=lambda s: s.sent_id)
            texts = [s.text for s in doc_sentences]
            for qid in sorted(job.question_ids):
                scores = score_question_sentences(
                    self.classifier, self.embeddings, self.question_text[qid], texts
                )
                for sentence, score in zip(doc_sentences, scores):
                    lines.append("\t".join([
                        _tsv_field(doc_id), str(qid), str(sentence.sent_id),
                        f"{float(score):.4f}", "true" if score >= threshold else "false",
                        _tsv_field(sentence.text),
                    ]))
        payload = ("\n".join(lines) + "\n").encode("utf-8")
        self.store.put(f"{job.batch_id}/results.tsv", payload)
