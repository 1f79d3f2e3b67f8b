"""HTTP batch service: upload reports, poll a batch id, download results.

POST /batches persists the uploaded files and enqueues the job; a small
thread pool drains the queue through the three-stage pipeline. Status
reads return the latest published snapshot without locking. Jobs found in
a non-terminal state at startup are re-enqueued and resume at the start of
their interrupted stage.
"""

from __future__ import annotations

import json
import logging
import queue
import secrets
import threading
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from ..classifier import load_classifier
from ..config import ConfigError, RunConfig
from ..dataset import NUM_QUESTIONS, load_questions
from ..embeddings import load_model
from .jobs import BatchJob, BatchState, DocStatus, JobStore, NotFound
from .pipeline import BatchProcessor, doc_id_from_name
from .store import LocalFsStore

logger = logging.getLogger(__name__)

_QUEUE_STOP = None  # sentinel


def create_app(config: RunConfig) -> FastAPI:
    """Build the service; fails fast when model files are missing."""
    svc = config.service
    for label, path in (("embeddings", svc.embeddings_path), ("classifier", svc.classifier_path)):
        if not Path(path).is_file():
            raise ConfigError(f"{label} model file not found: {path}")
    embeddings = load_model(svc.embeddings_path)
    classifier = load_classifier(svc.classifier_path)
    if classifier.feature_dim != 4 * embeddings.dim + 1:
        raise ConfigError(
            f"classifier expects feature dim {classifier.feature_dim}, embeddings give "
            f"{4 * embeddings.dim + 1}"
        )
    questions = load_questions(svc.questions_path)
    store = LocalFsStore(svc.store_root)
    jobs = JobStore(store)
    processor = BatchProcessor(
        store, jobs, embeddings, classifier, questions,
        segmenter_config=config.segmenter,
        kern_space_threshold=config.kern_space_threshold,
    )
    work_queue: queue.Queue = queue.Queue()

    def worker_loop(idx: int) -> None:
        while True:
            batch_id = work_queue.get()
            if batch_id is _QUEUE_STOP:
                work_queue.task_done()
                return
            try:
                state = processor.run(batch_id)
                logger.info("worker %d finished %s: %s", idx, batch_id, state.value)
            except Exception:  # noqa: BLE001 - workers must survive anything
                logger.exception("worker %d: unhandled error on %s", idx, batch_id)
            finally:
                work_queue.task_done()

    threads: list[threading.Thread] = []

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        for batch_id in jobs.unfinished():
            logger.info("recovering unfinished batch %s", batch_id)
            work_queue.put(batch_id)
        for i in range(max(1, svc.workers)):
            t = threading.Thread(target=worker_loop, args=(i,), name=f"batch-worker-{i}", daemon=True)
            t.start()
            threads.append(t)
        yield
        for _ in threads:
            work_queue.put(_QUEUE_STOP)
        for t in threads:
            t.join(timeout=5)

    app = FastAPI(title="disclosure-qa", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.jobs = jobs
    app.state.store = store
    app.state.processor = processor
    app.state.work_queue = work_queue

    @app.post("/batches", status_code=201)
    async def submit_batch(request: Request):
        form = await request.form()
        uploads = form.getlist("files[]") or form.getlist("files")
        if not uploads:
            raise HTTPException(400, detail="EmptyBatch: no files uploaded")
        question_ids = list(range(1, NUM_QUESTIONS + 1))
        raw_qids = form.get("question_ids")
        if raw_qids:
            try:
                parsed = json.loads(raw_qids)
                assert isinstance(parsed, list) and parsed
                question_ids = sorted({int(q) for q in parsed})
            except (ValueError, TypeError, AssertionError):
                raise HTTPException(400, detail="UnknownQuestionId: question_ids must be a non-empty JSON array of integers")
            bad = [q for q in question_ids if not 1 <= q <= NUM_QUESTIONS]
            if bad:
                raise HTTPException(400, detail=f"UnknownQuestionId: {bad}")

        named: list[tuple[str, bytes]] = []
        seen_names: set[str] = set()
        for i, item in enumerate(uploads):
            if isinstance(item, str):
                raise HTTPException(400, detail="EmptyBatch: files[] must be file parts")
            data = await item.read()
            if len(data) > svc.max_upload_bytes:
                raise HTTPException(
                    413,
                    detail=f"FileTooLarge: {item.filename} exceeds {svc.max_upload_mb} MB",
                )
            name = Path(item.filename or f"upload-{i}").name
            base, n = name, 1
            while name in seen_names:
                n += 1
                name = f"{n}-{base}"
            seen_names.add(name)
            named.append((name, data))

        while True:
            batch_id = secrets.token_urlsafe(16)
            if not jobs.exists(batch_id):
                break
        taken: set[str] = set()
        docs = [DocStatus(name=name, doc_id=doc_id_from_name(name, taken)) for name, _ in named]
        for (name, data) in named:
            store.put(f"{batch_id}/raw/{name}", data)
        job = BatchJob(batch_id=batch_id, question_ids=question_ids, docs=docs)
        jobs.publish(job)
        work_queue.put(batch_id)
        return {"batch_id": batch_id}

    @app.get("/batches/{batch_id}")
    def get_status(batch_id: str):
        try:
            return jobs.get_snapshot(batch_id)
        except NotFound:
            raise HTTPException(404, detail=f"NotFound: unknown batch {batch_id}")

    @app.get("/batches/{batch_id}/results")
    def get_results(batch_id: str):
        try:
            snap = jobs.get_snapshot(batch_id)
        except NotFound:
            raise HTTPException(404, detail=f"NotFound: unknown batch {batch_id}")
        state = BatchState(snap["state"])
        if state is BatchState.FAILED:
            raise HTTPException(500, detail=f"JobFailed: {snap.get('error') or 'batch failed'}")
        if state is not BatchState.DONE:
            raise HTTPException(409, detail=f"NotReady: batch is {state.value}")
        data = store.get(f"{batch_id}/results.tsv")
        return Response(content=data, media_type="text/tab-separated-values")

    @app.get("/questions")
    def get_questions():
        return [{"qid": q.qid, "text": q.text} for q in questions]

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model_loaded": True, "dim": embeddings.dim}

    return app
