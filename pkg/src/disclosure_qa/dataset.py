"""Labeled question-sentence pairs: loading, negatives, company splits.

Positives are the analyst-marked (question, sentence) combinations;
negatives are every remaining combination of the 14 questions with the
document's sentences. Splits are assigned per company so no issuer leaks
across train/dev/test, and negatives are subsampled to a configurable
ratio, stratified by question id.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .pdf_extract import DocMeta, RawDocument, Sector, extract_plain_text
from .segmenter import SegmenterConfig, Sentence, normalize_text, split_sentences

logger = logging.getLogger(__name__)

NUM_QUESTIONS = 14

POSITIVE = "positive"
NEGATIVE = "negative"

# Default negative:positive ratios mirroring the deployed system's set
# composition (train and dev 10:1, test 3:1).
DEFAULT_NEG_PER_POS = {"train": 10.0, "dev": 10.0, "test": 3.0}
DEFAULT_SPLIT_RATIOS = (0.8, 0.1, 0.1)

SPLIT_NAMES = ("train", "dev", "test")


class DatasetError(Exception):
    pass


class SchemaError(DatasetError):
    """Annotation file violates the expected JSON shape; carries the path."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DanglingAnswer(DatasetError):
    """An answer references a sent_id outside the document's sentences."""


class TooFewCompanies(DatasetError):
    pass


@dataclass(frozen=True)
class TcfdQuestion:
    qid: int
    text: str


@dataclass(frozen=True)
class LabeledDoc:
    doc: RawDocument
    sentences: tuple[Sentence, ...]
    answers: frozenset[tuple[int, int]]  # (qid, sent_id)


@dataclass(frozen=True)
class QAPair:
    qid: int
    doc_id: str
    sent_id: int
    sentence_text: str
    label: str
    company: str
    sector: Sector

    def __post_init__(self) -> None:
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"bad label {self.label!r}")


@dataclass(frozen=True)
class SplitDataset:
    train: tuple[QAPair, ...]
    dev: tuple[QAPair, ...]
    test: tuple[QAPair, ...]
    split_manifest: dict[str, str]  # company -> split name
    seed: int

    def split(self, name: str) -> tuple[QAPair, ...]:
        return {"train": self.train, "dev": self.dev, "test": self.test}[name]


def load_questions(path: str | Path | None = None) -> list[TcfdQuestion]:
    """Load the question set; defaults to the packaged 14 TCFD questions."""
    if path is None:
        raw = resources.files("disclosure_qa.data").joinpath("tcfd_questions.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    items = json.loads(raw)
    questions = [TcfdQuestion(qid=int(it["qid"]), text=str(it["text"])) for it in items]
    qids = sorted(q.qid for q in questions)
    if qids != list(range(1, NUM_QUESTIONS + 1)):
        raise SchemaError(f"question file must contain qids 1..{NUM_QUESTIONS}, got {qids}")
    return sorted(questions, key=lambda q: q.qid)


def _expect(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise SchemaError(message, path)


def load_labels(
    path: str | Path,
    segmenter_config: SegmenterConfig | None = None,
) -> list[LabeledDoc]:
    """Load an annotation file and its referenced texts into LabeledDocs.

    Answers index sentences produced by the given segmenter config, so the
    same config must be used here as was used when annotating.
    """
    path = Path(path)
    try:
        docs_json = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    _expect(isinstance(docs_json, list), "top level must be an array", "$")

    out: list[LabeledDoc] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(docs_json):
        where = f"$[{i}]"
        _expect(isinstance(entry, dict), "document entry must be an object", where)
        for key in ("doc_id", "company", "sector", "text_file", "answers"):
            _expect(key in entry, f"missing field {key!r}", where)
        doc_id = entry["doc_id"]
        _expect(isinstance(doc_id, str) and doc_id, "doc_id must be a non-empty string", f"{where}.doc_id")
        _expect(doc_id not in seen_ids, f"duplicate doc_id {doc_id!r}", f"{where}.doc_id")
        seen_ids.add(doc_id)
        _expect(isinstance(entry["company"], str) and entry["company"], "company must be a non-empty string", f"{where}.company")
        try:
            sector = Sector.parse(str(entry["sector"]))
        except ValueError as exc:
            raise SchemaError(str(exc), f"{where}.sector") from exc
        year = entry.get("year")
        _expect(year is None or isinstance(year, int), "year must be an integer or null", f"{where}.year")
        _expect(isinstance(entry["answers"], list), "answers must be an array", f"{where}.answers")

        text_path = (path.parent / entry["text_file"]).resolve()
        try:
            raw = extract_plain_text(
                text_path.read_bytes(),
                doc_id=doc_id,
                source_name=str(entry["text_file"]),
                meta=DocMeta(company=entry["company"], sector=sector, year=year),
            )
        except OSError as exc:
            raise SchemaError(f"cannot read text_file: {exc}", f"{where}.text_file") from exc
        normalized = RawDocument(
            doc_id=raw.doc_id,
            source_name=raw.source_name,
            text=normalize_text(raw.text),
            page_breaks=[0] if raw.text else [],
            meta=raw.meta,
        )
        sentences = tuple(split_sentences(normalized, segmenter_config))

        answers: set[tuple[int, int]] = set()
        for j, ans in enumerate(entry["answers"]):
            apath = f"{where}.answers[{j}]"
            _expect(isinstance(ans, dict), "answer must be an object", apath)
            _expect("qid" in ans and "sent_id" in ans, "answer needs qid and sent_id", apath)
            qid, sent_id = ans["qid"], ans["sent_id"]
            _expect(isinstance(qid, int) and 1 <= qid <= NUM_QUESTIONS,
                    f"qid must be in 1..{NUM_QUESTIONS}, got {qid!r}", f"{apath}.qid")
            _expect(isinstance(sent_id, int), "sent_id must be an integer", f"{apath}.sent_id")
            if not 0 <= sent_id < len(sentences):
                raise DanglingAnswer(
                    f"{apath}: sent_id {sent_id} out of range for doc {doc_id!r} "
                    f"({len(sentences)} sentences)"
                )
            answers.add((qid, sent_id))
        out.append(LabeledDoc(doc=normalized, sentences=sentences, answers=frozenset(answers)))
    return out


def build_pairs(docs: list[LabeledDoc], questions: list[TcfdQuestion]) -> list[QAPair]:
    """All (question, sentence) combinations in (doc, qid, sent_id) order;
    label follows membership in the document's answer set."""
    pairs: list[QAPair] = []
    for doc in docs:
        company = doc.doc.meta.company
        sector = doc.doc.meta.sector
        for question in sorted(questions, key=lambda q: q.qid):
            for sentence in doc.sentences:
                label = POSITIVE if (question.qid, sentence.sent_id) in doc.answers else NEGATIVE
                pairs.append(QAPair(
                    qid=question.qid,
                    doc_id=doc.doc.doc_id,
                    sent_id=sentence.sent_id,
                    sentence_text=sentence.text,
                    label=label,
                    company=company,
                    sector=sector,
                ))
    return pairs


def split_by_company(
    pairs: list[QAPair],
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
    seed: int = 0,
) -> SplitDataset:
    """Assign whole companies to train/dev/test, approximating the ratios
    by pair count with a greedy largest-company-first pass."""
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    by_company: dict[str, int] = {}
    for pair in pairs:
        by_company[pair.company] = by_company.get(pair.company, 0) + 1
    if len(by_company) < 3:
        raise TooFewCompanies(f"need at least 3 companies, got {len(by_company)}")

    companies = sorted(by_company)
    random.Random(seed).shuffle(companies)
    # Stable sort keeps the shuffled order among equally-sized companies.
    companies.sort(key=lambda c: -by_company[c])

    total = len(pairs)
    deficits = [r * total for r in ratios]
    manifest: dict[str, str] = {}
    for company in companies:
        idx = max(range(3), key=lambda k: deficits[k])
        manifest[company] = SPLIT_NAMES[idx]
        deficits[idx] -= by_company[company]

    buckets: dict[str, list[QAPair]] = {name: [] for name in SPLIT_NAMES}
    for pair in pairs:
        buckets[manifest[pair.company]].append(pair)
    return SplitDataset(
        train=tuple(buckets["train"]),
        dev=tuple(buckets["dev"]),
        test=tuple(buckets["test"]),
        split_manifest=dict(sorted(manifest.items())),
        seed=seed,
    )


def subsample_negatives(pairs: list[QAPair], neg_per_pos: float, seed: int = 0) -> list[QAPair]:
    """Keep all positives; sample negatives down to round(neg_per_pos x P).

    The target is allocated across question ids in proportion to each
    question's positives (largest-remainder rounding); a question whose
    negative pool is too small spills its share onto the global pool. If
    negatives are scarce overall, everything is kept and the achieved ratio
    logged.
    """
    if neg_per_pos <= 0:
        raise ValueError("neg_per_pos must be positive")
    positives = [p for p in pairs if p.label == POSITIVE]
    negatives = [p for p in pairs if p.label == NEGATIVE]
    target = round(neg_per_pos * len(positives))
    if len(negatives) <= target:
        if negatives and positives:
            logger.warning(
                "negative pool too small: kept all %d negatives (achieved ratio %.2f, wanted %.2f)",
                len(negatives), len(negatives) / len(positives), neg_per_pos,
            )
        return list(pairs)

    pos_per_qid: dict[int, int] = {}
    for p in positives:
        pos_per_qid[p.qid] = pos_per_qid.get(p.qid, 0) + 1
    pool_by_qid: dict[int, list[int]] = {}
    for i, p in enumerate(negatives):
        pool_by_qid.setdefault(p.qid, []).append(i)

    quotas = _largest_remainder(
        {qid: neg_per_pos * n for qid, n in pos_per_qid.items()}, target
    )
    rng = random.Random(seed)
    chosen: set[int] = set()
    for qid in sorted(quotas):
        pool = pool_by_qid.get(qid, [])
        chosen.update(rng.sample(pool, min(quotas[qid], len(pool))))
    shortfall = target - len(chosen)
    if shortfall > 0:
        remaining = [i for i in range(len(negatives)) if i not in chosen]
        chosen.update(rng.sample(remaining, min(shortfall, len(remaining))))

    kept = {negatives[i] for i in chosen}
    return [p for p in pairs if p.label == POSITIVE or p in kept]


def _largest_remainder(weights: dict[int, float], total: int) -> dict[int, int]:
    """Integer allocation of ``total`` proportional to ``weights``."""
    if not weights or total <= 0:
        return {k: 0 for k in weights}
    scale = total / sum(weights.values())
    floors = {k: int(w * scale) for k, w in weights.items()}
    remainders = sorted(
        weights, key=lambda k: (-(weights[k] * scale - floors[k]), k)
    )
    leftover = total - sum(floors.values())
    for k in remainders[:leftover]:
        floors[k] += 1
    return floors


# --------------------------------------------------------------------------
# Pair TSV
# --------------------------------------------------------------------------

PAIR_TSV_HEADER = "split\tqid\tdoc_id\tsent_id\tlabel\tcompany\tsector\tsentence_text"


def _field(value: str) -> str:
    return value.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def write_pairs_tsv(dataset: SplitDataset, sink) -> int:
    """Write all splits to one TSV; returns data row count."""
    lines = [PAIR_TSV_HEADER]
    for split_name in SPLIT_NAMES:
        for p in dataset.split(split_name):
            lines.append("\t".join([
                split_name, str(p.qid), _field(p.doc_id), str(p.sent_id), p.label,
                _field(p.company), _field(p.sector.value), _field(p.sentence_text),
            ]))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    sink.write(payload)
    return len(lines) - 1


def read_pairs_tsv(data: bytes) -> dict[str, list[QAPair]]:
    """Parse a pair TSV back into per-split pair lists."""
    lines = data.decode("utf-8").splitlines()
    if not lines or lines[0] != PAIR_TSV_HEADER:
        raise SchemaError("missing pair TSV header")
    out: dict[str, list[QAPair]] = {name: [] for name in SPLIT_NAMES}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 8:
            raise SchemaError(f"expected 8 fields, got {len(fields)}", f"line {lineno}")
        split_name, qid, doc_id, sent_id, label, company, sector, text = fields
        if split_name not in out:
            raise SchemaError(f"unknown split {split_name!r}", f"line {lineno}")
        out[split_name].append(QAPair(
            qid=int(qid), doc_id=doc_id, sent_id=int(sent_id), sentence_text=text,
            label=label, company=company, sector=Sector.parse(sector),
        ))
    return out
