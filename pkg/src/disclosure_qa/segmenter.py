"""Text normalization and rule-based sentence segmentation.

Splitting is deterministic: a boundary is a ``.``, ``?`` or ``!`` followed
by whitespace and an uppercase/digit sentence start, unless the terminator
belongs to a known abbreviation, a decimal number, or a single-letter
initial. Blank lines always end a sentence. Sentences outside the
configured length band are dropped (page numbers, headers, stray cells).
"""

from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass

from .pdf_extract import RawDocument

logger = logging.getLogger(__name__)

DEFAULT_ABBREVIATIONS = (
    "Inc.", "Ltd.", "Corp.", "Co.", "U.S.", "U.K.", "E.U.",
    "Mr.", "Ms.", "Mrs.", "Dr.", "No.", "Fig.", "approx.",
    "etc.", "e.g.", "i.e.", "vs.", "St.",
)


@dataclass(frozen=True)
class SegmenterConfig:
    min_len: int = 20
    max_len: int = 1000
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS

    def __post_init__(self) -> None:
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ValueError("need 1 <= min_len <= max_len")


@dataclass(frozen=True)
class Sentence:
    """One candidate answer unit with a stable id and character span."""

    sent_id: int
    doc_id: str
    text: str
    span: tuple[int, int]


@dataclass
class SegmentStats:
    kept: int = 0
    dropped_short: int = 0
    dropped_long: int = 0


_HYPHEN_BREAK_RE = re.compile(r"(?<=\w)-\n(?=\w)")
_SPACE_RUN_RE = re.compile(r"[ \t]+")
_NEWLINE_RUN_RE = re.compile(r"\n{3,}")


def normalize_text(text: str) -> str:
    """NFC-normalize and tidy whitespace; idempotent."""
    text = unicodedata.normalize("NFC", text)
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    text = _HYPHEN_BREAK_RE.sub("", text)
    text = _SPACE_RUN_RE.sub(" ", text)
    text = _NEWLINE_RUN_RE.sub("\n\n", text)
    return text


# A terminator candidate: . ? or ! followed by run of whitespace, then the
# start of the next sentence (captured to test the uppercase/digit rule).
_BOUNDARY_RE = re.compile(r"[.?!](?=(\s+)(\S))")
_BLANK_LINE_RE = re.compile(r"\n[ \t]*\n")
_WORD_BEFORE_RE = re.compile(r"(\S+)$")


def _is_suppressed(text: str, end: int, abbreviations: frozenset[str]) -> bool:
    """True when the terminator at ``end - 1`` must not split."""
    before = _WORD_BEFORE_RE.search(text, 0, end)
    token = before.group(1) if before else ""
    if token in abbreviations:
        return True
    # Single-letter initial: "J. P. Morgan", "George W. Bush".
    if len(token) == 2 and token[0].isupper() and token[1] == ".":
        return True
    return False


def split_sentences(
    doc: RawDocument,
    config: SegmenterConfig | None = None,
    stats: SegmentStats | None = None,
) -> list[Sentence]:
    """Segment ``doc.text`` (assumed normalized) into Sentence records.

    Spans index into ``doc.text``; each sentence's text is the normalized,
    trimmed slice. Length filtering applies to the trimmed text.
    """
    config = config or SegmenterConfig()
    abbreviations = frozenset(config.abbreviations)
    text = doc.text

    # Collect cut positions: each is the index right after a sentence end.
    cuts: set[int] = set()
    for m in _BOUNDARY_RE.finditer(text):
        nxt = m.group(2)[0]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if _is_suppressed(text, m.end(), abbreviations):
            continue
        cuts.add(m.end())
    for m in _BLANK_LINE_RE.finditer(text):
        cuts.add(m.start())

    sentences: list[Sentence] = []
    stats = stats if stats is not None else SegmentStats()
    start = 0
    for cut in sorted(cuts | {len(text)}):
        if cut < start:
            continue
        _emit(doc, text[start:cut], start, config, sentences, stats)
        start = cut
    logger.debug(
        "segmented %s: %d kept, %d short, %d long",
        doc.doc_id, stats.kept, stats.dropped_short, stats.dropped_long,
    )
    return sentences


def _emit(
    doc: RawDocument,
    chunk: str,
    offset: int,
    config: SegmenterConfig,
    sentences: list[Sentence],
    stats: SegmentStats,
) -> None:
    stripped = chunk.strip()
    if not stripped:
        return
    lead = len(chunk) - len(chunk.lstrip())
    span = (offset + lead, offset + lead + len(stripped))
    clean = normalize_text(stripped).strip()
    if len(clean) < config.min_len:
        stats.dropped_short += 1
        return
    if len(clean) > config.max_len:
        stats.dropped_long += 1
        return
    sentences.append(Sentence(sent_id=len(sentences), doc_id=doc.doc_id, text=clean, span=span))
    stats.kept += 1


SENTENCE_TSV_HEADER = "doc_id\tsent_id\tstart\tend\ttext"


def _tsv_field(value: str) -> str:
    return value.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def write_sentences_tsv(sentences: list[Sentence], sink) -> int:
    """Write the sentence TSV (UTF-8, LF) to a binary sink; returns row count."""
    lines = [SENTENCE_TSV_HEADER]
    for s in sentences:
        lines.append(
            f"{_tsv_field(s.doc_id)}\t{s.sent_id}\t{s.span[0]}\t{s.span[1]}\t{_tsv_field(s.text)}"
        )
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    sink.write(payload)
    return len(sentences)


def read_sentences_tsv(data: bytes) -> list[Sentence]:
    """Parse a sentence TSV produced by write_sentences_tsv."""
    lines = data.decode("utf-8").splitlines()
    if not lines or lines[0] != SENTENCE_TSV_HEADER:
        raise ValueError("missing sentence TSV header")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ValueError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        doc_id, sent_id, start, end, text = fields
        out.append(Sentence(sent_id=int(sent_id), doc_id=doc_id, text=text, span=(int(start), int(end))))
    return out
