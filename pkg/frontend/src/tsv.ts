// Client-side parsing of the results TSV. Scores keep their verbatim
// field text so everything shown on screen is byte-traceable to the
// download; the parsed float is used only for filtering.

export const RESULTS_HEADER = "doc_id\tqid\tsent_id\tscore\tis_answer\tsentence_text";

export interface ResultRow {
  docId: string;
  qid: number;
  sentId: number;
  score: number;
  scoreText: string;
  isAnswer: boolean;
  sentenceText: string;
}

export class TsvError extends Error {}

export function parseResultsTsv(text: string): ResultRow[] {
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") {
    lines.pop();
  }
  if (lines.length === 0 || lines[0] !== RESULTS_HEADER) {
    throw new TsvError(`missing results header, got: ${lines[0] ?? "<empty>"}`);
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = lines[i].split("\t");
    if (fields.length !== 6) {
      throw new TsvError(`line ${i + 1}: expected 6 fields, got ${fields.length}`);
    }
    const [docId, qid, sentId, scoreText, isAnswer, sentenceText] = fields;
    if (isAnswer !== "true" && isAnswer !== "false") {
      throw new TsvError(`line ${i + 1}: bad is_answer ${isAnswer}`);
    }
    const score = Number(scoreText);
    if (!Number.isFinite(score)) {
      throw new TsvError(`line ${i + 1}: bad score ${scoreText}`);
    }
    rows.push({
      docId,
      qid: Number(qid),
      sentId: Number(sentId),
      score,
      scoreText,
      isAnswer: isAnswer === "true",
      sentenceText,
    });
  }
  return rows;
}

export function serializeResultsTsv(rows: ResultRow[]): string {
  const lines = [RESULTS_HEADER];
  for (const r of rows) {
    lines.push(
      [r.docId, String(r.qid), String(r.sentId), r.scoreText,
       r.isAnswer ? "true" : "false", r.sentenceText].join("\t"),
    );
  }
  return lines.join("\n") + "\n";
}
