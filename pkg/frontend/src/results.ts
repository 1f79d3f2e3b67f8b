// Pure view-model builders for the passage explorer. The default filter
// shows exactly the rows the model marked as answers; moving the score
// slider switches to an explicit score cut-off.

import type { ResultRow } from "./tsv.js";

export type ScoreFilter =
  | { mode: "model" }
  | { mode: "threshold"; value: number };

export interface QuestionGroup {
  qid: number;
  rows: ResultRow[];
}

export interface PassageRef {
  docId: string;
  sentId: number;
}

export interface DocumentLine {
  sentId: number;
  text: string;
}

export function rowVisible(row: ResultRow, filter: ScoreFilter): boolean {
  if (filter.mode === "model") {
    return row.isAnswer;
  }
  return row.score >= filter.value;
}

export function visibleRows(rows: ResultRow[], filter: ScoreFilter): ResultRow[] {
  return rows.filter((r) => rowVisible(r, filter));
}

export function groupByQuestion(rows: ResultRow[]): QuestionGroup[] {
  const byQid = new Map<number, ResultRow[]>();
  for (const row of rows) {
    const bucket = byQid.get(row.qid);
    if (bucket) {
      bucket.push(row);
    } else {
      byQid.set(row.qid, [row]);
    }
  }
  return [...byQid.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([qid, groupRows]) => ({
      qid,
      rows: [...groupRows].sort(
        (a, b) => a.docId.localeCompare(b.docId) || a.sentId - b.sentId,
      ),
    }));
}

export function documentIds(rows: ResultRow[]): string[] {
  return [...new Set(rows.map((r) => r.docId))].sort();
}

// The explorable "document text" is reconstructed from the sentences the
// API returned (deduplicated across questions, ordered by sentence id);
// the service exposes no separate full-text endpoint.
export function documentLines(rows: ResultRow[], docId: string): DocumentLine[] {
  const seen = new Map<number, string>();
  for (const row of rows) {
    if (row.docId === docId && !seen.has(row.sentId)) {
      seen.set(row.sentId, row.sentenceText);
    }
  }
  return [...seen.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([sentId, text]) => ({ sentId, text }));
}

// Lowest score the model still called an answer; null when it called none.
export function inferredThreshold(rows: ResultRow[]): number | null {
  let min: number | null = null;
  for (const row of rows) {
    if (row.isAnswer && (min === null || row.score < min)) {
      min = row.score;
    }
  }
  return min;
}

export interface ResultsView {
  groups: QuestionGroup[];
  totalVisible: number;
  totalRows: number;
  docIds: string[];
}

export function buildResultsView(rows: ResultRow[], filter: ScoreFilter): ResultsView {
  const visible = visibleRows(rows, filter);
  return {
    groups: groupByQuestion(visible),
    totalVisible: visible.length,
    totalRows: rows.length,
    docIds: documentIds(rows),
  };
}
