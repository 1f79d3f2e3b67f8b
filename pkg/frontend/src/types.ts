// Shapes of the service API payloads the UI consumes. The UI never derives
// or rewrites these values; it only renders them.

export interface DocProgress {
  name: string;
  doc_id: string;
  status: "pending" | "ok" | "failed";
  error: string | null;
}

export interface BatchStatus {
  batch_id: string;
  state: "Queued" | "Extracting" | "Parsing" | "Inferring" | "Done" | "Failed";
  question_ids: number[];
  docs: DocProgress[];
  created_at: string;
  updated_at: string;
  error: string | null;
}

export interface Question {
  qid: number;
  text: string;
}

export const TERMINAL_STATES: ReadonlySet<string> = new Set(["Done", "Failed"]);
