// Thin typed client over the service HTTP API. Error details are passed
// through verbatim so the UI can surface exactly what the service said.

import type { BatchStatus, Question } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

export interface UploadFilePart {
  name: string;
  data: Blob;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `${response.status} ${response.statusText}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") {
          detail = body.detail;
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async submitBatch(files: UploadFilePart[], questionIds?: number[]): Promise<string> {
    const form = new FormData();
    for (const f of files) {
      form.append("files[]", f.data, f.name);
    }
    if (questionIds && questionIds.length) {
      form.append("question_ids", JSON.stringify(questionIds));
    }
    const response = await this.request("/batches", { method: "POST", body: form });
    const body = (await response.json()) as { batch_id: string };
    return body.batch_id;
  }

  async getStatus(batchId: string): Promise<BatchStatus> {
    const response = await this.request(`/batches/${encodeURIComponent(batchId)}`);
    return (await response.json()) as BatchStatus;
  }

  async getResultsTsv(batchId: string): Promise<string> {
    const response = await this.request(`/batches/${encodeURIComponent(batchId)}/results`);
    return await response.text();
  }

  async getQuestions(): Promise<Question[]> {
    const response = await this.request("/questions");
    return (await response.json()) as Question[];
  }
}
