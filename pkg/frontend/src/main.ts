// DOM wiring for the analyst UI. All data shown comes straight from API
// payloads; the pure view logic lives in results.ts / tsv.ts and is what
// the test suite exercises.

import { ApiClient, ApiError, UploadFilePart } from "./api.js";
import { PollHandle, pollBatch } from "./polling.js";
import {
  ScoreFilter,
  buildResultsView,
  documentLines,
  inferredThreshold,
} from "./results.js";
import { rememberBatch, recentBatches } from "./storage.js";
import { ResultRow, parseResultsTsv } from "./tsv.js";
import type { BatchStatus, Question } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8000";
const api = new ApiClient(apiBase);

const state: {
  poll: PollHandle | null;
  rows: ResultRow[];
  rawTsv: string;
  filter: ScoreFilter;
  batchId: string | null;
  selectedDoc: string | null;
} = { poll: null, rows: [], rawTsv: "", filter: { mode: "model" }, batchId: null, selectedDoc: null };

// ---------------------------------------------------------------- upload

const fileInput = el<HTMLInputElement>("file-input");
const submitButton = el<HTMLButtonElement>("submit-button");
const uploadError = el<HTMLDivElement>("upload-error");
const questionBoxes = el<HTMLDivElement>("question-boxes");

function refreshSubmitEnabled(): void {
  submitButton.disabled = !fileInput.files || fileInput.files.length === 0;
}

fileInput.addEventListener("change", refreshSubmitEnabled);

async function loadQuestions(): Promise<void> {
  let questions: Question[];
  try {
    questions = await api.getQuestions();
  } catch (err) {
    uploadError.textContent = describeError(err);
    return;
  }
  questionBoxes.innerHTML = "";
  for (const q of questions) {
    const label = document.createElement("label");
    label.className = "question-box";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = true;
    box.value = String(q.qid);
    label.appendChild(box);
    label.appendChild(document.createTextNode(` Q${q.qid}. ${q.text}`));
    questionBoxes.appendChild(label);
  }
}

function selectedQuestionIds(): number[] {
  return [...questionBoxes.querySelectorAll<HTMLInputElement>("input:checked")]
    .map((box) => Number(box.value));
}

submitButton.addEventListener("click", async () => {
  uploadError.textContent = "";
  const files = fileInput.files;
  if (!files || files.length === 0) {
    return;
  }
  const parts: UploadFilePart[] = [...files].map((f) => ({ name: f.name, data: f }));
  submitButton.disabled = true;
  try {
    const batchId = await api.submitBatch(parts, selectedQuestionIds());
    rememberBatch(window.localStorage, batchId);
    renderRecent();
    openBatch(batchId);
  } catch (err) {
    uploadError.textContent = describeError(err);
  } finally {
    refreshSubmitEnabled();
  }
});

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return err.detail;
  }
  return err instanceof Error ? err.message : String(err);
}

// ---------------------------------------------------------------- recent

const recentList = el<HTMLUListElement>("recent-batches");
const lookupInput = el<HTMLInputElement>("lookup-input");
el<HTMLButtonElement>("lookup-button").addEventListener("click", () => {
  const id = lookupInput.value.trim();
  if (id) {
    openBatch(id);
  }
});

function renderRecent(): void {
  recentList.innerHTML = "";
  for (const batch of recentBatches(window.localStorage)) {
    const item = document.createElement("li");
    const link = document.createElement("a");
    link.href = "#";
    link.textContent = `${batch.batchId} (${batch.submittedAt})`;
    link.addEventListener("click", (ev) => {
      ev.preventDefault();
      openBatch(batch.batchId);
    });
    item.appendChild(link);
    recentList.appendChild(item);
  }
}

// ---------------------------------------------------------------- status

const statusPanel = el<HTMLDivElement>("status-panel");
const statusBadge = el<HTMLSpanElement>("status-state");
const statusBatchId = el<HTMLSpanElement>("status-batch-id");
const statusDocs = el<HTMLUListElement>("status-docs");
const statusError = el<HTMLDivElement>("status-error");

function openBatch(batchId: string): void {
  state.poll?.stop();
  state.batchId = batchId;
  statusPanel.hidden = false;
  statusBatchId.textContent = batchId;
  statusBadge.textContent = "…";
  statusError.textContent = "";
  el<HTMLDivElement>("results-panel").hidden = true;
  state.poll = pollBatch(
    () => api.getStatus(batchId),
    (status) => renderStatus(status),
    (err) => {
      if (err instanceof ApiError && err.status === 404) {
        statusError.textContent = `unknown batch ${batchId}`;
      } else {
        statusError.textContent = describeError(err);
      }
      statusBadge.textContent = "?";
    },
  );
}

function renderStatus(status: BatchStatus): void {
  statusBadge.textContent = status.state;
  statusBadge.dataset.state = status.state;
  statusDocs.innerHTML = "";
  for (const doc of status.docs) {
    const item = document.createElement("li");
    item.textContent = `${doc.name}: ${doc.status}` + (doc.error ? ` (${doc.error})` : "");
    statusDocs.appendChild(item);
  }
  if (status.state === "Failed") {
    statusError.textContent = status.error ?? "batch failed";
  } else if (status.state === "Done") {
    void loadResults(status.batch_id);
  }
}

// ---------------------------------------------------------------- results

const resultsPanel = el<HTMLDivElement>("results-panel");
const groupsPane = el<HTMLDivElement>("question-groups");
const documentPane = el<HTMLDivElement>("document-pane");
const docSelect = el<HTMLSelectElement>("doc-select");
const slider = el<HTMLInputElement>("score-slider");
const sliderValue = el<HTMLSpanElement>("slider-value");
const modelModeButton = el<HTMLButtonElement>("model-mode");
const visibleCount = el<HTMLSpanElement>("visible-count");

async function loadResults(batchId: string): Promise<void> {
  try {
    state.rawTsv = await api.getResultsTsv(batchId);
    state.rows = parseResultsTsv(state.rawTsv);
  } catch (err) {
    statusError.textContent = describeError(err);
    return;
  }
  state.filter = { mode: "model" };
  const threshold = inferredThreshold(state.rows);
  slider.value = threshold === null ? "1" : String(threshold);
  resultsPanel.hidden = false;
  docSelect.innerHTML = "";
  for (const docId of buildResultsView(state.rows, state.filter).docIds) {
    const option = document.createElement("option");
    option.value = docId;
    option.textContent = docId;
    docSelect.appendChild(option);
  }
  state.selectedDoc = docSelect.value || null;
  renderResults();
}

slider.addEventListener("input", () => {
  state.filter = { mode: "threshold", value: Number(slider.value) };
  renderResults();
});

modelModeButton.addEventListener("click", () => {
  state.filter = { mode: "model" };
  const threshold = inferredThreshold(state.rows);
  slider.value = threshold === null ? "1" : String(threshold);
  renderResults();
});

docSelect.addEventListener("change", () => {
  state.selectedDoc = docSelect.value || null;
  renderDocumentPane();
});

el<HTMLButtonElement>("export-button").addEventListener("click", () => {
  const blob = new Blob([state.rawTsv], { type: "text/tab-separated-values" });
  const url = URL.createObjectURL(blob);
  const link = document.createElement("a");
  link.href = url;
  link.download = `${state.batchId ?? "results"}.tsv`;
  link.click();
  URL.revokeObjectURL(url);
});

function renderResults(): void {
  const view = buildResultsView(state.rows, state.filter);
  sliderValue.textContent =
    state.filter.mode === "model" ? "model decisions" : `score ≥ ${slider.value}`;
  visibleCount.textContent = `${view.totalVisible} of ${view.totalRows} scored pairs shown`;
  groupsPane.innerHTML = "";
  for (const group of view.groups) {
    const section = document.createElement("section");
    const heading = document.createElement("h3");
    heading.textContent = `Question ${group.qid}`;
    section.appendChild(heading);
    for (const row of group.rows) {
      const passage = document.createElement("div");
      passage.className = "passage";
      const badge = document.createElement("span");
      badge.className = row.isAnswer ? "score answer" : "score";
      badge.textContent = row.scoreText;
      passage.appendChild(badge);
      passage.appendChild(document.createTextNode(` ${row.sentenceText}`));
      passage.title = `${row.docId} sentence ${row.sentId}`;
      passage.addEventListener("click", () => focusPassage(row.docId, row.sentId));
      section.appendChild(passage);
    }
    groupsPane.appendChild(section);
  }
  renderDocumentPane();
}

function renderDocumentPane(): void {
  documentPane.innerHTML = "";
  if (!state.selectedDoc) {
    return;
  }
  for (const line of documentLines(state.rows, state.selectedDoc)) {
    const paragraph = document.createElement("p");
    paragraph.id = `sent-${state.selectedDoc}-${line.sentId}`;
    paragraph.textContent = line.text;
    documentPane.appendChild(paragraph);
  }
}

function focusPassage(docId: string, sentId: number): void {
  if (state.selectedDoc !== docId) {
    state.selectedDoc = docId;
    docSelect.value = docId;
    renderDocumentPane();
  }
  const target = document.getElementById(`sent-${docId}-${sentId}`);
  if (target) {
    target.scrollIntoView({ behavior: "smooth", block: "center" });
    target.classList.add("flash");
    setTimeout(() => target.classList.remove("flash"), 1200);
  }
}

// ---------------------------------------------------------------- boot

renderRecent();
refreshSubmitEnabled();
void loadQuestions();
