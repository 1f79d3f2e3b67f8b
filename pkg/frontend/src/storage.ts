// Batch ids are remembered locally so analysts can come back for results
// later; uses an injected Storage-like object for testability.

export interface StoredBatch {
  batchId: string;
  submittedAt: string;
}

export type StorageLike = Pick<Storage, "getItem" | "setItem">;

const KEY = "disclosure-qa.batches";
const MAX_REMEMBERED = 20;

export function recentBatches(storage: StorageLike): StoredBatch[] {
  const raw = storage.getItem(KEY);
  if (!raw) {
    return [];
  }
  try {
    const parsed = JSON.parse(raw);
    if (!Array.isArray(parsed)) {
      return [];
    }
    return parsed.filter(
      (b): b is StoredBatch =>
        typeof b === "object" && b !== null &&
        typeof b.batchId === "string" && typeof b.submittedAt === "string",
    );
  } catch {
    return [];
  }
}

export function rememberBatch(
  storage: StorageLike,
  batchId: string,
  now: () => string = () => new Date().toISOString(),
): StoredBatch[] {
  const existing = recentBatches(storage).filter((b) => b.batchId !== batchId);
  const updated = [{ batchId, submittedAt: now() }, ...existing].slice(0, MAX_REMEMBERED);
  storage.setItem(KEY, JSON.stringify(updated));
  return updated;
}
