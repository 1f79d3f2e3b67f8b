import { describe, expect, it } from "vitest";

import { recentBatches, rememberBatch, StorageLike } from "../src/storage.js";

function memoryStorage(): StorageLike {
  const data = new Map<string, string>();
  return {
    getItem: (k) => data.get(k) ?? null,
    setItem: (k, v) => void data.set(k, v),
  };
}

describe("batch id storage", () => {
  it("remembers most recent first", () => {
    const storage = memoryStorage();
    rememberBatch(storage, "one", () => "t1");
    rememberBatch(storage, "two", () => "t2");
    expect(recentBatches(storage).map((b) => b.batchId)).toEqual(["two", "one"]);
  });

  it("dedupes re-opened batches", () => {
    const storage = memoryStorage();
    rememberBatch(storage, "one", () => "t1");
    rememberBatch(storage, "two", () => "t2");
    rememberBatch(storage, "one", () => "t3");
    const batches = recentBatches(storage);
    expect(batches.map((b) => b.batchId)).toEqual(["one", "two"]);
    expect(batches[0].submittedAt).toBe("t3");
  });

  it("caps the remembered list", () => {
    const storage = memoryStorage();
    for (let i = 0; i < 30; i++) {
      rememberBatch(storage, `batch-${i}`, () => `t${i}`);
    }
    expect(recentBatches(storage)).toHaveLength(20);
  });

  it("tolerates corrupted payloads", () => {
    const storage = memoryStorage();
    storage.setItem("disclosure-qa.batches", "{not json");
    expect(recentBatches(storage)).toEqual([]);
    storage.setItem("disclosure-qa.batches", JSON.stringify({ nope: 1 }));
    expect(recentBatches(storage)).toEqual([]);
  });
});
