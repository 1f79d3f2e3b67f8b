// Status polling with backoff: immediate first check, then delays growing
// 2s -> 4s -> 8s -> 10s (capped). Stops on Done/Failed or on error.

import type { BatchStatus } from "./types.js";
import { TERMINAL_STATES } from "./types.js";

export interface PollOptions {
  initialMs?: number;
  maxMs?: number;
  factor?: number;
}

export interface PollHandle {
  stop(): void;
}

export function pollBatch(
  getStatus: () => Promise<BatchStatus>,
  onUpdate: (status: BatchStatus) => void,
  onError: (err: unknown) => void,
  opts: PollOptions = {},
): PollHandle {
  const initialMs = opts.initialMs ?? 2000;
  const maxMs = opts.maxMs ?? 10000;
  const factor = opts.factor ?? 2;
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | undefined;
  let delay = initialMs;

  const tick = async () => {
    if (stopped) {
      return;
    }
    let status: BatchStatus;
    try {
      status = await getStatus();
    } catch (err) {
      stopped = true;
      onError(err);
      return;
    }
    if (stopped) {
      return;
    }
    onUpdate(status);
    if (TERMINAL_STATES.has(status.state)) {
      stopped = true;
      return;
    }
    timer = setTimeout(tick, delay);
    delay = Math.min(maxMs, delay * factor);
  };

  void tick();
  return {
    stop() {
      stopped = true;
      if (timer !== undefined) {
        clearTimeout(timer);
      }
    },
  };
}
