import { describe, expect, it } from "vitest";

import { ApiError } from "./api.js";
import type { LogSegment, TaskInfo } from "./api.js";
import { RunViewState, pollRunView } from "./runView.js";
import type { TaskApi } from "./runView.js";

function task(state: string, exit: number | null = null): TaskInfo {
  return {
    id: "abc123",
    kind: "run",
    subject: "org.example:seg:1.2.0",
    state,
    exit_status: exit,
    log_path: "/logs/abc123.log",
    created_at: "2024-01-01T00:00:00+00:00",
    finished_at: null,
  };
}

/** Scripted fixture: the log grows with each poll; states follow a script. */
class FixtureApi implements TaskApi {
  polls = 0;
  constructor(
    private states: string[],
    private logBytes: Uint8Array,
    private revealPerPoll: number[],
  ) {}

  private revealed(): number {
    const index = Math.min(this.polls - 1, this.revealPerPoll.length - 1);
    return this.revealPerPoll[index];
  }

  async task(): Promise<TaskInfo> {
    this.polls++;
    const state = this.states[Math.min(this.polls - 1, this.states.length - 1)];
    return task(state, state === "succeeded" ? 0 : null);
  }

  async taskLog(_id: string, offset: number, maxLen: number): Promise<LogSegment> {
    const available = this.logBytes.slice(offset, Math.min(this.revealed(), offset + maxLen));
    const terminal = this.states[Math.min(this.polls - 1, this.states.length - 1)];
    const data = Buffer.from(available).toString("base64");
    return {
      data_b64: data,
      next_offset: offset + available.length,
      eof: (terminal === "succeeded" || terminal === "failed") && available.length === 0,
    };
  }
}

const LOG_TEXT = "OUT starting\nOUT naïve α line\nERR warning\nOUT done\n";
const LOG_BYTES = new TextEncoder().encode(LOG_TEXT);

describe("RunViewState.poll", () => {
  it("appends exactly the server's bytes as lines and stops at terminal", async () => {
    // reveal cut points fall mid-line and mid-multibyte-character
    const api = new FixtureApi(
      ["pending", "running", "running", "succeeded", "succeeded"],
      LOG_BYTES,
      [0, 5, 18, LOG_BYTES.length, LOG_BYTES.length],
    );
    const state = new RunViewState("abc123");
    await pollRunView(state, api, 0, async () => {});
    expect(state.status).toBe("succeeded");
    expect(state.logLines).toEqual(["OUT starting", "OUT naïve α line", "ERR warning", "OUT done"]);
    expect(state.logOffset).toBe(LOG_BYTES.length);
    expect(state.errorBanner).toBeNull();
  });

  it("keeps the offset monotone across polls", async () => {
    const api = new FixtureApi(
      ["running", "running", "succeeded"],
      LOG_BYTES,
      [10, 25, LOG_BYTES.length],
    );
    const state = new RunViewState("abc123");
    const offsets: number[] = [];
    let more = true;
    while (more) {
      more = await state.poll(api);
      offsets.push(state.logOffset);
    }
    for (let i = 1; i < offsets.length; i++) {
      expect(offsets[i]).toBeGreaterThanOrEqual(offsets[i - 1]);
    }
  });

  it("shows a dismissible banner when the task is gone", async () => {
    const api: TaskApi = {
      async task() {
        throw new ApiError(404, "UnknownTask", "no task with id abc123");
      },
      async taskLog(): Promise<LogSegment> {
        throw new Error("unreachable");
      },
    };
    const state = new RunViewState("abc123");
    const keepPolling = await state.poll(api);
    expect(keepPolling).toBe(false);
    expect(state.errorBanner).toContain("abc123");
    state.dismissError();
    expect(state.errorBanner).toBeNull();
  });
});
