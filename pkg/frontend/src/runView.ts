// Task monitor state machine: poll the task snapshot and the next log
// segment, append decoded lines, stop at a terminal state. The UI never
// invents state: status and log content come verbatim from responses.

import { ApiError, decodeSegment } from "./api.js";
import type { LogSegment, TaskInfo } from "./api.js";

/** The slice of the API a task monitor needs (ApiClient satisfies it). */
export interface TaskApi {
  task(id: string): Promise<TaskInfo>;
  taskLog(id: string, offset: number, maxLen: number): Promise<LogSegment>;
}

const TERMINAL = new Set(["succeeded", "failed"]);
const SEGMENT_BYTES = 4096;

export class RunViewState {
  taskId: string;
  logOffset = 0;
  status = "pending";
  logLines: string[] = [];
  task: TaskInfo | null = null;
  errorBanner: string | null = null;
  /** trailing bytes of an unterminated line, carried between polls */
  private fragment = "";
  private decoder = new TextDecoder("utf-8");

  constructor(taskId: string) {
    this.taskId = taskId;
  }

  get terminal(): boolean {
    return TERMINAL.has(this.status);
  }

  dismissError(): void {
    this.errorBanner = null;
  }

  appendBytes(bytes: Uint8Array): void {
    const text = this.fragment + this.decoder.decode(bytes, { stream: true });
    const lines = text.split("\n");
    this.fragment = lines.pop() ?? "";
    this.logLines.push(...lines);
  }

  private flushFragment(): void {
    const tail = this.decoder.decode();
    if (this.fragment + tail) {
      this.logLines.push(this.fragment + tail);
      this.fragment = "";
    }
  }

  /**
   * One poll step: refresh the task snapshot, then drain available log
   * bytes. Returns false once polling should stop (terminal state with
   * the log fully consumed, or an unrecoverable error).
   */
  async poll(client: TaskApi): Promise<boolean> {
    let task: TaskInfo;
    try {
      task = await client.task(this.taskId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.errorBanner = `task ${this.taskId} is gone (server restarted?)`;
        return false;
      }
      throw err;
    }
    this.task = task;
    this.status = task.state;
    for (;;) {
      const segment = await client.taskLog(this.taskId, this.logOffset, SEGMENT_BYTES);
      if (segment.next_offset < this.logOffset) {
        break; // never regress the offset
      }
      const bytes = decodeSegment(segment);
      if (bytes.length > 0) {
        this.appendBytes(bytes);
        this.logOffset = segment.next_offset;
      }
      if (segment.eof || bytes.length === 0) {
        if (segment.eof) {
          this.flushFragment();
        }
        break;
      }
    }
    return !this.terminal;
  }
}

/** Poll until terminal, waiting `intervalMs` between steps. */
export async function pollRunView(
  state: RunViewState,
  client: TaskApi,
  intervalMs = 500,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
): Promise<RunViewState> {
  while (await state.poll(client)) {
    await sleep(intervalMs);
  }
  return state;
}
