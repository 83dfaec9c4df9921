// Job polling: 1 Hz per active job, at most one in-flight request per
// job, monotonic stage display, stops on terminal status.

import { ApiClient, JobView } from "./api.js";

export const POLL_INTERVAL_MS = 1000;

export interface PollHandle {
  stop(): void;
}

export class JobPoller {
  private readonly timers = new Map<string, ReturnType<typeof setInterval>>();
  private readonly inFlight = new Set<string>();
  private readonly doneStages = new Map<string, Set<string>>();

  constructor(
    private readonly client: ApiClient,
    private readonly onUpdate: (view: JobView) => void,
    private readonly onError: (jobId: string, err: unknown) => void = () => {},
  ) {}

  get activeJobs(): string[] {
    return [...this.timers.keys()];
  }

  watch(jobId: string): PollHandle {
    if (this.timers.has(jobId)) {
      return { stop: () => this.unwatch(jobId) };
    }
    this.doneStages.set(jobId, new Set());
    const timer = setInterval(() => void this.tick(jobId), POLL_INTERVAL_MS);
    this.timers.set(jobId, timer);
    void this.tick(jobId); // immediate first poll
    return { stop: () => this.unwatch(jobId) };
  }

  unwatch(jobId: string): void {
    const timer = this.timers.get(jobId);
    if (timer !== undefined) clearInterval(timer);
    this.timers.delete(jobId);
    this.doneStages.delete(jobId);
  }

  stopAll(): void {
    for (const id of [...this.timers.keys()]) this.unwatch(id);
  }

  private async tick(jobId: string): Promise<void> {
    if (this.inFlight.has(jobId)) return; // one request per job at a time
    this.inFlight.add(jobId);
    try {
      const view = await this.client.getJob(jobId);
      this.onUpdate(this.monotonic(jobId, view));
      if (view.status === "done" || view.status === "failed") {
        this.unwatch(jobId);
      }
    } catch (err) {
      this.onError(jobId, err);
    } finally {
      this.inFlight.delete(jobId);
    }
  }

  /** A stage once reported done never flips back in the UI. */
  private monotonic(jobId: string, view: JobView): JobView {
    const seen = this.doneStages.get(jobId);
    if (!seen) return view;
    for (const s of view.stages) {
      if (s.done) seen.add(s.stage);
    }
    return {
      ...view,
      stages: view.stages.map((s) => ({ ...s, done: seen.has(s.stage) })),
    };
  }
}
