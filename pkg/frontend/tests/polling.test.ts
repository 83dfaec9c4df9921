import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, JobView } from "../src/api.js";
import { JobPoller, POLL_INTERVAL_MS } from "../src/polling.js";

function view(status: JobView["status"], stages: [string, boolean][] = []): JobView {
  return {
    job_id: "j1", kind: "sketch_to_3d", status,
    stages: stages.map(([stage, done]) => ({ stage, done })),
    artifacts: {}, error: null,
  };
}

describe("JobPoller", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("polls at 1 Hz and stops on terminal status", async () => {
    const responses = [view("queued"), view("running"), view("done")];
    let calls = 0;
    const client = {
      getJob: async () => {
        calls += 1;
        return responses[Math.min(calls - 1, responses.length - 1)];
      },
    } as unknown as ApiClient;
    const seen: string[] = [];
    const poller = new JobPoller(client, (v) => seen.push(v.status));

    poller.watch("j1");
    await vi.advanceTimersByTimeAsync(0); // immediate first poll
    expect(seen).toEqual(["queued"]);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(seen).toEqual(["queued", "running", "done"]);
    expect(poller.activeJobs).toEqual([]);
    // no further polls after terminal
    await vi.advanceTimersByTimeAsync(5 * POLL_INTERVAL_MS);
    expect(calls).toBe(3);
  });

  it("keeps at most one request in flight per job", async () => {
    let inFlight = 0;
    let peak = 0;
    const client = {
      getJob: () => new Promise<JobView>((resolve) => {
        inFlight += 1;
        peak = Math.max(peak, inFlight);
        // responses take 3 poll intervals to arrive
        setTimeout(() => {
          inFlight -= 1;
          resolve(view("running"));
        }, 3 * POLL_INTERVAL_MS);
      }),
    } as unknown as ApiClient;
    const poller = new JobPoller(client, () => {});
    poller.watch("j1");
    await vi.advanceTimersByTimeAsync(10 * POLL_INTERVAL_MS);
    expect(peak).toBe(1);
    poller.stopAll();
  });

  it("stage display is monotonic even if the server regresses", async () => {
    const responses = [
      view("running", [["sketch", true], ["photo", false]]),
      view("running", [["sketch", false], ["photo", true]]),
    ];
    let calls = 0;
    const client = {
      getJob: async () => responses[Math.min(calls++, responses.length - 1)],
    } as unknown as ApiClient;
    const seen: JobView[] = [];
    const poller = new JobPoller(client, (v) => seen.push(v));
    poller.watch("j1");
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(seen[1].stages).toEqual([
      { stage: "sketch", done: true },
      { stage: "photo", done: true },
    ]);
    poller.stopAll();
  });

  it("reports errors without stopping the loop", async () => {
    let calls = 0;
    const client = {
      getJob: async () => {
        calls += 1;
        if (calls === 1) throw new Error("boom");
        return view("done");
      },
    } as unknown as ApiClient;
    const errors: unknown[] = [];
    const poller = new JobPoller(client, () => {}, (_id, e) => errors.push(e));
    poller.watch("j1");
    await vi.advanceTimersByTimeAsync(0);
    expect(errors).toHaveLength(1);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(poller.activeJobs).toEqual([]);
  });

  it("watching the same job twice does not double-poll", async () => {
    let calls = 0;
    const client = {
      getJob: async () => {
        calls += 1;
        return view("running");
      },
    } as unknown as ApiClient;
    const poller = new JobPoller(client, () => {});
    poller.watch("j1");
    poller.watch("j1");
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(calls).toBe(2);
    poller.stopAll();
  });
});
