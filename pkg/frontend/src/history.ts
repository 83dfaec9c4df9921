// Session history reconstructed from the service alone, so a refresh
// loses nothing: the job listing is the source of truth.

import { ApiClient, JobView } from "./api.js";

export interface HistoryEntry {
  jobId: string;
  kind: string;
  status: string;
  thumbnail: string | null;
}

export class SessionHistory {
  entries: HistoryEntry[] = [];
  selectedPair: [string | null, string | null] = [null, null];

  static entryFromView(view: JobView): HistoryEntry {
    const thumbs = view.artifacts["photo"] ?? view.artifacts["sketch"]
      ?? view.artifacts["frames"] ?? [];
    return {
      jobId: view.job_id,
      kind: view.kind,
      status: view.status,
      thumbnail: thumbs[0] ?? null,
    };
  }

  async refresh(client: ApiClient): Promise<void> {
    const { jobs } = await client.listJobs();
    this.entries = jobs.map(SessionHistory.entryFromView);
    const ids = new Set(this.entries.map((e) => e.jobId));
    this.selectedPair = [
      this.selectedPair[0] && ids.has(this.selectedPair[0]) ? this.selectedPair[0] : null,
      this.selectedPair[1] && ids.has(this.selectedPair[1]) ? this.selectedPair[1] : null,
    ];
  }

  upsert(view: JobView): void {
    const entry = SessionHistory.entryFromView(view);
    const at = this.entries.findIndex((e) => e.jobId === entry.jobId);
    if (at >= 0) this.entries[at] = entry;
    else this.entries.push(entry);
  }

  select(jobId: string): void {
    if (!this.entries.some((e) => e.jobId === jobId)) {
      throw new Error(`job ${jobId} is not in the session history`);
    }
    const [a, b] = this.selectedPair;
    if (a === jobId || b === jobId) return;
    this.selectedPair = a === null ? [jobId, b] : [a, jobId];
  }

  clearSelection(): void {
    this.selectedPair = [null, null];
  }

  get interpolationReady(): boolean {
    const [a, b] = this.selectedPair;
    return a !== null && b !== null && a !== b;
  }
}
