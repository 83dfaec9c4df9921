// Typed client for the sketchvision REST surface. The UI talks to the
// service exclusively through this module.

export type JobKind = "sketchify" | "sketch_to_3d" | "roundtrip" | "interpolate";
export type JobStatus = "queued" | "running" | "done" | "failed";

export interface StageView {
  stage: string;
  done: boolean;
}

export interface JobView {
  job_id: string;
  kind: JobKind;
  status: JobStatus;
  stages: StageView[];
  artifacts: Record<string, string[]>;
  error: string | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (e) {
      throw new ApiError(0, `service unreachable: ${e}`);
    }
    const body = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new ApiError(res.status, (body as { detail?: string }).detail ?? res.statusText);
    }
    return body as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/health");
  }

  submitJob(kind: Exclude<JobKind, "interpolate">, pngBytes: Uint8Array, seed = 0): Promise<JobView> {
    return this.request("/api/jobs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, image_b64: toBase64(pngBytes), seed }),
    });
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request(`/api/jobs/${jobId}`);
  }

  listJobs(): Promise<{ jobs: JobView[] }> {
    return this.request("/api/jobs");
  }

  interpolate(jobA: string, jobB: string, n: number, seed = 0): Promise<JobView> {
    return this.request("/api/interpolate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ latent_a_job: jobA, latent_b_job: jobB, n, seed }),
    });
  }

  /** Absolute URL for an /assets/... path returned in a job view. */
  assetUrl(path: string): string {
    return this.baseUrl + path;
  }

  async fetchAsset(path: string): Promise<Uint8Array> {
    const res = await this.fetchFn(this.assetUrl(path));
    if (!res.ok) throw new ApiError(res.status, `asset ${path} unavailable`);
    return new Uint8Array(await res.arrayBuffer());
  }
}

export function toBase64(bytes: Uint8Array): string {
  let bin = "";
  for (let i = 0; i < bytes.length; i++) bin += String.fromCharCode(bytes[i]);
  // btoa exists in browsers; Buffer covers node test runs
  if (typeof btoa === "function") return btoa(bin);
  return Buffer.from(bytes).toString("base64");
}
