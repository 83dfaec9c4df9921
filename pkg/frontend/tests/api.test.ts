import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, toBase64 } from "../src/api.js";

function mockFetch(status: number, body: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fn = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), { status });
  };
  return { fn, calls };
}

describe("ApiClient", () => {
  it("submits jobs with base64 payload and seed", async () => {
    const { fn, calls } = mockFetch(202, {
      job_id: "abc", kind: "sketchify", status: "queued",
      stages: [], artifacts: {}, error: null,
    });
    const client = new ApiClient("http://svc", fn);
    const view = await client.submitJob("sketchify", new Uint8Array([1, 2, 3]), 7);
    expect(view.job_id).toBe("abc");
    expect(calls[0].url).toBe("http://svc/api/jobs");
    const sent = JSON.parse(String(calls[0].init?.body));
    expect(sent.kind).toBe("sketchify");
    expect(sent.seed).toBe(7);
    expect(sent.image_b64).toBe(toBase64(new Uint8Array([1, 2, 3])));
  });

  it("surfaces error details with status codes", async () => {
    const { fn } = mockFetch(409, { detail: "source job is not done" });
    const client = new ApiClient("http://svc", fn);
    const err = await client.interpolate("a", "b", 3).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.message).toContain("source job is not done");
  });

  it("maps network failure to status 0", async () => {
    const client = new ApiClient("http://svc", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
  });

  it("builds asset URLs from job-view paths", () => {
    const client = new ApiClient("http://svc");
    expect(client.assetUrl("/assets/j1/sketch.png"))
      .toBe("http://svc/assets/j1/sketch.png");
  });

  it("encodes bytes to base64 correctly", () => {
    expect(toBase64(new Uint8Array([77, 97, 110]))).toBe("TWFu");
    expect(toBase64(new Uint8Array([]))).toBe("");
    expect(toBase64(new Uint8Array([255, 0, 128])))
      .toBe(Buffer.from([255, 0, 128]).toString("base64"));
  });
});
