import { describe, expect, it } from "vitest";

import { ServiceClient, ServiceError } from "../src/api.js";

describe("ServiceClient", () => {
  it("posts suggest requests as JSON and parses the response", async () => {
    let captured: { url?: string; body?: unknown } = {};
    const fetchImpl = async (url: string, init?: { body?: string }) => {
      captured = { url, body: init?.body ? JSON.parse(init.body) : null };
      return {
        ok: true,
        status: 200,
        json: async () => ({
          candidates: [{ text: "hi", score: 0.5, provenance: "generated" }],
          model_version: "v",
          latency_ms: 2,
        }),
      };
    };
    const client = new ServiceClient("http://svc", fetchImpl);
    const out = await client.suggest({ kind: "complete", text: "a" });
    expect(captured.url).toBe("http://svc/v1/suggest");
    expect(captured.body).toEqual({ kind: "complete", text: "a" });
    expect(out.candidates[0].text).toBe("hi");
  });

  it("raises ServiceError with the status on failure", async () => {
    const fetchImpl = async () => ({
      ok: false,
      status: 400,
      json: async () => ({}),
    });
    const client = new ServiceClient("http://svc", fetchImpl);
    await expect(client.suggest({ kind: "correct", text: "x" })).rejects.toThrow(
      ServiceError
    );
  });

  it("fetches health", async () => {
    const fetchImpl = async (url: string) => ({
      ok: true,
      status: 200,
      json: async () => ({ status: "ok", models: ["lm"] }),
    });
    const client = new ServiceClient("http://svc", fetchImpl);
    const health = await client.health();
    expect(health.status).toBe("ok");
  });
});
